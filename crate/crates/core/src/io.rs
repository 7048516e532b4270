//! JSON specs for domains, motions and operators; CSV dumps of fields.
//!
//! Domain specs:
//!
//! ```text
//! "example_5_4_omega2"                       builtin name, width from context
//! "fat_cantor(0.5)"                          complement of a fat Cantor set
//! {"builtin": "unit_square", "h": 0.01}
//! {"h": 0.01, "boxes": [{"lo": [0, 0], "hi": [1, 1]}], "subtract": [...]}
//! ```
//!
//! Operator specs:
//!
//! ```text
//! {"builtin": "example_4_8", "h": 0.001}
//! {"rigid": [{"Q": [[..]], "b": [..], "sign": 1, "component": 0}], "target": <domain>, "source": <domain>}
//! {"tabulated": {"g": "g.csv", "xi": "xi.csv"}, "target": <domain>, "source": <domain>}
//! ```
//!
//! A missing `target` falls back to the domain supplied by the caller and a
//! missing `source` to the target.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid_domain::{parse_fat_cantor, GridDomain, Point, RigidMotion};
use crate::operators::{Builtin, ComponentMotion, OperatorSpec};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Named(String),
    Builtin {
        builtin: String,
        h: Option<f64>,
    },
    Boxes {
        dim: Option<usize>,
        h: f64,
        boxes: Vec<BoxSpec>,
        #[serde(default)]
        subtract: Vec<BoxSpec>,
    },
}

#[derive(Clone, Debug, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn corners(b: &BoxSpec, dim: usize) -> Result<(Point, Point)> {
    if b.lo.len() != dim || b.hi.len() != dim {
        return Err(LabError::Parse(format!(
            "box corners must have {dim} coordinates, got {:?} and {:?}",
            b.lo, b.hi
        )));
    }
    let mut lo = [0.0; 2];
    let mut hi = [1.0; 2];
    lo[..dim].copy_from_slice(&b.lo);
    hi[..dim].copy_from_slice(&b.hi);
    Ok((lo, hi))
}

/// Names accepted in the builtin forms of a domain spec.
pub const DOMAIN_NAMES: &[&str] = &[
    "unit_interval",
    "unit_square",
    "example_5_4_omega1",
    "example_5_4_omega2",
    "example_4_8_target",
    "fat_cantor(<removed>)",
];

fn named_domain(name: &str, h: f64) -> Result<GridDomain> {
    match name {
        "unit_interval" => GridDomain::make_box(&[0.0], &[1.0], h),
        "unit_square" => GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h),
        "example_5_4_omega1" => GridDomain::example_5_4_omega1(h),
        "example_5_4_omega2" => GridDomain::example_5_4_omega2(h),
        "example_4_8_target" => GridDomain::make_box(&[1.0], &[2.0], h),
        other => match parse_fat_cantor(other) {
            Some(removed) => GridDomain::fat_cantor(removed, h).map(|(d, _)| d),
            None => Err(LabError::Parse(format!(
                "unknown domain {other:?}; expected one of {DOMAIN_NAMES:?}"
            ))),
        },
    }
}

impl DomainSpec {
    /// `default_h` is used by the named forms that carry no width.
    pub fn build(&self, default_h: f64) -> Result<GridDomain> {
        match self {
            DomainSpec::Named(name) => named_domain(name, default_h),
            DomainSpec::Builtin { builtin, h } => named_domain(builtin, h.unwrap_or(default_h)),
            DomainSpec::Boxes {
                dim,
                h,
                boxes,
                subtract,
            } => {
                let first = boxes
                    .first()
                    .ok_or_else(|| LabError::Parse("domain spec has no boxes".into()))?;
                let dim = dim.unwrap_or(first.lo.len());
                let boxes = boxes.iter().map(|b| corners(b, dim)).collect::<Result<Vec<_>>>()?;
                let subtract = subtract
                    .iter()
                    .map(|b| corners(b, dim))
                    .collect::<Result<Vec<_>>>()?;
                GridDomain::from_boxes(dim, *h, &boxes, &subtract)
            }
        }
    }
}

/// Reads `arg` as a file if it names one, otherwise as inline spec text.
/// Bare names need not be quoted.
fn read_arg(arg: &str) -> Result<(String, PathBuf)> {
    let path = Path::new(arg);
    if path.is_file() {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((fs::read_to_string(path)?, base));
    }
    let text = arg.trim();
    if text.starts_with('{') || text.starts_with('"') {
        Ok((text.to_string(), PathBuf::new()))
    } else {
        Ok((serde_json::to_string(text)?, PathBuf::new()))
    }
}

pub fn parse_domain(text: &str, default_h: f64) -> Result<GridDomain> {
    let spec: DomainSpec = serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
    spec.build(default_h)
}

pub fn load_domain(arg: &str, default_h: f64) -> Result<GridDomain> {
    let (text, _) = read_arg(arg)?;
    parse_domain(&text, default_h)
}

pub fn load_motion(arg: &str) -> Result<RigidMotion> {
    let (text, _) = read_arg(arg)?;
    let text = match text.trim() {
        "\"identity\"" | "\"identity2\"" => return Ok(RigidMotion::identity(2)),
        "\"identity1\"" => return Ok(RigidMotion::identity(1)),
        _ => text,
    };
    serde_json::from_str(&text).map_err(|e| LabError::Parse(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct RigidEntry {
    #[serde(flatten)]
    motion: RigidMotion,
    component: usize,
}

#[derive(Debug, Deserialize)]
struct TabulatedFiles {
    g: PathBuf,
    xi: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    builtin: Option<String>,
    rigid: Option<Vec<RigidEntry>>,
    tabulated: Option<TabulatedFiles>,
    h: Option<f64>,
    target: Option<DomainSpec>,
    source: Option<DomainSpec>,
}

/// Parses an operator spec. `domain` stands in for a missing `target`;
/// `default_h` for a missing width.
pub fn parse_operator(text: &str, base: &Path, domain: Option<&Arc<GridDomain>>, default_h: f64) -> Result<OperatorSpec> {
    let file: OperatorFile = serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
    let h = file.h.unwrap_or(default_h);
    let target = match &file.target {
        Some(spec) => Some(Arc::new(spec.build(h)?)),
        None => domain.cloned(),
    };
    let source = match &file.source {
        Some(spec) => Some(Arc::new(spec.build(h)?)),
        None => target.clone(),
    };
    let variants =
        usize::from(file.builtin.is_some()) + usize::from(file.rigid.is_some()) + usize::from(file.tabulated.is_some());
    if variants != 1 {
        return Err(LabError::Parse(
            "operator spec needs exactly one of builtin, rigid, tabulated".into(),
        ));
    }
    let need = |d: Option<Arc<GridDomain>>, what: &str| {
        d.ok_or_else(|| LabError::Parse(format!("operator spec has no {what} domain")))
    };
    if let Some(name) = &file.builtin {
        let which = Builtin::from_name(name)
            .ok_or_else(|| LabError::Parse(format!("unknown builtin operator {name:?}")))?;
        return OperatorSpec::builtin(which, h, target.as_ref());
    }
    if let Some(entries) = file.rigid {
        let target = need(target, "target")?;
        let source = need(source, "source")?;
        let motions = entries
            .into_iter()
            .map(|e| ComponentMotion {
                motion: e.motion,
                component: e.component,
            })
            .collect();
        return OperatorSpec::rigid(&source, &target, motions);
    }
    let files = file.tabulated.expect("one variant is present");
    let target = need(target, "target")?;
    let source = need(source, "source")?;
    let g = read_field_csv(&base.join(&files.g), &target)?;
    let xi = read_vector_field_csv(&base.join(&files.xi), &target)?;
    OperatorSpec::tabulated(&source, &g, &xi)
}

pub fn load_operator(arg: &str, domain: Option<&Arc<GridDomain>>, default_h: f64) -> Result<OperatorSpec> {
    let (text, base) = read_arg(arg)?;
    parse_operator(&text, &base, domain, default_h)
}

fn index_headers(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["i", "x"]
    } else {
        &["i", "j", "x", "y"]
    }
}

fn write_rows<W: std::io::Write>(
    w: W,
    domain: &GridDomain,
    value_headers: &[&str],
    values: impl Fn(usize) -> Vec<f64>,
) -> Result<()> {
    let dim = domain.dim();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = index_headers(dim).to_vec();
    header.extend_from_slice(value_headers);
    out.write_record(&header)?;
    for i in 0..domain.len() {
        let k = domain.cell(i);
        let x = domain.center(i);
        let mut row: Vec<String> = (0..dim).map(|a| k[a].to_string()).collect();
        row.extend((0..dim).map(|a| format!("{:?}", x[a])));
        row.extend(values(i).iter().map(|v| format!("{v:?}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_field_csv<W: std::io::Write>(w: W, f: &Field) -> Result<()> {
    write_rows(w, f.domain(), &["value"], |i| vec![f.value(i)])
}

pub fn write_vector_field_csv<W: std::io::Write>(w: W, f: &VectorField) -> Result<()> {
    let dim = f.domain().dim();
    let headers: &[&str] = if dim == 1 { &["value_0"] } else { &["value_0", "value_1"] };
    write_rows(w, f.domain(), headers, |i| f.value(i)[..dim].to_vec())
}

// Values keyed by lattice index, checked against `domain`.
fn read_rows(path: &Path, domain: &GridDomain, value_names: &[&str]) -> Result<Vec<[f64; 2]>> {
    let dim = domain.dim();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LabError::Parse(format!("{}: missing column {name:?}", path.display())))
    };
    let idx: Vec<usize> = index_headers(dim)[..dim]
        .iter()
        .map(|n| column(n))
        .collect::<Result<_>>()?;
    let vals: Vec<usize> = value_names.iter().map(|n| column(n)).collect::<Result<_>>()?;
    let mut by_cell: HashMap<[i64; 2], [f64; 2]> = HashMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| LabError::Parse(format!("{}: row {}: bad {what}", path.display(), line + 1));
        let mut k = [0i64; 2];
        for (a, &c) in idx.iter().enumerate() {
            k[a] = record.get(c).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("index"))?;
        }
        let mut v = [0.0; 2];
        for (a, &c) in vals.iter().enumerate() {
            v[a] = record.get(c).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("value"))?;
        }
        by_cell.insert(k, v);
    }
    if by_cell.len() != domain.len() {
        return Err(LabError::Parse(format!(
            "{}: {} rows for a domain of {} cells",
            path.display(),
            by_cell.len(),
            domain.len()
        )));
    }
    domain
        .cells()
        .iter()
        .map(|k| {
            by_cell
                .get(k)
                .copied()
                .ok_or_else(|| LabError::Parse(format!("{}: no row for cell {k:?}", path.display())))
        })
        .collect()
}

pub fn read_field_csv(path: &Path, domain: &Arc<GridDomain>) -> Result<Field> {
    let rows = read_rows(path, domain, &["value"])?;
    Field::new(Arc::clone(domain), rows.into_iter().map(|v| v[0]).collect())
}

pub fn read_vector_field_csv(path: &Path, domain: &Arc<GridDomain>) -> Result<VectorField> {
    let rows = read_rows(path, domain, &["value_0", "value_1"][..domain.dim()])?;
    VectorField::new(Arc::clone(domain), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Operator;

    #[test]
    fn domain_forms() {
        let a = parse_domain(r#"{"h": 0.1, "boxes": [{"lo": [0, 0], "hi": [1, 2]}]}"#, 0.5).unwrap();
        assert_eq!(a.len(), 200);
        let b = parse_domain(r#""example_5_4_omega2""#, 0.1).unwrap();
        assert_eq!(b.len(), 200);
        let c = parse_domain(r#"{"builtin": "unit_interval", "h": 0.25}"#, 0.1).unwrap();
        assert_eq!(c.len(), 4);
        let d = load_domain("fat_cantor(0.5)", 1e-3).unwrap();
        assert!((d.measure() - 0.5).abs() < 0.02);
        let e = parse_domain(
            r#"{"h": 0.1, "boxes": [{"lo": [0, 0], "hi": [1, 1]}], "subtract": [{"lo": [0.5, 0], "hi": [1, 1]}]}"#,
            0.1,
        )
        .unwrap();
        assert_eq!(e.len(), 50);
        assert!(matches!(parse_domain(r#""nowhere""#, 0.1), Err(LabError::Parse(_))));
        assert!(matches!(parse_domain("{", 0.1), Err(LabError::Parse(_))));
    }

    #[test]
    fn operator_forms() {
        let op = load_operator(r#"{"builtin": "example_5_4", "h": 0.05}"#, None, 0.1).unwrap();
        assert_eq!(op.target().len(), 2 * 20 * 20);
        let sq = Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap());
        let id = load_operator(r#"{"builtin": "identity"}"#, Some(&sq), 0.1).unwrap();
        assert_eq!(id.map().len(), 100);
        let rigid = load_operator(
            r#"{"rigid": [{"Q": [[0, -1], [1, 0]], "b": [1, 0], "sign": -1, "component": 0}],
                "target": "unit_square"}"#,
            None,
            0.1,
        )
        .unwrap();
        assert!(rigid.weight().iter().all(|&g| g == -1.0));
        assert!(load_operator(r#"{"builtin": "identity", "rigid": []}"#, Some(&sq), 0.1).is_err());
        assert!(load_operator(r#"{"builtin": "nope"}"#, Some(&sq), 0.1).is_err());
    }

    #[test]
    fn csv_round_trip_and_tabulated_spec() {
        let dir = tempfile::tempdir().unwrap();
        let d = Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap());
        let g = Field::from_fn(&d, |x| 1.0 + x[0] * x[1]).unwrap();
        let xi = VectorField::from_fn(&d, |x| [1.0 - x[0], x[1]]).unwrap();
        write_field_csv(fs::File::create(dir.path().join("g.csv")).unwrap(), &g).unwrap();
        write_vector_field_csv(fs::File::create(dir.path().join("xi.csv")).unwrap(), &xi).unwrap();
        let back = read_field_csv(&dir.path().join("g.csv"), &d).unwrap();
        assert_eq!(back.values(), g.values());
        let spec = dir.path().join("op.json");
        fs::write(
            &spec,
            r#"{"tabulated": {"g": "g.csv", "xi": "xi.csv"}, "target": {"h": 0.1, "boxes": [{"lo": [0, 0], "hi": [1, 1]}]}}"#,
        )
        .unwrap();
        let op = load_operator(spec.to_str().unwrap(), None, 0.5).unwrap();
        assert_eq!(op.weight(), g.values());
        assert_eq!(op.map(), xi.values());
        let other = Arc::new(GridDomain::make_box(&[0.0], &[1.0], 0.05).unwrap());
        assert!(read_field_csv(&dir.path().join("g.csv"), &other).is_err());
    }

    #[test]
    fn csv_header_layout() {
        let d = Arc::new(GridDomain::make_box(&[0.0], &[1.0], 0.5).unwrap());
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &Field::constant(&d, 2.0)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("i,x,value"));
        assert_eq!(text.lines().nth(1), Some("0,0.25,2.0"));
    }

    #[test]
    fn motions() {
        let m = load_motion(r#"{"Q": [[0, -1], [1, 0]], "b": [0, 0]}"#).unwrap();
        assert_eq!(m.sign(), 1);
        assert!(load_motion(r#"{"Q": [[2, 0], [0, 1]], "b": [0, 0]}"#).is_err());
        assert_eq!(load_motion("identity").unwrap(), RigidMotion::identity(2));
    }
}
