use serde::{Deserialize, Serialize};

use super::Operator;
use crate::error::{LabError, Result};
use crate::field::{same_domain, Field};
use crate::forms::form_a;

/// Numeric defects of an operator, one per structural property.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub isometry: f64,
    pub disjointness: f64,
    pub intertwining: f64,
    pub orthogonality: f64,
    pub grad_g: f64,
    pub weight: f64,
    pub n1_measure: f64,
    pub n2_cells: usize,
}

fn check_source(op: &dyn Operator, u: &Field) -> Result<()> {
    if same_domain(u.domain(), op.source()) {
        Ok(())
    } else {
        Err(LabError::DomainMismatch)
    }
}

/// `max | ||T u||_{W^{1,p}(target)} - ||u||_{W^{1,p}(source)} |`.
pub fn isometry_defect(op: &dyn Operator, samples: &[Field], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(LabError::EmptyInput("isometry samples"));
    }
    let mut worst: f64 = 0.0;
    for u in samples {
        check_source(op, u)?;
        let tu = op.apply(u)?;
        worst = worst.max((tu.w1p_norm(p)? - u.w1p_norm(p)?).abs());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DisjointnessDefect {
    /// Largest `|| |Tu| ^ |Tv| ||_p` over all target nodes.
    pub full: f64,
    /// Same, ignoring target nodes whose `xi(y)` lies within two source
    /// cells of both supports. Equals `full` for operators without a map.
    pub outside_band: f64,
}

/// Image overlap of pairs with disjoint nodal supports.
pub fn disjointness_defect(op: &dyn Operator, pairs: &[(Field, Field)], p: f64) -> Result<DisjointnessDefect> {
    if pairs.is_empty() {
        return Err(LabError::EmptyInput("disjoint pairs"));
    }
    let mut defect = DisjointnessDefect {
        full: 0.0,
        outside_band: 0.0,
    };
    for (k, (u, v)) in pairs.iter().enumerate() {
        check_source(op, u)?;
        check_source(op, v)?;
        if !u.is_disjoint_from(v)? {
            return Err(LabError::NotDisjoint(k));
        }
        let overlap = op.apply(u)?.lattice_overlap(&op.apply(v)?)?;
        defect.full = defect.full.max(overlap.lp_norm(p)?);
        let outside = match op.composition_map() {
            Some(map) => {
                let masked: Vec<f64> = overlap
                    .values()
                    .iter()
                    .zip(map)
                    .map(|(&w, x)| {
                        if w != 0.0 && near_support(u, *x) && near_support(v, *x) {
                            0.0
                        } else {
                            w
                        }
                    })
                    .collect();
                Field::new(overlap.domain().clone(), masked)?.lp_norm(p)?
            }
            None => overlap.lp_norm(p)?,
        };
        defect.outside_band = defect.outside_band.max(outside);
    }
    Ok(defect)
}

// true if some node of supp u lies within 2h of x
fn near_support(u: &Field, x: [f64; 2]) -> bool {
    let d = u.domain();
    let h = d.h();
    let k = d.lattice_index(x);
    let reach = 2.0 * h;
    let span = if d.dim() == 1 { 0 } else { 3 };
    for di in -3..=3 {
        for dj in -span..=span {
            if let Some(j) = d.index_of([k[0] + di, k[1] + dj]) {
                if u.value(j) != 0.0 && crate::field::dist(d.dim(), d.center(j), x) <= reach {
                    return true;
                }
            }
        }
    }
    false
}

/// `max | a_p(target)(Tu, Tv) - a_p(source)(u, v) |` over trial pairs.
///
/// Each `v` must vanish on the boundary layer of the source and each `T v`
/// on the boundary layer of the target.
pub fn intertwining_defect(op: &dyn Operator, trials: &[(Field, Field)], p: f64) -> Result<f64> {
    if trials.is_empty() {
        return Err(LabError::EmptyInput("intertwining trials"));
    }
    let mut worst: f64 = 0.0;
    for (k, (u, v)) in trials.iter().enumerate() {
        check_source(op, u)?;
        check_source(op, v)?;
        if !v.vanishes_on_boundary_layer() {
            return Err(LabError::NotCompactlySupported(format!(
                "trial {k}: v is nonzero on the source boundary layer"
            )));
        }
        let tv = op.apply(v)?;
        if !tv.vanishes_on_boundary_layer() {
            return Err(LabError::NotCompactlySupported(format!(
                "trial {k}: Tv is nonzero on the target boundary layer"
            )));
        }
        let tu = op.apply(u)?;
        worst = worst.max((form_a(&tu, &tv, p)? - form_a(u, v, p)?).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::bump;
    use crate::grid_domain::GridDomain;
    use crate::operators::{AveragingOperator, OperatorSpec};
    use std::sync::Arc;

    fn square(h: f64) -> Arc<GridDomain> {
        Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h).unwrap())
    }

    #[test]
    fn identity_has_no_defects() {
        let d = square(0.05);
        let op = OperatorSpec::identity(&d).unwrap();
        let u = Field::from_fn(&d, |x| x[0] * x[1] + 0.3).unwrap();
        let v = bump(&d, [0.5, 0.5], 0.2).unwrap();
        assert!(isometry_defect(&op, &[u.clone()], 3.0).unwrap() <= 1e-8);
        assert!(intertwining_defect(&op, &[(u.clone(), v.clone())], 3.0).unwrap() <= 1e-10);
        let w = bump(&d, [0.2, 0.2], 0.1).unwrap();
        let dj = disjointness_defect(&op, &[(v.clone(), w)], 3.0).unwrap();
        assert_eq!(dj.full, 0.0);
        assert!(matches!(
            disjointness_defect(&op, &[(v.clone(), v.clone())], 3.0),
            Err(LabError::NotDisjoint(0))
        ));
        assert!(matches!(
            intertwining_defect(&op, &[(v.clone(), u.clone())], 3.0),
            Err(LabError::NotCompactlySupported(_))
        ));
        assert!(isometry_defect(&op, &[], 3.0).is_err());
    }

    #[test]
    fn example_4_8_is_not_isometric() {
        let op = OperatorSpec::example_4_8(1e-4).unwrap();
        let one = Field::constant(op.source(), 1.0);
        let d = isometry_defect(&op, &[one], 2.0).unwrap();
        // |sqrt(23.66) - sqrt(0.118)|
        let want = 23.66f64.sqrt() - 0.118f64.sqrt();
        assert!((d - want).abs() < 0.01, "{d} vs {want}");
    }

    #[test]
    fn scaling_breaks_intertwining() {
        let d = square(0.05);
        let p = 3.0;
        let op = OperatorSpec::identity(&d).unwrap().scaled(2.0).unwrap();
        let u = Field::from_fn(&d, |x| 1.0 + x[0]).unwrap();
        let v = bump(&d, [0.5, 0.5], 0.3).unwrap();
        let a = form_a(&u, &v, p).unwrap();
        assert!(a.abs() > 1e-3);
        let defect = intertwining_defect(&op, &[(u, v)], p).unwrap();
        assert!(defect >= (2f64.powf(p) - 1.0) * a.abs() * (1.0 - 1e-12));
    }

    #[test]
    fn averaging_mixes_mirrored_supports() {
        let d = square(0.02);
        let avg = AveragingOperator::new(&d, 0, 0.5).unwrap();
        let u = bump(&d, [0.25, 0.5], 0.2).unwrap();
        let v = bump(&d, [0.75, 0.5], 0.2).unwrap();
        let dj = disjointness_defect(&avg, &[(u, v)], 3.0).unwrap();
        assert!(dj.outside_band > 0.1, "{dj:?}");
    }

    #[test]
    fn report_field_names() {
        let json = serde_json::to_value(DefectReport::default()).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "disjointness",
                "grad_g",
                "intertwining",
                "isometry",
                "n1_measure",
                "n2_cells",
                "orthogonality",
                "weight"
            ]
        );
    }
}
