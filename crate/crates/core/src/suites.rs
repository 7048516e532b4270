//! Named verification suites and their JSON reports.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::{LabError, Result};
use crate::field::{bump, exponential_probe, Field};
use crate::forms::{clarkson_check, form_a, gateaux_check_form, gateaux_check_norm, plap_residual, DEFAULT_STEPS};
use crate::grid_domain::{GridDomain, Point, RigidMotion};
use crate::io::load_operator;
use crate::operators::{
    congruence_pipeline, disjointness_defect, example_4_8_map, example_4_8_weight, intertwining_defect,
    isometry_defect, reconstruct, rigid_motion_fit, ComponentMotion, Operator, OperatorSpec,
};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    NormCalculus,
    Clarkson,
    Plaplace,
    Examples,
    Reconstruction,
    Congruence,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::NormCalculus,
        Suite::Clarkson,
        Suite::Plaplace,
        Suite::Examples,
        Suite::Reconstruction,
        Suite::Congruence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::NormCalculus => "norm-calculus",
            Suite::Clarkson => "clarkson",
            Suite::Plaplace => "plaplace",
            Suite::Examples => "examples",
            Suite::Reconstruction => "reconstruction",
            Suite::Congruence => "congruence",
        }
    }

    pub fn default_h(&self) -> f64 {
        match self {
            Suite::NormCalculus => 0.02,
            Suite::Clarkson => 0.05,
            Suite::Plaplace => 0.01,
            Suite::Examples => 1e-4,
            Suite::Reconstruction => 0.02,
            Suite::Congruence => 0.02,
        }
    }

    pub fn default_p(&self) -> f64 {
        match self {
            Suite::Examples => 2.0,
            _ => 3.0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| LabError::Parse(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub p: f64,
    pub h: f64,
    pub tol: Option<f64>,
    pub seed: u64,
    pub spec: Option<String>,
    pub report_path: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            p: suite.default_p(),
            h: suite.default_h(),
            tol: None,
            seed: 0,
            spec: None,
            report_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(LabError::InvalidExtent(format!("grid width {} must be positive", self.h)));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(LabError::Parse(format!("tolerance {t} must be positive")));
            }
        }
        let min_p = if self.suite == Suite::Clarkson { 1.0 } else { 1.0 + f64::EPSILON };
        if !(self.p >= min_p && self.p.is_finite()) {
            return Err(LabError::InvalidExponent {
                p: self.p,
                expected: if self.suite == Suite::Clarkson { "[1, inf)" } else { "(1, inf)" },
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One measured quantity and its verdict.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub tag: &'static str,
    pub value: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub status: Status,
}

impl Check {
    pub fn at_most(name: impl Into<String>, tag: &'static str, value: f64, threshold: f64) -> Self {
        Self::make(name.into(), tag, value, threshold, "<=", value <= threshold)
    }

    pub fn at_least(name: impl Into<String>, tag: &'static str, value: f64, threshold: f64) -> Self {
        Self::make(name.into(), tag, value, threshold, ">=", value >= threshold)
    }

    fn make(name: String, tag: &'static str, value: f64, threshold: f64, relation: &'static str, ok: bool) -> Self {
        Self {
            name,
            tag,
            value,
            threshold,
            relation,
            status: if ok { Status::Pass } else { Status::Fail },
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub p: f64,
    pub h: f64,
    pub tol: Option<f64>,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: BTreeMap<String, Value>,
}

impl SuiteReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Recorder {
    checks: Vec<Check>,
    details: BTreeMap<String, Value>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn detail(&mut self, key: &str, v: impl Into<Value>) {
        self.details.insert(key.to_string(), v.into());
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::new();
    match cfg.suite {
        Suite::NormCalculus => norm_calculus(cfg, &mut rng, &mut rec)?,
        Suite::Clarkson => clarkson(cfg, &mut rng, &mut rec)?,
        Suite::Plaplace => plaplace(cfg, &mut rng, &mut rec)?,
        Suite::Examples => examples(cfg, &mut rng, &mut rec)?,
        Suite::Reconstruction => reconstruction(cfg, &mut rng, &mut rec)?,
        Suite::Congruence => congruence(cfg, &mut rec)?,
    }
    Ok(SuiteReport {
        suite: cfg.suite.name(),
        p: cfg.p,
        h: cfg.h,
        tol: cfg.tol,
        seed: cfg.seed,
        passed: rec.checks.iter().all(Check::passed),
        checks: rec.checks,
        details: rec.details,
    })
}

fn unit_square(h: f64) -> Result<Arc<GridDomain>> {
    Ok(Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h)?))
}

fn unit_interval(h: f64) -> Result<Arc<GridDomain>> {
    Ok(Arc::new(GridDomain::make_box(&[0.0], &[1.0], h)?))
}

const GATEAUX_SAMPLES: usize = 5;

/// Largest relative smallest-step error and smallest slope over seeded
/// positive triples. Triples whose predicted value is below 1e-6 are skipped.
pub struct GateauxSweep {
    pub min_norm_slope: f64,
    pub max_norm_error: f64,
    pub min_form_slope: f64,
    pub max_form_error: f64,
    pub max_identity_defect: f64,
}

pub fn gateaux_sweep<R: Rng>(domain: &Arc<GridDomain>, p: f64, samples: usize, rng: &mut R) -> Result<GateauxSweep> {
    let mut out = GateauxSweep {
        min_norm_slope: f64::INFINITY,
        max_norm_error: 0.0,
        min_form_slope: f64::INFINITY,
        max_form_error: 0.0,
        max_identity_defect: 0.0,
    };
    for _ in 0..samples {
        let u = sampling::random_positive_smooth(domain, rng)?;
        // sign-changing directions can make the predicted value cancel to
        // nearly zero, which defeats the relative error
        let v = sampling::random_positive_smooth(domain, rng)?;
        let w = sampling::random_positive_smooth(domain, rng)?;
        let norm = u.w1p_norm_pow(p)?;
        let id = (form_a(&u, &u, p)? - norm).abs() / norm;
        out.max_identity_defect = out.max_identity_defect.max(id);

        let r = gateaux_check_norm(&u, &v, p, &DEFAULT_STEPS)?;
        if r.predicted.abs() > 1e-6 {
            out.max_norm_error = out.max_norm_error.max(r.last_error() / r.predicted.abs());
            out.min_norm_slope = out.min_norm_slope.min(r.slope.unwrap_or(f64::NEG_INFINITY));
        }
        if p > 2.0 {
            let r = gateaux_check_form(&u, &v, &w, p, &DEFAULT_STEPS)?;
            if r.predicted.abs() > 1e-6 {
                out.max_form_error = out.max_form_error.max(r.last_error() / r.predicted.abs());
                out.min_form_slope = out.min_form_slope.min(r.slope.unwrap_or(f64::NEG_INFINITY));
            }
        }
    }
    Ok(out)
}

fn norm_calculus(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = unit_square(cfg.h)?;
    let tol = cfg.tol.unwrap_or(1e-3);
    let s = gateaux_sweep(&d, cfg.p, GATEAUX_SAMPLES, rng)?;
    rec.push(Check::at_most("norm_form_identity", "norm-form-identity", s.max_identity_defect, 1e-12));
    rec.push(Check::at_least("norm_derivative_slope", "norm-derivative", s.min_norm_slope, 0.8));
    rec.push(Check::at_most("norm_derivative_error", "norm-derivative", s.max_norm_error, tol));
    if cfg.p > 2.0 {
        rec.push(Check::at_least("form_derivative_slope", "form-derivative", s.min_form_slope, 0.8));
        rec.push(Check::at_most("form_derivative_error", "form-derivative", s.max_form_error, tol));
    } else {
        rec.detail("form_derivative", "skipped: second form needs p > 2");
    }
    rec.detail("samples", GATEAUX_SAMPLES);
    rec.detail("steps", DEFAULT_STEPS.to_vec());
    Ok(())
}

pub const CLARKSON_PAIRS: usize = 1000;

/// Extreme slacks `(min, max)` over seeded random vector-field pairs.
pub fn clarkson_sweep<R: Rng>(domain: &Arc<GridDomain>, p: f64, pairs: usize, rng: &mut R) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let f = sampling::random_vector_field(domain, rng)?;
        let g = sampling::random_vector_field(domain, rng)?;
        let s = clarkson_check(&f, &g, p)?;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok((lo, hi))
}

fn clarkson(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = unit_square(cfg.h)?;
    let tol = cfg.tol.unwrap_or(1e-12);
    let (lo, hi) = clarkson_sweep(&d, cfg.p, CLARKSON_PAIRS, rng)?;
    if cfg.p >= 2.0 {
        rec.push(Check::at_least("min_slack", "clarkson", lo, -tol));
    }
    if cfg.p <= 2.0 {
        rec.push(Check::at_most("max_slack", "clarkson", hi, tol));
    }
    rec.detail("pairs", CLARKSON_PAIRS);
    rec.detail("min_slack", lo);
    rec.detail("max_slack", hi);
    Ok(())
}

pub const PLAPLACE_TESTS: usize = 20;

/// `plap_residual` of the exponential probe `exp(alpha x_0)` against
/// `tests` fixed bumps, on `(0,1)^dim` at each width.
pub fn probe_residuals<R: Rng>(dim: usize, p: f64, widths: &[f64], tests: usize, rng: &mut R) -> Result<Vec<f64>> {
    let bumps: Vec<(Point, f64)> = (0..tests)
        .map(|_| {
            let mut c = [0.0; 2];
            for x in c.iter_mut().take(dim) {
                *x = rng.gen_range(0.3..0.7);
            }
            (c, rng.gen_range(0.1..0.25))
        })
        .collect();
    widths
        .iter()
        .map(|&h| {
            let d = if dim == 1 { unit_interval(h)? } else { unit_square(h)? };
            let u = exponential_probe(&d, 0, 1, p)?;
            let phis = bumps
                .iter()
                .map(|&(c, r)| bump(&d, c, r))
                .collect::<Result<Vec<_>>>()?;
            plap_residual(&u, p, &phis)
        })
        .collect()
}

fn plaplace(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let widths = [cfg.h, cfg.h / 2.0, cfg.h / 4.0];
    let factor = cfg.tol.unwrap_or(1.8);
    for dim in [1, 2] {
        let r = probe_residuals(dim, cfg.p, &widths, PLAPLACE_TESTS, rng)?;
        for k in 1..r.len() {
            rec.push(Check::at_least(
                format!("probe_residual_factor_{dim}d_{k}"),
                "weak-solution",
                r[k - 1] / r[k],
                factor,
            ));
        }
        rec.detail(&format!("probe_residuals_{dim}d"), r);
    }
    // 1 solves nothing: -div 0 = 0 but |1|^(p-2) 1 = 1
    let d = unit_interval(cfg.h)?;
    let one = Field::constant(&d, 1.0);
    let phi = bump(&d, [0.5, 0.0], 0.4)?;
    rec.push(Check::at_least(
        "constant_is_not_a_solution",
        "weak-solution",
        plap_residual(&one, 2.0, &[phi])?,
        0.1,
    ));
    rec.detail("widths", widths.to_vec());
    Ok(())
}

/// `||T 1||^2_{W^{1,2}}` for the non-isometric intertwiner on `(1, 2)`.
pub fn closed_form_norm_sq_t1() -> f64 {
    4f64.cosh() - 2f64.cosh() + 0.5 * (2f64.tanh() / 1f64.tanh()).ln()
}

/// Measure of the image interval of `(1, 2)`.
pub fn closed_form_omega1_measure() -> f64 {
    (-2f64).exp().atanh() - (-4f64).exp().atanh()
}

/// Trial pairs for the intertwining check: smooth `u` on the source and
/// bumps `v` whose image vanishes near the target boundary.
pub fn intertwining_trials<R: Rng>(op: &OperatorSpec, count: usize, rng: &mut R) -> Result<Vec<(Field, Field)>> {
    let source = op.source();
    let (lo, hi) = source.bounding_box();
    let radius = (hi[0] - lo[0]) / 8.0;
    let mut trials = Vec::with_capacity(count);
    for _ in 0..count {
        let u = sampling::random_smooth(source, rng)?;
        let v = sampling::random_bump_where(source, radius, rng, |b| {
            op.apply(b).map(|t| t.vanishes_on_boundary_layer()).unwrap_or(false)
        })?;
        trials.push((u, v));
    }
    Ok(trials)
}

/// Width of the two-dimensional example grids inside the examples suite.
pub const EXAMPLE_2D_WIDTH: f64 = 0.02;

fn examples(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let h = cfg.h;
    let op = OperatorSpec::example_4_8(h)?;
    let one = Field::constant(op.source(), 1.0);
    let t1 = op.apply(&one)?;
    let norm_sq = t1.w1p_norm_pow(2.0)?;
    let omega1 = op.source().measure();
    rec.push(Check::at_most(
        "norm_sq_T1",
        "non-isometric-intertwiner",
        (norm_sq - 23.66).abs(),
        0.05,
    ));
    rec.push(Check::at_most(
        "omega1_measure",
        "non-isometric-intertwiner",
        (omega1 - 0.118).abs(),
        0.001,
    ));
    let trials = intertwining_trials(&op, 20, rng)?;
    let inter = intertwining_defect(&op, &trials, 2.0)?;
    rec.push(Check::at_most("intertwining_4_8", "intertwining", inter, 10.0 * h));
    rec.detail("norm_sq_T1", norm_sq);
    rec.detail("norm_sq_T1_closed_form", closed_form_norm_sq_t1());
    rec.detail("omega1_measure", omega1);
    rec.detail("omega1_measure_closed_form", closed_form_omega1_measure());

    let h2 = cfg.h.max(EXAMPLE_2D_WIDTH);
    let op = OperatorSpec::example_5_4(h2)?;
    let samples = (0..50)
        .map(|_| sampling::random_smooth(op.source(), rng))
        .collect::<Result<Vec<_>>>()?;
    let iso = isometry_defect(&op, &samples, cfg.p.max(1.5))?;
    rec.push(Check::at_most("isometry_5_4", "isometry", iso, 5.0 * h2));
    let maps_inside = |b: &Field| op.apply(b).map(|t| t.vanishes_on_boundary_layer()).unwrap_or(false);
    let pairs = (0..20)
        .map(|_| sampling::disjoint_bump_pair_where(op.source(), 0.15, rng, maps_inside))
        .collect::<Result<Vec<_>>>()?;
    let dj = disjointness_defect(&op, &pairs, 3.0)?;
    rec.push(Check::at_most("disjointness_5_4", "disjointness", dj.outside_band, 1e-12));
    rec.detail("width_2d", h2);

    let h1 = cfg.h.max(1e-4);
    let op = OperatorSpec::example_4_14(0.5, h1)?;
    let sets = crate::operators::defect_sets(&reconstruct(&op, 2.0)?, op.source())?;
    rec.push(Check::at_most(
        "n1_measure_fat_cantor",
        "defect-sets",
        (sets.n1_measure - 0.5).abs(),
        0.02,
    ));
    rec.detail("n1_measure_fat_cantor", sets.n1_measure);
    Ok(())
}

/// Random rotation, reflection or translation with a random sign.
pub fn random_rigid_motion<R: Rng>(rng: &mut R) -> Result<RigidMotion> {
    let theta = rng.gen_range(0.0..2.0 * PI);
    let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
    let (c, s) = (theta.cos(), theta.sin());
    let q = match rng.gen_range(0..3) {
        0 => [[c, -s], [s, c]],
        1 => [[c, s], [s, -c]],
        _ => [[1.0, 0.0], [0.0, 1.0]],
    };
    RigidMotion::from_parts(2, q, b, sign)
}

/// Rigid operator from the unit square into a box around its image.
pub fn rigid_operator(m: RigidMotion, h: f64) -> Result<OperatorSpec> {
    let target = unit_square(h)?;
    let c = m.apply([0.5, 0.5]);
    let r = 0.75;
    let source = Arc::new(GridDomain::make_box(&[c[0] - r, c[1] - r], &[c[0] + r, c[1] + r], h)?);
    OperatorSpec::rigid(&source, &target, vec![ComponentMotion { motion: m, component: 0 }])
}

/// Worst errors of the round trip over `count` seeded rigid operators:
/// `(xi error, weight defect, orthogonality defect, axis spread)`.
pub fn rigid_round_trips<R: Rng>(count: usize, p: f64, h: f64, rng: &mut R) -> Result<[f64; 4]> {
    let mut worst = [0.0f64; 4];
    for _ in 0..count {
        let m = random_rigid_motion(rng)?;
        let op = rigid_operator(m, h)?;
        let rec = reconstruct(&op, p)?;
        let fit = rigid_motion_fit(&rec)?;
        let xi_err = op
            .map()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let y = rec.xi_hat.value(i);
                (x[0] - y[0]).abs().max((x[1] - y[1]).abs())
            })
            .fold(0.0, f64::max);
        worst[0] = worst[0].max(xi_err);
        worst[1] = worst[1].max(fit.weight_defect);
        worst[2] = worst[2].max(fit.orthogonality_defect);
        worst[3] = worst[3].max(rec.axis_spread);
    }
    Ok(worst)
}

/// Largest deviations of the reconstruction from the closed forms of the
/// non-isometric intertwiner: `(g error, xi error)`.
pub fn example_4_8_reconstruction(h: f64) -> Result<(f64, f64, bool)> {
    let op = OperatorSpec::example_4_8(h)?;
    let rec = reconstruct(&op, 2.0)?;
    let mut g_err: f64 = 0.0;
    let mut xi_err: f64 = 0.0;
    for (i, y) in op.target().centers().enumerate() {
        g_err = g_err.max((rec.g_hat.value(i) - example_4_8_weight(y[0])).abs());
        xi_err = xi_err.max((rec.xi_hat.value(i)[0] - example_4_8_map(y[0])).abs());
    }
    let fit = rigid_motion_fit(&rec)?;
    let rigid = fit.orthogonality_defect <= 1e-8 && fit.grad_g_defect <= 1e-8;
    Ok((g_err, xi_err, rigid))
}

fn reconstruction(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let h = cfg.h;
    if let Some(spec) = &cfg.spec {
        let op = load_operator(spec, None, h)?;
        let r = reconstruct(&op, cfg.p)?;
        let fit = rigid_motion_fit(&r)?;
        let frac = r.zero_set_cells as f64 / op.target().len() as f64;
        rec.push(Check::at_most("zero_set_fraction", "probe-reconstruction", frac, 0.01));
        rec.detail("orthogonality_defect", fit.orthogonality_defect);
        rec.detail("grad_g_defect", fit.grad_g_defect);
        rec.detail("weight_defect", fit.weight_defect);
        rec.detail("motions", serde_json::to_value(fit.components)?);
        return Ok(());
    }
    let tol = cfg.tol.unwrap_or(1e-8);
    let [xi, weight, orth, spread] = rigid_round_trips(10, cfg.p, h, rng)?;
    rec.push(Check::at_most("rigid_xi_error", "probe-reconstruction", xi, 2.0 * h));
    rec.push(Check::at_most("rigid_weight_defect", "rigidity", weight, tol));
    rec.push(Check::at_most("rigid_orthogonality_defect", "rigidity", orth, tol));
    rec.push(Check::at_most("weight_axis_spread", "probe-reconstruction", spread, tol));
    let (g_err, xi_err, rigid) = example_4_8_reconstruction(1e-3)?;
    rec.push(Check::at_most("example_4_8_weight_error", "probe-reconstruction", g_err, 1e-6));
    rec.push(Check::at_most("example_4_8_map_error", "probe-reconstruction", xi_err, 1e-6));
    rec.push(Check::at_most(
        "example_4_8_reported_rigid",
        "rigidity",
        f64::from(u8::from(rigid)),
        0.0,
    ));
    Ok(())
}

fn congruence(cfg: &SuiteConfig, rec: &mut Recorder) -> Result<()> {
    let h = cfg.h;
    let op = match &cfg.spec {
        Some(spec) => load_operator(spec, None, h)?,
        None => OperatorSpec::example_5_4(h)?,
    };
    let tol = cfg.tol.unwrap_or(4.0 * op.target().h());
    let p = if cfg.p > 1.0 { cfg.p } else { 2.0 };
    let report = congruence_pipeline(&op, p, tol)?;
    rec.push(Check::at_most(
        "congruent",
        "congruence",
        f64::from(u8::from(!report.verdict)),
        0.0,
    ));
    rec.detail("components", report.pairing.len());
    rec.detail("pipeline", serde_json::to_value(&report)?);
    rec.detail("tol", tol);
    Ok(())
}

pub fn summary_line(report: &SuiteReport) -> String {
    let failed = report.checks.iter().filter(|c| !c.passed()).count();
    format!(
        "{}: {} checks, {} failed -> {}",
        report.suite,
        report.checks.len(),
        failed,
        if report.passed { "pass" } else { "fail" }
    )
}
