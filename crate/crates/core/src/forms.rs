//! First and second derivative forms of `u -> ||u||^p_{W^{1,p}}`.
//!
//! ```text
//! a_p(u, v)    = int |u|^(p-2) u v + int |grad u|^(p-2) grad u . grad v
//! b_p(u, v, w) = (p-1) int |u|^(p-2) v w
//!              + (p-2) int |grad u|^(p-4) (grad u . grad v)(grad u . grad w)
//!              + int |grad u|^(p-2) grad v . grad w
//! ```
//!
//! Products with a vanishing factor are zero even where the power weight is
//! singular. All integrals share the quadrature and gradients of
//! [`Field`], so `a_p(u, u)` equals `||u||^p` as computed.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{abs_pow, sq_pow, Field, VectorField};

pub const DEFAULT_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn check_open_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidExponent {
            p,
            expected: "(1, inf)",
        })
    }
}

fn check_second_order_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 2.0 {
        Ok(())
    } else {
        Err(LabError::InvalidExponent {
            p,
            expected: "(2, inf)",
        })
    }
}

/// `sign(x) |x|^(p-1)`, continuous at zero for every `p > 1`.
#[inline]
fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 2.0 {
        x
    } else {
        x.signum() * x.abs().powf(p - 1.0)
    }
}

/// `|v|^e` for a vector with squared length `sq`, zero when `v = 0`.
#[inline]
fn weight(sq: f64, e: f64) -> f64 {
    if sq == 0.0 {
        0.0
    } else if e == 0.0 {
        1.0
    } else {
        sq.powf(0.5 * e)
    }
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `a_p(u, v)` from precomputed gradients.
pub fn form_a_with(u: &Field, grad_u: &VectorField, v: &Field, grad_v: &VectorField, p: f64) -> f64 {
    let mut zeroth = 0.0;
    let mut first = 0.0;
    for i in 0..u.len() {
        zeroth += signed_pow(u.value(i), p) * v.value(i);
        let gu = grad_u.value(i);
        let sq = dot(gu, gu);
        let gv = grad_v.value(i);
        let d = dot(gu, gv);
        if d != 0.0 {
            first += weight(sq, p - 2.0) * d;
        }
    }
    (zeroth + first) * u.domain().cell_volume()
}

pub fn form_a(u: &Field, v: &Field, p: f64) -> Result<f64> {
    check_open_exponent(p)?;
    u.ensure_same(v)?;
    Ok(form_a_with(u, &u.gradient(), v, &v.gradient(), p))
}

pub fn form_b(u: &Field, v: &Field, w: &Field, p: f64) -> Result<f64> {
    check_second_order_exponent(p)?;
    u.ensure_same(v)?;
    u.ensure_same(w)?;
    let (gu, gv, gw) = (u.gradient(), v.gradient(), w.gradient());
    let mut zeroth = 0.0;
    let mut mixed = 0.0;
    let mut first = 0.0;
    for i in 0..u.len() {
        zeroth += abs_pow(u.value(i), p - 2.0) * v.value(i) * w.value(i);
        let a = gu.value(i);
        let sq = dot(a, a);
        if sq == 0.0 {
            continue;
        }
        let (b, c) = (gv.value(i), gw.value(i));
        mixed += weight(sq, p - 4.0) * dot(a, b) * dot(a, c);
        first += weight(sq, p - 2.0) * dot(b, c);
    }
    Ok(((p - 1.0) * zeroth + (p - 2.0) * mixed + first) * u.domain().cell_volume())
}

/// Difference-quotient errors against a predicted derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateauxReport {
    #[serde(rename = "s")]
    pub s_values: Vec<f64>,
    #[serde(rename = "error")]
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log s`; `None` when
    /// fewer than two errors are positive.
    pub slope: Option<f64>,
    /// The predicted derivative the quotients were compared with.
    #[serde(skip)]
    pub predicted: f64,
}

impl GateauxReport {
    fn build(s_values: &[f64], errors: Vec<f64>, predicted: f64) -> Self {
        Self {
            s_values: s_values.to_vec(),
            slope: fit_loglog_slope(s_values, &errors),
            errors,
            predicted,
        }
    }

    /// Error at the smallest step.
    pub fn last_error(&self) -> f64 {
        *self.errors.last().expect("reports hold at least one step")
    }
}

fn check_steps(s_values: &[f64]) -> Result<()> {
    if s_values.is_empty() {
        return Err(LabError::EmptyInput("step ladder"));
    }
    if s_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) || s_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidExtent(
            "steps must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Least-squares slope through the points with positive error.
pub fn fit_loglog_slope(s_values: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = s_values
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0 && e.is_finite())
        .map(|(s, e)| (s.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `|(||u + s v||^p - ||u||^p) / s - p a_p(u, v)|` for each step `s`.
pub fn gateaux_check_norm(u: &Field, v: &Field, p: f64, s_values: &[f64]) -> Result<GateauxReport> {
    check_open_exponent(p)?;
    check_steps(s_values)?;
    u.ensure_same(v)?;
    let predicted = p * form_a(u, v, p)?;
    let base = u.w1p_norm_pow(p)?;
    let errors = s_values
        .iter()
        .map(|&s| {
            let moved = u.add_scaled(v, s)?.w1p_norm_pow(p)?;
            Ok(((moved - base) / s - predicted).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateauxReport::build(s_values, errors, predicted))
}

/// `|(a_p(u + s v, w) - a_p(u, w)) / s - b_p(u, v, w)|` for each step `s`.
pub fn gateaux_check_form(u: &Field, v: &Field, w: &Field, p: f64, s_values: &[f64]) -> Result<GateauxReport> {
    check_second_order_exponent(p)?;
    check_steps(s_values)?;
    let predicted = form_b(u, v, w, p)?;
    let grad_w = w.gradient();
    let base = form_a_with(u, &u.gradient(), w, &grad_w, p);
    let errors = s_values
        .iter()
        .map(|&s| {
            let moved = u.add_scaled(v, s)?;
            let a = form_a_with(&moved, &moved.gradient(), w, &grad_w, p);
            Ok(((a - base) / s - predicted).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateauxReport::build(s_values, errors, predicted))
}

/// Weak residual of `Delta_p w = |w|^(p-2) w`: the largest
/// `|a_p(u, phi)| / ||phi||_{W^{1,p}}` over the test functions.
///
/// Test functions must vanish on the boundary layer of the domain.
pub fn plap_residual(u: &Field, p: f64, tests: &[Field]) -> Result<f64> {
    check_open_exponent(p)?;
    if tests.is_empty() {
        return Err(LabError::EmptyInput("test functions"));
    }
    let grad_u = u.gradient();
    let mut worst: f64 = 0.0;
    for (k, phi) in tests.iter().enumerate() {
        u.ensure_same(phi)?;
        if !phi.vanishes_on_boundary_layer() {
            return Err(LabError::NotCompactlySupported(format!(
                "test function {k} is nonzero on the boundary layer"
            )));
        }
        let grad_phi = phi.gradient();
        let norm = (phi.lp_norm_pow(p)? + grad_phi.lp_norm_pow(p)?).powf(1.0 / p);
        if norm == 0.0 {
            return Err(LabError::EmptyInput("test function is identically zero"));
        }
        let a = form_a_with(u, &grad_u, phi, &grad_phi, p);
        worst = worst.max(a.abs() / norm);
    }
    Ok(worst)
}

/// `||f+g||_p^p + ||f-g||_p^p - 2||f||_p^p - 2||g||_p^p`.
///
/// Nonnegative for `p >= 2` and nonpositive for `p <= 2`.
pub fn clarkson_check(f: &VectorField, g: &VectorField, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(LabError::InvalidExponent {
            p,
            expected: "[1, inf)",
        });
    }
    if !f.same_domain(g) {
        return Err(LabError::DomainMismatch);
    }
    let mut slack = 0.0;
    for i in 0..f.len() {
        let (a, b) = (f.value(i), g.value(i));
        let plus = [a[0] + b[0], a[1] + b[1]];
        let minus = [a[0] - b[0], a[1] - b[1]];
        slack += sq_pow(dot(plus, plus), p) + sq_pow(dot(minus, minus), p)
            - 2.0 * sq_pow(dot(a, a), p)
            - 2.0 * sq_pow(dot(b, b), p);
    }
    Ok(slack * f.domain().cell_volume())
}
