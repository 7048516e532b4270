use std::sync::Arc;

use super::Operator;
use crate::error::{LabError, Result};
use crate::field::{probe_rate, Field, VectorField};

/// Weight and map recovered from exponential probe images.
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub g_hat: Field,
    pub xi_hat: VectorField,
    /// Nodes where some `v_+ * v_-` is not positive. Their `g_hat` and
    /// `xi_hat` entries are zero placeholders.
    pub zero_set: Vec<bool>,
    pub zero_set_cells: usize,
    /// Largest disagreement between weights recovered along different axes.
    pub axis_spread: f64,
}

impl ReconstructionResult {
    pub fn domain(&self) -> &Arc<crate::grid_domain::GridDomain> {
        self.g_hat.domain()
    }

    pub fn usable(&self, i: usize) -> bool {
        !self.zero_set[i]
    }
}

/// Probes `T` with `exp(+-alpha x_j)`, `alpha = (p-1)^(-1/p)`, and inverts
///
/// ```text
/// g  = sgn(v_+) (v_+ v_-)^(1/2)
/// xi_j = log(v_+ / v_-) / (2 alpha)
/// ```
///
/// node by node, where `v_{+-} = T exp(+-alpha x_j)`.
pub fn reconstruct(op: &dyn Operator, p: f64) -> Result<ReconstructionResult> {
    let alpha = probe_rate(p)?;
    let target = Arc::clone(op.target());
    let dim = target.dim();
    let n = target.len();
    let mut zero_set = vec![false; n];
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut xi = vec![[0.0; 2]; n];
    for axis in 0..dim {
        let plus = op.apply_closed_form(&|x| (alpha * x[axis]).exp())?;
        let minus = op.apply_closed_form(&|x| (-alpha * x[axis]).exp())?;
        if plus.max_abs() == 0.0 || minus.max_abs() == 0.0 {
            return Err(LabError::ZeroProbeImage);
        }
        let mut g = vec![0.0; n];
        for i in 0..n {
            let (a, b) = (plus.value(i), minus.value(i));
            let prod = a * b;
            if !(prod > 0.0) || !prod.is_finite() {
                zero_set[i] = true;
                continue;
            }
            g[i] = a.signum() * prod.sqrt();
            xi[i][axis] = (a / b).ln() / (2.0 * alpha);
        }
        weights.push(g);
    }
    let zero_set_cells = zero_set.iter().filter(|&&z| z).count();
    if zero_set_cells == n {
        return Err(LabError::ZeroProbeImage);
    }
    let mut axis_spread: f64 = 0.0;
    let mut g_hat = weights[0].clone();
    let mut xi_hat = xi;
    for i in 0..n {
        if zero_set[i] {
            g_hat[i] = 0.0;
            xi_hat[i] = [0.0; 2];
            continue;
        }
        for w in &weights[1..] {
            axis_spread = axis_spread.max((w[i] - g_hat[i]).abs());
        }
    }
    Ok(ReconstructionResult {
        g_hat: Field::new(Arc::clone(&target), g_hat)?,
        xi_hat: VectorField::new(target, xi_hat)?,
        zero_set,
        zero_set_cells,
        axis_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_domain::{GridDomain, RigidMotion};
    use crate::operators::{example_4_8_map, example_4_8_weight, BlackBox, ComponentMotion, OperatorSpec};
    use std::f64::consts::PI;

    #[test]
    fn identity_round_trip() {
        let d = Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], 0.05).unwrap());
        let rec = reconstruct(&OperatorSpec::identity(&d).unwrap(), 3.0).unwrap();
        assert_eq!(rec.zero_set_cells, 0);
        for (i, y) in d.centers().enumerate() {
            assert!((rec.g_hat.value(i) - 1.0).abs() <= 1e-10);
            let x = rec.xi_hat.value(i);
            assert!((x[0] - y[0]).abs() <= 1e-10 && (x[1] - y[1]).abs() <= 1e-10);
        }
    }

    #[test]
    fn example_4_8_closed_forms() {
        let op = OperatorSpec::example_4_8(1e-3).unwrap();
        let rec = reconstruct(&op, 2.0).unwrap();
        for (i, y) in op.target().centers().enumerate() {
            assert!((rec.g_hat.value(i) - example_4_8_weight(y[0])).abs() <= 1e-6);
            assert!((rec.xi_hat.value(i)[0] - example_4_8_map(y[0])).abs() <= 1e-6);
        }
    }

    #[test]
    fn rotated_operator_with_negative_weight() {
        let h = 0.02;
        let target = Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h).unwrap());
        let m = RigidMotion::rotation(PI / 6.0, [0.3, 0.1], -1).unwrap();
        let source = Arc::new(GridDomain::make_box(&[-1.0, -1.0], &[2.0, 2.0], h).unwrap());
        let op = OperatorSpec::rigid(&source, &target, vec![ComponentMotion { motion: m, component: 0 }]).unwrap();
        let rec = reconstruct(&op, 3.0).unwrap();
        for (i, y) in target.centers().enumerate() {
            let want = m.apply(y);
            let got = rec.xi_hat.value(i);
            assert!((got[0] - want[0]).abs() <= 2.0 * h && (got[1] - want[1]).abs() <= 2.0 * h);
            assert!((rec.g_hat.value(i) + 1.0).abs() <= 1e-8);
        }
        assert!(rec.axis_spread <= 1e-8);
    }

    #[test]
    fn sampled_black_box_is_close() {
        // only Field -> Field access: probes go through interpolation
        let h = 0.01;
        let d = Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h).unwrap());
        let inner = OperatorSpec::identity(&d).unwrap().scaled(-1.0).unwrap();
        let bb = BlackBox::new(&d, &d, |u: &Field| inner.apply(u));
        let rec = reconstruct(&bb, 2.0).unwrap();
        for (i, y) in d.centers().enumerate() {
            let x = rec.xi_hat.value(i);
            assert!((x[0] - y[0]).abs() <= 2.0 * h && (x[1] - y[1]).abs() <= 2.0 * h);
            assert!((rec.g_hat.value(i) + 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn zero_operator_is_rejected() {
        let d = Arc::new(GridDomain::make_box(&[0.0], &[1.0], 0.1).unwrap());
        let zero = BlackBox::new(&d, &d, |u: &Field| Ok(u.scale(0.0)));
        assert!(matches!(reconstruct(&zero, 2.0), Err(LabError::ZeroProbeImage)));
        assert!(reconstruct(&zero, 1.0).is_err());
    }
}
