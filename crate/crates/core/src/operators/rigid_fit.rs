use std::sync::Arc;

use nalgebra::{Matrix2, SVD};
use serde::Serialize;

use super::ReconstructionResult;
use crate::error::{LabError, Result};
use crate::field::Field;
use crate::grid_domain::{GridDomain, Point, RigidMotion};

#[derive(Clone, Debug, Serialize)]
pub struct ComponentFit {
    pub component: usize,
    pub nodes: usize,
    /// Nearest orthogonal matrix to the least-squares linear part, with the
    /// translation refit for it and the sign of the mean weight.
    pub motion: RigidMotion,
    /// Unprojected least-squares linear part, row-major.
    pub linear_part: [[f64; 2]; 2],
    /// `max |xi_hat(y) - (Q y + b)|` over the component.
    pub fit_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidFitReport {
    pub components: Vec<ComponentFit>,
    /// `max |xi'^T xi' - I|` with finite-difference Jacobians.
    pub orthogonality_defect: f64,
    pub grad_g_defect: f64,
    /// `max ||g| - 1|`.
    pub weight_defect: f64,
    /// `|grad xi_1|` at every node (zero on the zero set).
    pub c_field: Vec<f64>,
}

impl RigidFitReport {
    pub fn max_fit_residual(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0, |m, c| m.max(c.fit_residual))
    }
}

fn polar_factor(dim: usize, a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    if dim == 1 {
        let s = if a[0][0] < 0.0 { -1.0 } else { 1.0 };
        return [[s, 0.0], [0.0, 1.0]];
    }
    let m = Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
    let svd = SVD::new(m, true, true);
    let q = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    [[q[(0, 0)], q[(0, 1)]], [q[(1, 0)], q[(1, 1)]]]
}

fn least_squares_linear(dim: usize, ys: &[Point], xs: &[Point]) -> [[f64; 2]; 2] {
    let n = ys.len() as f64;
    let mut my = [0.0; 2];
    let mut mx = [0.0; 2];
    for (y, x) in ys.iter().zip(xs) {
        for a in 0..dim {
            my[a] += y[a] / n;
            mx[a] += x[a] / n;
        }
    }
    let mut syy: Matrix2<f64> = Matrix2::zeros();
    let mut sxy: Matrix2<f64> = Matrix2::zeros();
    for (y, x) in ys.iter().zip(xs) {
        for r in 0..dim {
            for c in 0..dim {
                syy[(r, c)] += (y[r] - my[r]) * (y[c] - my[c]);
                sxy[(r, c)] += (x[r] - mx[r]) * (y[c] - my[c]);
            }
        }
    }
    if dim == 1 {
        let a = if syy[(0, 0)] > 0.0 { sxy[(0, 0)] / syy[(0, 0)] } else { 1.0 };
        return [[a, 0.0], [0.0, 1.0]];
    }
    let inv = syy
        .try_inverse()
        .or_else(|| syy.pseudo_inverse(1e-14).ok())
        .unwrap_or_else(Matrix2::identity);
    let a = sxy * inv;
    [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]]
}

/// Fits `xi_hat(y) ~ Q y + b` on every connected component of the target
/// and measures how far the reconstruction is from a rigid structure.
pub fn rigid_motion_fit(rec: &ReconstructionResult) -> Result<RigidFitReport> {
    let domain = rec.domain();
    let dim = domain.dim();
    let (labels, count) = domain.component_labels();
    let mut components = Vec::with_capacity(count);
    for k in 0..count {
        let idx: Vec<usize> = (0..domain.len())
            .filter(|&i| labels[i] == k && rec.usable(i))
            .collect();
        if idx.len() < dim + 1 {
            return Err(LabError::ComponentTooSmall {
                component: k,
                nodes: idx.len(),
                needed: dim + 1,
            });
        }
        let ys: Vec<Point> = idx.iter().map(|&i| domain.center(i)).collect();
        let xs: Vec<Point> = idx.iter().map(|&i| rec.xi_hat.value(i)).collect();
        let linear = least_squares_linear(dim, &ys, &xs);
        let q = polar_factor(dim, linear);
        let mean_g: f64 = idx.iter().map(|&i| rec.g_hat.value(i)).sum::<f64>() / idx.len() as f64;
        let sign = if mean_g < 0.0 { -1 } else { 1 };
        let rotation = RigidMotion::from_parts(dim, q, [0.0, 0.0], sign)?;
        let n = idx.len() as f64;
        let mut b = [0.0; 2];
        for (y, x) in ys.iter().zip(&xs) {
            let qy = rotation.apply(*y);
            for a in 0..dim {
                b[a] += (x[a] - qy[a]) / n;
            }
        }
        let motion = RigidMotion::from_parts(dim, q, b, sign)?;
        let fit_residual = ys
            .iter()
            .zip(&xs)
            .map(|(y, x)| crate::field::dist(dim, motion.apply(*y), *x))
            .fold(0.0, f64::max);
        components.push(ComponentFit {
            component: k,
            nodes: idx.len(),
            motion,
            linear_part: linear,
            fit_residual,
        });
    }

    let jac: Vec<_> = (0..dim).map(|a| rec.xi_hat.component(a).gradient()).collect();
    let grad_g = rec.g_hat.gradient();
    let mut orthogonality_defect: f64 = 0.0;
    let mut grad_g_defect: f64 = 0.0;
    let mut weight_defect: f64 = 0.0;
    let mut c_field = vec![0.0; domain.len()];
    for i in 0..domain.len() {
        if !rec.usable(i) {
            continue;
        }
        // row r of the Jacobian is grad xi_r
        for r in 0..dim {
            for c in 0..dim {
                let dot: f64 = (0..dim).map(|k| jac[k].value(i)[r] * jac[k].value(i)[c]).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                orthogonality_defect = orthogonality_defect.max((dot - target).abs());
            }
        }
        let gg = grad_g.value(i);
        grad_g_defect = grad_g_defect.max((gg[0] * gg[0] + gg[1] * gg[1]).sqrt());
        weight_defect = weight_defect.max((rec.g_hat.value(i).abs() - 1.0).abs());
        let j0 = jac[0].value(i);
        c_field[i] = (j0[0] * j0[0] + j0[1] * j0[1]).sqrt();
    }
    Ok(RigidFitReport {
        components,
        orthogonality_defect,
        grad_g_defect,
        weight_defect,
        c_field,
    })
}

/// Relative residuals of `g - Lap g = g c^2` and `g c^2 = c^N / g` with
/// `c = |grad xi_1|`, over interior usable nodes. Both vanish for
/// intertwining operators at `p = 2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaplaceIdentityDefects {
    pub laplace: f64,
    pub conformal: f64,
    pub nodes: usize,
}

pub fn laplace_weight_identities(rec: &ReconstructionResult) -> LaplaceIdentityDefects {
    let domain = rec.domain();
    let dim = domain.dim();
    let h2 = domain.h() * domain.h();
    let grad_xi = rec.xi_hat.component(0).gradient();
    let g = &rec.g_hat;
    let mut out = LaplaceIdentityDefects {
        laplace: 0.0,
        conformal: 0.0,
        nodes: 0,
    };
    'nodes: for i in 0..domain.len() {
        if !rec.usable(i) {
            continue;
        }
        let mut lap = 0.0;
        for axis in 0..dim {
            let (Some(b), Some(f)) = (domain.neighbor(i, axis, false), domain.neighbor(i, axis, true)) else {
                continue 'nodes;
            };
            if !rec.usable(b) || !rec.usable(f) {
                continue 'nodes;
            }
            lap += (g.value(f) + g.value(b) - 2.0 * g.value(i)) / h2;
        }
        let gi = g.value(i);
        let gx = grad_xi.value(i);
        let c = (gx[0] * gx[0] + gx[1] * gx[1]).sqrt();
        let rhs = gi * c * c;
        let scale = gi.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        out.laplace = out.laplace.max((gi - lap - rhs).abs() / scale);
        out.conformal = out.conformal.max((rhs - c.powi(dim as i32) / gi).abs() / scale);
        out.nodes += 1;
    }
    out
}

/// Solves `T w = phi` for `w` on `source` using the fitted motions:
/// `w(x) = phi(m_k^-1 x) / sign_k` on the image of component `k`, zero
/// elsewhere. Fails when some component is not rigid within `tol`.
pub fn preimage(fit: &RigidFitReport, phi: &Field, source: &Arc<GridDomain>, tol: f64) -> Result<Field> {
    if let Some(c) = fit.components.iter().find(|c| !(c.fit_residual <= tol)) {
        return Err(LabError::NotInvertible(format!(
            "component {} deviates from its rigid fit by {:.3e}",
            c.component, c.fit_residual
        )));
    }
    let target = phi.domain();
    let (labels, count) = target.component_labels();
    if count != fit.components.len() {
        return Err(LabError::NotInvertible(format!(
            "fit has {} components, target has {count}",
            fit.components.len()
        )));
    }
    Field::from_fn(source, |x| {
        for c in &fit.components {
            let y = c.motion.apply_inverse(x);
            if let Some(j) = target.locate(y) {
                if labels[j] == c.component {
                    return phi.interpolate(y).unwrap_or(0.0) * c.motion.sign() as f64;
                }
            }
        }
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{reconstruct, ComponentMotion, Operator, OperatorSpec};
    use std::f64::consts::PI;

    #[test]
    fn exact_rigid_input() {
        let h = 0.02;
        let target = Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h).unwrap());
        let source = Arc::new(GridDomain::make_box(&[-2.0, -2.0], &[2.0, 2.0], h).unwrap());
        let m = RigidMotion::rotation(0.7, [0.1, -0.2], -1).unwrap();
        let op = OperatorSpec::rigid(&source, &target, vec![ComponentMotion { motion: m, component: 0 }]).unwrap();
        let rec = reconstruct(&op, 3.0).unwrap();
        let fit = rigid_motion_fit(&rec).unwrap();
        assert!(fit.orthogonality_defect <= 1e-8);
        assert!(fit.grad_g_defect <= 1e-8);
        assert!(fit.weight_defect <= 1e-8);
        let got = fit.components[0].motion;
        assert_eq!(got.sign(), -1);
        assert!((got.angle() - 0.7).abs() < 1e-10);
        assert!(fit.c_field.iter().all(|c| (c - 1.0).abs() < 1e-8));
        let ids = laplace_weight_identities(&rec);
        assert!(ids.laplace < 1e-8 && ids.conformal < 1e-8);
    }

    #[test]
    fn reflections_are_orthogonal_too() {
        let h = 0.05;
        let target = Arc::new(GridDomain::make_box(&[0.0], &[1.0], h).unwrap());
        let m = RigidMotion::new(1, &[vec![-1.0]], &[1.0], 1).unwrap();
        let op = OperatorSpec::rigid(&target, &target, vec![ComponentMotion { motion: m, component: 0 }]).unwrap();
        let fit = rigid_motion_fit(&reconstruct(&op, 2.0).unwrap()).unwrap();
        assert_eq!(fit.components[0].motion.q()[0][0], -1.0);
        assert!(fit.max_fit_residual() < 1e-10);
    }

    #[test]
    fn example_4_8_is_not_rigid() {
        let op = OperatorSpec::example_4_8(1e-3).unwrap();
        let rec = reconstruct(&op, 2.0).unwrap();
        let fit = rigid_motion_fit(&rec).unwrap();
        // |xi'| = 1/sinh(2y) <= 1/sinh(2)
        let bound = 1.0 - (1.0 / 2f64.sinh()).powi(2);
        assert!(fit.orthogonality_defect >= bound - 1e-3, "{}", fit.orthogonality_defect);
        assert!(fit.grad_g_defect > 1.0);
        // g - g'' = g c^2 = c / g holds for this pair
        let ids = laplace_weight_identities(&rec);
        assert!(ids.laplace < 1e-4, "{ids:?}");
        assert!(ids.conformal < 1e-4, "{ids:?}");
    }

    #[test]
    fn example_5_4_translations() {
        let op = OperatorSpec::example_5_4(0.02).unwrap();
        let fit = rigid_motion_fit(&reconstruct(&op, 3.0).unwrap()).unwrap();
        assert_eq!(fit.components.len(), 2);
        // component 0 is the lower strip
        let b0 = fit.components[0].motion.b();
        let b1 = fit.components[1].motion.b();
        assert!((b0[1] - 1.0).abs() < 1e-10 && b0[0].abs() < 1e-10);
        assert!((b1[1] + 1.0).abs() < 1e-10 && b1[0].abs() < 1e-10);
        assert!(fit.components.iter().all(|c| c.motion.sign() == 1));
    }

    #[test]
    fn too_small_components() {
        let d = Arc::new(GridDomain::from_cells(2, 0.1, [0.0, 0.0], [[0, 0], [1, 0], [5, 5], [6, 5], [5, 6]]).unwrap());
        let rec = reconstruct(&OperatorSpec::identity(&d).unwrap(), 2.0).unwrap();
        assert!(matches!(
            rigid_motion_fit(&rec),
            Err(LabError::ComponentTooSmall { component: 0, nodes: 2, needed: 3 })
        ));
    }

    #[test]
    fn preimage_inverts_rigid_operators() {
        let h = 0.02;
        let op = OperatorSpec::example_5_4(h).unwrap();
        let fit = rigid_motion_fit(&reconstruct(&op, 2.0).unwrap()).unwrap();
        let phi = crate::field::bump(op.target(), [0.5, 1.5], 0.3).unwrap();
        let w = preimage(&fit, &phi, op.source(), 2.0 * h).unwrap();
        let tw = op.apply(&w).unwrap();
        for i in 0..phi.len() {
            assert!((tw.value(i) - phi.value(i)).abs() < 1e-10);
        }

        let bent = OperatorSpec::example_4_8(1e-2).unwrap();
        let fit = rigid_motion_fit(&reconstruct(&bent, 2.0).unwrap()).unwrap();
        let phi = Field::constant(bent.target(), 1.0);
        assert!(matches!(
            preimage(&fit, &phi, bent.source(), 0.04),
            Err(LabError::NotInvertible(_))
        ));
        let _ = PI;
    }
}
