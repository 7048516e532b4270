//! Nodal fields on a [`GridDomain`].
//!
//! Values live at cell centers. Integrals use the midpoint rule, gradients
//! use central differences where both face neighbors are active and
//! one-sided differences otherwise.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::grid_domain::{GridDomain, Point};

#[derive(Clone, Debug)]
pub struct Field {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct VectorField {
    domain: Arc<GridDomain>,
    values: Vec<Point>,
}

pub(crate) fn same_domain(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidExponent {
            p,
            expected: "[1, inf)",
        })
    }
}

#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// `|v|^p` for a vector given by its squared euclidean length.
#[inline]
pub(crate) fn sq_pow(sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        sq
    } else {
        sq.powf(0.5 * p)
    }
}

impl Field {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(LabError::DomainMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite(i));
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn<F>(domain: &Arc<GridDomain>, f: F) -> Result<Self>
    where
        F: Fn(Point) -> f64,
    {
        let values = domain.centers().map(f).collect();
        Self::new(Arc::clone(domain), values)
    }

    pub fn constant(domain: &Arc<GridDomain>, c: f64) -> Self {
        Self {
            domain: Arc::clone(domain),
            values: vec![c; domain.len()],
        }
    }

    pub fn zeros(domain: &Arc<GridDomain>) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_domain(&self, other: &Field) -> bool {
        same_domain(&self.domain, &other.domain)
    }

    pub(crate) fn ensure_same(&self, other: &Field) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(LabError::DomainMismatch)
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same(other)?;
        Ok(Field {
            domain: Arc::clone(&self.domain),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn min(&self, other: &Field) -> Result<Field> {
        self.zip(other, f64::min)
    }

    pub fn max(&self, other: &Field) -> Result<Field> {
        self.zip(other, f64::max)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a + b)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Field, s: f64) -> Result<Field> {
        self.zip(other, |a, b| a + s * b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a * b)
    }

    /// `|self| ^ |other|`, the lattice infimum of the absolute values.
    pub fn lattice_overlap(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a.abs().min(b.abs()))
    }

    /// True iff `|self| ^ |other| = 0` at every node.
    pub fn is_disjoint_from(&self, other: &Field) -> Result<bool> {
        self.ensure_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .all(|(&a, &b)| a == 0.0 || b == 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn gradient(&self) -> VectorField {
        let d = &*self.domain;
        let h = d.h();
        let values = (0..d.len())
            .map(|i| {
                let mut g = [0.0; 2];
                for (axis, slot) in g.iter_mut().enumerate().take(d.dim()) {
                    let back = d.neighbor(i, axis, false);
                    let fwd = d.neighbor(i, axis, true);
                    *slot = match (back, fwd) {
                        (Some(b), Some(f)) => (self.values[f] - self.values[b]) / (2.0 * h),
                        (None, Some(f)) => (self.values[f] - self.values[i]) / h,
                        (Some(b), None) => (self.values[i] - self.values[b]) / h,
                        (None, None) => 0.0,
                    };
                }
                g
            })
            .collect();
        VectorField {
            domain: Arc::clone(&self.domain),
            values,
        }
    }

    /// `sum |u|^p h^dim`.
    pub fn lp_norm_pow(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let s: f64 = self.values.iter().map(|&v| abs_pow(v, p)).sum();
        Ok(s * self.domain.cell_volume())
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.lp_norm_pow(p)?.powf(1.0 / p))
    }

    /// `||u||_p^p + || |grad u| ||_p^p`.
    pub fn w1p_norm_pow(&self, p: f64) -> Result<f64> {
        Ok(self.lp_norm_pow(p)? + self.gradient().lp_norm_pow(p)?)
    }

    pub fn w1p_norm(&self, p: f64) -> Result<f64> {
        Ok(self.w1p_norm_pow(p)?.powf(1.0 / p))
    }

    /// Zero on every cell that touches the complement of the domain.
    pub fn vanishes_on_boundary_layer(&self) -> bool {
        (0..self.len()).all(|i| self.values[i] == 0.0 || !self.domain.is_boundary_cell(i))
    }

    /// Multilinear interpolation of the nodal values at `x`.
    ///
    /// Returns `None` when `x` is not inside an active cell. Stencil nodes
    /// that are inactive are dropped and the remaining weights renormalized.
    pub fn interpolate(&self, x: Point) -> Option<f64> {
        let d = &*self.domain;
        let home = d.locate(x)?;
        let origin = d.origin();
        let h = d.h();
        let mut base = [0i64; 2];
        let mut frac = [0.0; 2];
        for a in 0..d.dim() {
            let s = (x[a] - origin[a]) / h - 0.5;
            let k = s.floor();
            base[a] = k as i64;
            frac[a] = s - k;
        }
        let corners: &[[i64; 2]] = if d.dim() == 1 {
            &[[0, 0], [1, 0]]
        } else {
            &[[0, 0], [1, 0], [0, 1], [1, 1]]
        };
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for c in corners {
            let mut w = 1.0;
            for a in 0..d.dim() {
                w *= if c[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            if let Some(j) = d.index_of([base[0] + c[0], base[1] + c[1]]) {
                acc += w * self.values[j];
                wsum += w;
            }
        }
        if wsum > 0.0 {
            Some(acc / wsum)
        } else {
            Some(self.values[home])
        }
    }
}

impl VectorField {
    pub fn new(domain: Arc<GridDomain>, values: Vec<Point>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(LabError::DomainMismatch);
        }
        let dim = domain.dim();
        if let Some(i) = values.iter().position(|v| v[..dim].iter().any(|c| !c.is_finite())) {
            return Err(LabError::NonFinite(i));
        }
        let values = if dim == 1 {
            values.into_iter().map(|v| [v[0], 0.0]).collect()
        } else {
            values
        };
        Ok(Self { domain, values })
    }

    pub fn from_fn<F>(domain: &Arc<GridDomain>, f: F) -> Result<Self>
    where
        F: Fn(Point) -> Point,
    {
        let values = domain.centers().map(f).collect();
        Self::new(Arc::clone(domain), values)
    }

    /// Stacks `dim` scalar fields on a common domain.
    pub fn from_components(components: &[Field]) -> Result<Self> {
        let first = components.first().ok_or(LabError::EmptyInput("no components"))?;
        let dim = first.domain.dim();
        if components.len() != dim {
            return Err(LabError::DimMismatch(dim, components.len()));
        }
        for c in components {
            first.ensure_same(c)?;
        }
        let values = (0..first.len())
            .map(|i| {
                let mut v = [0.0; 2];
                for (a, c) in components.iter().enumerate() {
                    v[a] = c.values[i];
                }
                v
            })
            .collect();
        Ok(Self {
            domain: Arc::clone(&first.domain),
            values,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn value(&self, i: usize) -> Point {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_domain(&self, other: &VectorField) -> bool {
        same_domain(&self.domain, &other.domain)
    }

    pub fn component(&self, axis: usize) -> Field {
        Field {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|v| v[axis]).collect(),
        }
    }

    #[inline]
    pub(crate) fn norm_sq_at(&self, i: usize) -> f64 {
        let v = self.values[i];
        v[0] * v[0] + v[1] * v[1]
    }

    /// Pointwise euclidean norm.
    pub fn norm(&self) -> Field {
        Field {
            domain: Arc::clone(&self.domain),
            values: (0..self.len()).map(|i| self.norm_sq_at(i).sqrt()).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &VectorField, s: f64) -> Result<VectorField> {
        if !self.same_domain(other) {
            return Err(LabError::DomainMismatch);
        }
        Ok(VectorField {
            domain: Arc::clone(&self.domain),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| [a[0] + s * b[0], a[1] + s * b[1]])
                .collect(),
        })
    }

    /// `sum |f|^p h^dim` with the euclidean norm at each node.
    pub fn lp_norm_pow(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let s: f64 = (0..self.len()).map(|i| sq_pow(self.norm_sq_at(i), p)).sum();
        Ok(s * self.domain.cell_volume())
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.lp_norm_pow(p)?.powf(1.0 / p))
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.len()).fold(0.0, |m, i| m.max(self.norm_sq_at(i).sqrt()))
    }
}

/// Decay rate of the exponential probes, `(p - 1)^(-1/p)`.
pub fn probe_rate(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(LabError::InvalidExponent {
            p,
            expected: "(1, inf)",
        });
    }
    Ok((p - 1.0).powf(-1.0 / p))
}

/// Nodal samples of `exp(sign * alpha * x_axis)`, a classical solution of
/// `Delta_p w = |w|^(p-2) w`.
pub fn exponential_probe(domain: &Arc<GridDomain>, axis: usize, sign: i32, p: f64) -> Result<Field> {
    let alpha = probe_rate(p)?;
    if axis >= domain.dim() {
        return Err(LabError::DimMismatch(domain.dim(), axis + 1));
    }
    let s = if sign < 0 { -1.0 } else { 1.0 };
    Field::from_fn(domain, |x| (s * alpha * x[axis]).exp())
}

/// `(1 - (r/R)^2)^2` inside the ball, zero outside.
pub fn bump_profile(r: f64, radius: f64) -> f64 {
    if r >= radius {
        0.0
    } else {
        let t = 1.0 - (r / radius).powi(2);
        t * t
    }
}

/// Compactly supported bump of height one at `center`.
///
/// Every cell within `radius + h` of the center must be active, so the
/// bump and its face neighbors stay inside the domain.
pub fn bump(domain: &Arc<GridDomain>, center: Point, radius: f64) -> Result<Field> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(LabError::InvalidExtent(format!("bump radius {radius}")));
    }
    let d = &**domain;
    let dim = d.dim();
    let h = d.h();
    let reach = radius + h;
    let lo = d.lattice_index([center[0] - reach, center[1] - reach]);
    let hi = d.lattice_index([center[0] + reach, center[1] + reach]);
    let (jlo, jhi) = if dim == 1 { (0, 0) } else { (lo[1], hi[1]) };
    for i in lo[0]..=hi[0] {
        for j in jlo..=jhi {
            let k = [i, j];
            let mut x = [0.0; 2];
            for a in 0..dim {
                x[a] = d.origin()[a] + h * (k[a] as f64 + 0.5);
            }
            let r = dist(dim, x, center);
            if r < reach && d.index_of(k).is_none() {
                return Err(LabError::SupportOutsideDomain(k));
            }
        }
    }
    Field::from_fn(domain, |x| bump_profile(dist(dim, x, center), radius))
}

pub(crate) fn dist(dim: usize, a: Point, b: Point) -> f64 {
    (0..dim).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(h: f64) -> Arc<GridDomain> {
        Arc::new(GridDomain::make_box(&[0.0], &[1.0], h).unwrap())
    }

    fn square(h: f64) -> Arc<GridDomain> {
        Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], h).unwrap())
    }

    #[test]
    fn gradients() {
        let d = unit(1e-3);
        let c = Field::constant(&d, 3.0);
        assert_eq!(c.gradient().max_norm(), 0.0);

        let lin = Field::from_fn(&d, |x| x[0]).unwrap();
        let g = lin.gradient();
        for i in 0..d.len() {
            assert!((g.value(i)[0] - 1.0).abs() < 1e-9);
        }

        let e = Field::from_fn(&d, |x| x[0].exp()).unwrap();
        let g = e.gradient();
        let worst = (1..d.len() - 1)
            .map(|i| (g.value(i)[0] - d.center(i)[0].exp()).abs())
            .fold(0.0, f64::max);
        // h^2 max|u'''| / 6 = 1e-6 * e / 6
        assert!(worst <= 1e-5, "{worst}");

        let single = Arc::new(GridDomain::from_cells(2, 0.1, [0.0, 0.0], [[0, 0]]).unwrap());
        let f = Field::constant(&single, 2.0);
        assert_eq!(f.gradient().value(0), [0.0, 0.0]);
    }

    #[test]
    fn lp_norms() {
        let d = unit(1e-3);
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert!((Field::constant(&d, 1.0).lp_norm(p).unwrap() - 1.0).abs() < 1e-12);
        }
        let lin = Field::from_fn(&d, |x| x[0]).unwrap();
        assert!((lin.lp_norm(2.0).unwrap() - (1.0f64 / 3.0).sqrt()).abs() <= 1e-4);
        assert_eq!(Field::zeros(&d).lp_norm(3.0).unwrap(), 0.0);
        assert!(matches!(lin.lp_norm(0.5), Err(LabError::InvalidExponent { .. })));
    }

    #[test]
    fn w1p_norms() {
        let d = unit(1e-3);
        assert!((Field::constant(&d, 1.0).w1p_norm(2.0).unwrap() - 1.0).abs() < 1e-12);
        let lin = Field::from_fn(&d, |x| x[0]).unwrap();
        assert!((lin.w1p_norm(2.0).unwrap() - (4.0f64 / 3.0).sqrt()).abs() <= 1e-3);
        assert!(lin.w1p_norm(0.9).is_err());
    }

    #[test]
    fn probes() {
        let d = unit(1e-2);
        assert_eq!(probe_rate(2.0).unwrap(), 1.0);
        let alpha = 2f64.powf(-1.0 / 3.0);
        assert!((probe_rate(3.0).unwrap() - alpha).abs() < 1e-15);
        assert!((alpha - 0.7937).abs() < 1e-4);
        let plus = exponential_probe(&d, 0, 1, 3.0).unwrap();
        for i in 0..d.len() {
            assert!((plus.value(i) - (alpha * d.center(i)[0]).exp()).abs() < 1e-14);
        }
        let minus = exponential_probe(&d, 0, -1, 3.0).unwrap();
        let prod = plus.mul(&minus).unwrap();
        assert!(prod.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(exponential_probe(&d, 0, 1, 1.0).is_err());
        assert!(exponential_probe(&d, 1, 1, 2.0).is_err());
    }

    #[test]
    fn bumps() {
        let d = square(1e-2);
        let b = bump(&d, [0.505, 0.505], 0.25).unwrap();
        let at_center = d.index_of([50, 50]).unwrap();
        assert!((b.value(at_center) - 1.0).abs() < 1e-12);
        let far = d.index_of([5, 5]).unwrap();
        assert_eq!(b.value(far), 0.0);
        assert!(b.vanishes_on_boundary_layer());
        assert!(matches!(
            bump(&d, [0.1, 0.5], 0.25),
            Err(LabError::SupportOutsideDomain(_))
        ));
    }

    #[test]
    fn bump_norm_is_grid_stable() {
        let coarse = bump(&square(1e-2), [0.5, 0.5], 0.25).unwrap().w1p_norm(3.0).unwrap();
        let fine = bump(&square(5e-3), [0.5, 0.5], 0.25).unwrap().w1p_norm(3.0).unwrap();
        assert!(coarse > 0.0 && fine > 0.0);
        assert!(((coarse - fine) / fine).abs() < 0.01, "{coarse} vs {fine}");
    }

    #[test]
    fn lattice_ops() {
        let d = unit(0.1);
        let u = Field::from_fn(&d, |x| if x[0] < 0.5 { x[0] - 0.7 } else { 0.0 }).unwrap();
        let v = Field::from_fn(&d, |x| if x[0] > 0.5 { x[0] } else { 0.0 }).unwrap();
        assert!(u.is_disjoint_from(&v).unwrap());
        assert_eq!(u.lattice_overlap(&v).unwrap().max_abs(), 0.0);
        let w = Field::constant(&d, 0.1);
        assert!(!u.is_disjoint_from(&w).unwrap());
        assert!(u.abs().values().iter().all(|&x| x >= 0.0));
        let other = unit(0.05);
        assert!(matches!(u.min(&Field::zeros(&other)), Err(LabError::DomainMismatch)));
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let d = square(0.05);
        let f = Field::from_fn(&d, |x| 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]).unwrap();
        for &x in &[[0.31, 0.47], [0.5, 0.5], [0.125, 0.875]] {
            let want = 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
            assert!((f.interpolate(x).unwrap() - want).abs() < 1e-12);
        }
        assert!(f.interpolate([1.5, 0.5]).is_none());
        assert!(f.interpolate([0.01, 0.99]).is_some());
    }

    #[test]
    fn rejects_non_finite() {
        let d = unit(0.25);
        assert!(matches!(
            Field::new(Arc::clone(&d), vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(LabError::NonFinite(1))
        ));
        assert!(Field::new(d, vec![0.0]).is_err());
    }
}
