//! Weighted composition operators `T u = g * (u o xi)` between grid domains.
//!
//! An [`OperatorSpec`] maps fields on the source domain to fields on the
//! target domain. Its weight `g` and map `xi` are tabulated at the target
//! nodes when the operator is built, whichever variant describes them.
//! Sampled inputs are read off with multilinear interpolation; closed-form
//! inputs (see [`Operator::apply_closed_form`]) are evaluated exactly at
//! `xi(y)`.

mod defect_sets;
mod defects;
mod pipeline;
mod reconstruct;
mod rigid_fit;

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::field::{Field, VectorField};
use crate::grid_domain::{GridDomain, Point, RigidMotion};

pub use defect_sets::{defect_sets, DefectSets};
pub use defects::{
    disjointness_defect, intertwining_defect, isometry_defect, DefectReport, DisjointnessDefect,
};
pub use pipeline::{congruence_pipeline, ComponentPairing, PipelineReport};
pub use reconstruct::{reconstruct, ReconstructionResult};
pub use rigid_fit::{
    laplace_weight_identities, preimage, rigid_motion_fit, ComponentFit, LaplaceIdentityDefects,
    RigidFitReport,
};

/// Anything that maps fields on a source domain to fields on a target domain.
pub trait Operator {
    fn source(&self) -> &Arc<GridDomain>;

    fn target(&self) -> &Arc<GridDomain>;

    fn apply(&self, u: &Field) -> Result<Field>;

    /// Applies the operator to a function known in closed form. The default
    /// samples `f` on the source nodes and calls [`Operator::apply`].
    fn apply_closed_form(&self, f: &dyn Fn(Point) -> f64) -> Result<Field> {
        let u = Field::from_fn(self.source(), f)?;
        self.apply(&u)
    }

    /// Tabulated `xi` at the target nodes, for composition operators.
    fn composition_map(&self) -> Option<&[Point]> {
        None
    }
}

/// Closed-form operators with fixed names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Identity,
    /// `g(y) = sinh(2y)^(1/2)`, `xi(y) = -artanh(exp(-2y))` on `(1, 2)`.
    Example48,
    /// `xi(x, y) = (x, y - sgn y)` from two strips onto `(0,1) x (-1,1)`.
    Example54,
    /// Inclusion of a fat Cantor complement into `(0, 1)`.
    Example414,
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Identity => "identity",
            Builtin::Example48 => "example_4_8",
            Builtin::Example54 => "example_5_4",
            Builtin::Example414 => "example_4_14",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Builtin::Identity),
            "example_4_8" => Some(Builtin::Example48),
            "example_5_4" => Some(Builtin::Example54),
            "example_4_14" => Some(Builtin::Example414),
            _ => None,
        }
    }
}

/// Rigid motion applied on one connected component of the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentMotion {
    pub motion: RigidMotion,
    pub component: usize,
}

#[derive(Clone, Debug)]
pub enum Variant {
    Builtin(Builtin),
    Rigid(Vec<ComponentMotion>),
    Tabulated,
}

#[derive(Clone, Debug)]
pub struct OperatorSpec {
    variant: Variant,
    source: Arc<GridDomain>,
    target: Arc<GridDomain>,
    weight: Vec<f64>,
    map: Vec<Point>,
}

pub fn example_4_8_weight(y: f64) -> f64 {
    (2.0 * y).sinh().sqrt()
}

pub fn example_4_8_map(y: f64) -> f64 {
    -(-2.0 * y).exp().atanh()
}

impl OperatorSpec {
    fn build(
        variant: Variant,
        source: Arc<GridDomain>,
        target: Arc<GridDomain>,
        weight: Vec<f64>,
        map: Vec<Point>,
    ) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(LabError::DimMismatch(source.dim(), target.dim()));
        }
        let dim = source.dim();
        if let Some(i) = weight.iter().position(|g| !g.is_finite()) {
            return Err(LabError::NonFinite(i));
        }
        let (lo, hi) = source.bounding_box();
        let slack = 1e-9 * source.h();
        for (i, x) in map.iter().enumerate() {
            if x[..dim].iter().any(|c| !c.is_finite()) {
                return Err(LabError::NonFinite(i));
            }
            if (0..dim).any(|a| x[a] < lo[a] - slack || x[a] > hi[a] + slack) {
                return Err(LabError::InvalidExtent(format!(
                    "xi at target node {i} = {:?} leaves the bounding box of the source",
                    &x[..dim]
                )));
            }
        }
        Ok(Self {
            variant,
            source,
            target,
            weight,
            map,
        })
    }

    pub fn identity(domain: &Arc<GridDomain>) -> Result<Self> {
        Self::build(
            Variant::Builtin(Builtin::Identity),
            Arc::clone(domain),
            Arc::clone(domain),
            vec![1.0; domain.len()],
            domain.centers().collect(),
        )
    }

    /// Target `(1, 2)` with width `h`; source is the image interval
    /// `xi((1, 2))` with the cell width shrunk so that it tiles exactly.
    pub fn example_4_8(h: f64) -> Result<Self> {
        let target = Arc::new(GridDomain::make_box(&[1.0], &[2.0], h)?);
        let lo = example_4_8_map(1.0);
        let hi = example_4_8_map(2.0);
        let cells = ((hi - lo) / h).ceil().max(1.0);
        let source = Arc::new(GridDomain::make_box(&[lo], &[hi], (hi - lo) / cells)?);
        let weight = target.centers().map(|y| example_4_8_weight(y[0])).collect();
        let map = target.centers().map(|y| [example_4_8_map(y[0]), 0.0]).collect();
        Self::build(Variant::Builtin(Builtin::Example48), source, target, weight, map)
    }

    pub fn example_5_4(h: f64) -> Result<Self> {
        let source = Arc::new(GridDomain::example_5_4_omega1(h)?);
        let target = Arc::new(GridDomain::example_5_4_omega2(h)?);
        let weight = vec![1.0; target.len()];
        let map = target
            .centers()
            .map(|y| [y[0], y[1] - y[1].signum()])
            .collect();
        Self::build(Variant::Builtin(Builtin::Example54), source, target, weight, map)
    }

    /// `xi = id` from a fat Cantor complement of removed length `removed`
    /// into `(0, 1)`, both on width `h`.
    pub fn example_4_14(removed: f64, h: f64) -> Result<Self> {
        let source = Arc::new(GridDomain::make_box(&[0.0], &[1.0], h)?);
        let (target, _) = GridDomain::fat_cantor(removed, h)?;
        let target = Arc::new(target);
        let weight = vec![1.0; target.len()];
        let map = target.centers().collect();
        Self::build(Variant::Builtin(Builtin::Example414), source, target, weight, map)
    }

    pub fn builtin(which: Builtin, h: f64, domain: Option<&Arc<GridDomain>>) -> Result<Self> {
        match which {
            Builtin::Identity => {
                let d = domain.ok_or_else(|| LabError::Parse("identity operator needs a domain".into()))?;
                Self::identity(d)
            }
            Builtin::Example48 => Self::example_4_8(h),
            Builtin::Example54 => Self::example_5_4(h),
            Builtin::Example414 => Self::example_4_14(0.5, h),
        }
    }

    /// One rigid motion per connected component of `target`, listed by
    /// component index.
    pub fn rigid(
        source: &Arc<GridDomain>,
        target: &Arc<GridDomain>,
        motions: Vec<ComponentMotion>,
    ) -> Result<Self> {
        let (labels, count) = target.component_labels();
        let mut per_component: Vec<Option<RigidMotion>> = vec![None; count];
        for cm in &motions {
            if cm.motion.dim() != target.dim() {
                return Err(LabError::DimMismatch(target.dim(), cm.motion.dim()));
            }
            let slot = per_component.get_mut(cm.component).ok_or_else(|| {
                LabError::Parse(format!(
                    "motion for component {} but target has {count}",
                    cm.component
                ))
            })?;
            *slot = Some(cm.motion);
        }
        if let Some(k) = per_component.iter().position(Option::is_none) {
            return Err(LabError::Parse(format!("no motion for component {k}")));
        }
        let per_component: Vec<RigidMotion> = per_component.into_iter().flatten().collect();
        let weight = labels
            .iter()
            .map(|&l| per_component[l].sign() as f64)
            .collect();
        let map = (0..target.len())
            .map(|i| per_component[labels[i]].apply(target.center(i)))
            .collect();
        Self::build(
            Variant::Rigid(motions),
            Arc::clone(source),
            Arc::clone(target),
            weight,
            map,
        )
    }

    pub fn tabulated(source: &Arc<GridDomain>, g: &Field, xi: &VectorField) -> Result<Self> {
        if !crate::field::same_domain(g.domain(), xi.domain()) {
            return Err(LabError::DomainMismatch);
        }
        Self::build(
            Variant::Tabulated,
            Arc::clone(source),
            Arc::clone(g.domain()),
            g.values().to_vec(),
            xi.values().to_vec(),
        )
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn map(&self) -> &[Point] {
        &self.map
    }

    pub fn weight_field(&self) -> Field {
        Field::new(Arc::clone(&self.target), self.weight.clone()).expect("weights are finite")
    }

    pub fn map_field(&self) -> VectorField {
        VectorField::new(Arc::clone(&self.target), self.map.clone()).expect("map is finite")
    }

    /// Same `xi` with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let weight = self.weight.iter().map(|g| c * g).collect();
        Self::build(
            Variant::Tabulated,
            Arc::clone(&self.source),
            Arc::clone(&self.target),
            weight,
            self.map.clone(),
        )
    }

    /// Applies the operator and lists target nodes whose `xi(y)` misses the
    /// source; those nodes get the value zero.
    pub fn apply_flagged(&self, u: &Field) -> Result<(Field, Vec<usize>)> {
        if !crate::field::same_domain(u.domain(), &self.source) {
            return Err(LabError::DomainMismatch);
        }
        let mut flagged = Vec::new();
        let values = self
            .map
            .iter()
            .zip(&self.weight)
            .enumerate()
            .map(|(i, (x, g))| match u.interpolate(*x) {
                Some(v) => g * v,
                None => {
                    flagged.push(i);
                    0.0
                }
            })
            .collect();
        Ok((Field::new(Arc::clone(&self.target), values)?, flagged))
    }
}

impl Operator for OperatorSpec {
    fn source(&self) -> &Arc<GridDomain> {
        &self.source
    }

    fn target(&self) -> &Arc<GridDomain> {
        &self.target
    }

    fn apply(&self, u: &Field) -> Result<Field> {
        self.apply_flagged(u).map(|(f, _)| f)
    }

    fn apply_closed_form(&self, f: &dyn Fn(Point) -> f64) -> Result<Field> {
        let values = self
            .map
            .iter()
            .zip(&self.weight)
            .map(|(x, g)| {
                if self.source.contains_point(*x) {
                    g * f(*x)
                } else {
                    0.0
                }
            })
            .collect();
        Field::new(Arc::clone(&self.target), values)
    }

    fn composition_map(&self) -> Option<&[Point]> {
        Some(&self.map)
    }
}

/// Wraps any `Field -> Field` function as an [`Operator`].
pub struct BlackBox<F> {
    source: Arc<GridDomain>,
    target: Arc<GridDomain>,
    f: F,
}

impl<F> BlackBox<F>
where
    F: Fn(&Field) -> Result<Field>,
{
    pub fn new(source: &Arc<GridDomain>, target: &Arc<GridDomain>, f: F) -> Self {
        Self {
            source: Arc::clone(source),
            target: Arc::clone(target),
            f,
        }
    }
}

impl<F> Operator for BlackBox<F>
where
    F: Fn(&Field) -> Result<Field>,
{
    fn source(&self) -> &Arc<GridDomain> {
        &self.source
    }

    fn target(&self) -> &Arc<GridDomain> {
        &self.target
    }

    fn apply(&self, u: &Field) -> Result<Field> {
        (self.f)(u)
    }
}

/// `(T u)(y) = (u(y) + u(mirror y)) / 2` on a domain symmetric about the
/// hyperplane `x_axis = plane`. Not a weighted composition operator.
pub struct AveragingOperator {
    domain: Arc<GridDomain>,
    mirror: Vec<usize>,
}

impl AveragingOperator {
    pub fn new(domain: &Arc<GridDomain>, axis: usize, plane: f64) -> Result<Self> {
        if axis >= domain.dim() {
            return Err(LabError::DimMismatch(domain.dim(), axis + 1));
        }
        let mirror = domain
            .centers()
            .enumerate()
            .map(|(i, mut x)| {
                x[axis] = 2.0 * plane - x[axis];
                domain.locate(x).ok_or_else(|| {
                    LabError::InvalidExtent(format!("domain is not symmetric at node {i}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain: Arc::clone(domain),
            mirror,
        })
    }
}

impl Operator for AveragingOperator {
    fn source(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    fn target(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    fn apply(&self, u: &Field) -> Result<Field> {
        if !crate::field::same_domain(u.domain(), &self.domain) {
            return Err(LabError::DomainMismatch);
        }
        let values = (0..u.len())
            .map(|i| 0.5 * (u.value(i) + u.value(self.mirror[i])))
            .collect();
        Field::new(Arc::clone(&self.domain), values)
    }
}
