use std::collections::BTreeSet;

use nalgebra::Matrix2;

use super::ReconstructionResult;
use crate::error::{LabError, Result};
use crate::grid_domain::GridDomain;

/// Parts of the source and target that the reconstructed map misses.
#[derive(Clone, Debug)]
pub struct DefectSets {
    /// Target nodes whose `xi_hat` lies outside the source, together with
    /// the zero set of the reconstruction.
    pub n2_cells: Vec<usize>,
    /// `|source| - |U1 n source|`.
    pub n1_measure: f64,
    /// Source cells covered by the image of the target. `None` if empty.
    pub u1: Option<GridDomain>,
    /// Target cells outside `n2_cells`. `None` if empty.
    pub u2: Option<GridDomain>,
}

/// Rasterizes the image of every usable target cell under the linearized
/// reconstruction `xi(y) + xi'(y) [-h/2, h/2]^N` onto the source lattice.
pub fn defect_sets(rec: &ReconstructionResult, source: &GridDomain) -> Result<DefectSets> {
    let target = rec.domain();
    if target.dim() != source.dim() {
        return Err(LabError::DimMismatch(source.dim(), target.dim()));
    }
    let dim = target.dim();
    let h = target.h();
    let jac: Vec<_> = (0..dim).map(|a| rec.xi_hat.component(a).gradient()).collect();

    let mut n2_cells = Vec::new();
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    for i in 0..target.len() {
        if !rec.usable(i) {
            n2_cells.push(i);
            continue;
        }
        let x = rec.xi_hat.value(i);
        if !source.contains_point(x) {
            n2_cells.push(i);
            continue;
        }
        // J[r][c] = d xi_r / d y_c
        let mut j = Matrix2::identity();
        for r in 0..dim {
            let g = jac[r].value(i);
            for c in 0..dim {
                j[(r, c)] = g[c];
            }
        }
        let inverse = if dim == 1 {
            (j[(0, 0)] != 0.0).then(|| Matrix2::new(1.0 / j[(0, 0)], 0.0, 0.0, 1.0))
        } else {
            j.try_inverse()
        };
        let Some(inverse) = inverse else {
            if let Some(k) = source.locate(x) {
                covered.insert(k);
            }
            continue;
        };
        let mut reach = [0.0f64; 2];
        for r in 0..dim {
            reach[r] = (0..dim).map(|c| j[(r, c)].abs()).sum::<f64>() * h / 2.0;
        }
        let lo = source.lattice_index([x[0] - reach[0], x[1] - reach[1]]);
        let hi = source.lattice_index([x[0] + reach[0], x[1] + reach[1]]);
        let span1 = if dim == 1 { 0..=0 } else { lo[1]..=hi[1] };
        let half = h / 2.0 * (1.0 + 1e-9);
        for a in lo[0]..=hi[0] {
            for b in span1.clone() {
                let Some(k) = source.index_of([a, b]) else { continue };
                let c = source.center(k);
                let d = nalgebra::Vector2::new(c[0] - x[0], c[1] - x[1]);
                let local = inverse * d;
                if (0..dim).all(|r| local[r].abs() <= half) {
                    covered.insert(k);
                }
            }
        }
    }
    let n1_measure = (source.len() - covered.len()) as f64 * source.cell_volume();
    let u1 = if covered.is_empty() {
        None
    } else {
        Some(source.subset(covered.iter().copied())?)
    };
    let flagged: BTreeSet<usize> = n2_cells.iter().copied().collect();
    let rest: Vec<usize> = (0..target.len()).filter(|i| !flagged.contains(i)).collect();
    let u2 = if rest.is_empty() { None } else { Some(target.subset(rest)?) };
    Ok(DefectSets {
        n2_cells,
        n1_measure,
        u1,
        u2,
    })
}
