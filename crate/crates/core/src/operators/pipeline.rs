use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    defect_sets, disjointness_defect, intertwining_defect, isometry_defect, reconstruct,
    rigid_motion_fit, DefectReport, Operator, OperatorSpec, RigidFitReport,
};
use crate::error::Result;
use crate::field::Field;
use crate::grid_domain::{congruence_check, GridDomain, RigidMotion};
use crate::sampling;

/// Seed of the sample battery behind the informational defects.
pub const PIPELINE_SEED: u64 = 0x5EED;
const BATTERY: usize = 5;

/// Component `component` of the target and the part of the source it is
/// carried onto.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentPairing {
    pub component: usize,
    pub motion: RigidMotion,
    pub target_measure: f64,
    /// Measure of the source cells whose centers lie in the image.
    pub source_measure: f64,
    pub symmetric_difference: f64,
    pub fit_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub verdict: bool,
    pub reasons: Vec<String>,
    pub defects: DefectReport,
    pub pairing: Vec<ComponentPairing>,
    /// Source measure left uncovered by the component images.
    pub uncovered: f64,
    /// Source measure covered by more than one component image.
    pub overlap: f64,
    pub zero_set_cells: usize,
    #[serde(skip)]
    pub fit: Option<RigidFitReport>,
}

/// Reconstruction, rigid fit, defect sets and per-component congruence.
///
/// The verdict uses the structural defects only: orthogonality, `grad g`,
/// `|g| - 1`, fit residuals, `N1`, `N2` and the tiling of the source by the
/// component images. Isometry, disjointness and intertwining defects come
/// from a small seeded battery and are reported but not judged.
pub fn congruence_pipeline(op: &OperatorSpec, p: f64, tol: f64) -> Result<PipelineReport> {
    let source = op.source();
    let target = op.target();
    let rec = reconstruct(op, p)?;
    let fit = rigid_motion_fit(&rec)?;
    let sets = defect_sets(&rec, source)?;

    let mut reasons = Vec::new();
    let max_residual = fit.max_fit_residual();
    if fit.orthogonality_defect > tol || max_residual > tol {
        reasons.push("non-rigid ξ".to_string());
    }
    if fit.grad_g_defect > tol {
        reasons.push("non-constant weight".to_string());
    }
    if fit.weight_defect > tol {
        reasons.push("|g| differs from 1".to_string());
    }
    let n2_measure = sets.n2_cells.len() as f64 * target.cell_volume();
    if n2_measure > tol {
        reasons.push(format!("N2 has {} cells", sets.n2_cells.len()));
    }
    if sets.n1_measure > tol {
        reasons.push(format!("N1 has measure {:.4}", sets.n1_measure));
    }

    let (labels, _) = target.component_labels();
    let mut pairing = Vec::with_capacity(fit.components.len());
    let mut hits = vec![0u32; source.len()];
    for c in &fit.components {
        let part = target.subset((0..target.len()).filter(|&i| labels[i] == c.component))?;
        let covered: Vec<usize> = (0..source.len())
            .filter(|&k| part.contains_point(c.motion.apply_inverse(source.center(k))))
            .collect();
        for &k in &covered {
            hits[k] += 1;
        }
        let symmetric_difference = if covered.is_empty() {
            part.measure()
        } else {
            let piece = source.subset(covered.iter().copied())?;
            congruence_check(&piece, &part, &c.motion, tol)?.symmetric_difference
        };
        if symmetric_difference > tol {
            reasons.push(format!(
                "component {} image differs from the source by {:.4}",
                c.component, symmetric_difference
            ));
        }
        pairing.push(ComponentPairing {
            component: c.component,
            motion: c.motion,
            target_measure: part.measure(),
            source_measure: covered.len() as f64 * source.cell_volume(),
            symmetric_difference,
            fit_residual: c.fit_residual,
        });
    }
    let vol = source.cell_volume();
    let uncovered = hits.iter().filter(|&&n| n == 0).count() as f64 * vol;
    let overlap = hits.iter().map(|&n| n.saturating_sub(1) as f64).sum::<f64>() * vol;
    if uncovered + overlap > tol {
        reasons.push("component images do not tile the source".to_string());
    }

    let (isometry, disjointness, intertwining) = battery(op, p);
    let defects = DefectReport {
        isometry,
        disjointness,
        intertwining,
        orthogonality: fit.orthogonality_defect,
        grad_g: fit.grad_g_defect,
        weight: fit.weight_defect,
        n1_measure: sets.n1_measure,
        n2_cells: sets.n2_cells.len(),
    };
    Ok(PipelineReport {
        verdict: reasons.is_empty(),
        reasons,
        defects,
        pairing,
        uncovered,
        overlap,
        zero_set_cells: rec.zero_set_cells,
        fit: Some(fit),
    })
}

fn bump_radius(domain: &GridDomain) -> f64 {
    let (lo, hi) = domain.bounding_box();
    let extent = (0..domain.dim())
        .map(|a| hi[a] - lo[a])
        .fold(f64::INFINITY, f64::min);
    (extent / 8.0).max(3.0 * domain.h())
}

// NaN marks a defect the battery could not sample.
fn battery(op: &OperatorSpec, p: f64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(PIPELINE_SEED);
    let source = op.source();
    let samples: Vec<Field> = (0..BATTERY)
        .filter_map(|_| sampling::random_smooth(source, &mut rng).ok())
        .collect();
    let isometry = isometry_defect(op, &samples, p).unwrap_or(f64::NAN);

    let radius = bump_radius(source);
    let maps_inside = |b: &Field| op.apply(b).map(|t| t.vanishes_on_boundary_layer()).unwrap_or(false);
    let pairs: Vec<(Field, Field)> = (0..BATTERY)
        .filter_map(|_| sampling::disjoint_bump_pair_where(source, radius, &mut rng, maps_inside).ok())
        .collect();
    let disjointness = if pairs.is_empty() {
        f64::NAN
    } else {
        disjointness_defect(op, &pairs, p).map_or(f64::NAN, |d| d.outside_band)
    };
    let trials: Vec<(Field, Field)> = samples
        .iter()
        .zip(pairs.iter())
        .map(|(u, (v, _))| (u.clone(), v.clone()))
        .collect();
    let intertwining = if trials.is_empty() {
        f64::NAN
    } else {
        intertwining_defect(op, &trials, p).unwrap_or(f64::NAN)
    };
    (isometry, disjointness, intertwining)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ComponentMotion;
    use std::sync::Arc;

    #[test]
    fn rigid_operator_on_matching_domains() {
        let h = 0.05;
        let d = Arc::new(GridDomain::make_box(&[-0.5, -0.5], &[0.5, 0.5], h).unwrap());
        let m = RigidMotion::rotation(std::f64::consts::FRAC_PI_2, [0.0, 0.0], 1).unwrap();
        let op = OperatorSpec::rigid(&d, &d, vec![ComponentMotion { motion: m, component: 0 }]).unwrap();
        let report = congruence_pipeline(&op, 3.0, 4.0 * h).unwrap();
        assert!(report.verdict, "{:?}", report.reasons);
        assert_eq!(report.pairing.len(), 1);
    }

    #[test]
    fn example_5_4_pairs_two_strips() {
        let h = 0.02;
        let op = OperatorSpec::example_5_4(h).unwrap();
        let report = congruence_pipeline(&op, 3.0, 4.0 * h).unwrap();
        assert!(report.verdict, "{:?}", report.reasons);
        assert_eq!(report.pairing.len(), 2);
        assert_eq!(report.defects.n2_cells, 0);
        assert!(report.defects.n1_measure <= 2.0 * h);
        let lower = report.pairing[0].motion.b();
        let upper = report.pairing[1].motion.b();
        assert!((lower[1] - 1.0).abs() <= 2.0 * h && lower[0].abs() <= 2.0 * h);
        assert!((upper[1] + 1.0).abs() <= 2.0 * h && upper[0].abs() <= 2.0 * h);
        assert!(report.defects.disjointness <= 1e-12);
    }

    #[test]
    fn example_4_8_is_rejected_as_non_rigid() {
        let op = OperatorSpec::example_4_8(1e-3).unwrap();
        let report = congruence_pipeline(&op, 2.0, 4e-3).unwrap();
        assert!(!report.verdict);
        assert!(report.reasons.iter().any(|r| r == "non-rigid ξ"));
    }

    #[test]
    fn fat_cantor_reports_positive_n1() {
        let op = OperatorSpec::example_4_14(0.5, 1e-3).unwrap();
        let report = congruence_pipeline(&op, 2.0, 4e-3).unwrap();
        assert!(!report.verdict);
        assert!((report.defects.n1_measure - 0.5).abs() <= 0.02);
        assert!(report.reasons.iter().any(|r| r.starts_with("N1")));
    }
}
