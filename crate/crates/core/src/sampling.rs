//! Seeded random fields for property sweeps.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::error::{LabError, Result};
use crate::field::{bump, Field, VectorField};
use crate::grid_domain::{GridDomain, Point};

const MODES: usize = 3;

struct Wave {
    amp: f64,
    freq: [f64; 2],
    phase: f64,
}

fn waves<R: Rng>(domain: &GridDomain, rng: &mut R) -> (Vec<Wave>, Point) {
    let (lo, hi) = domain.bounding_box();
    let mut waves = Vec::with_capacity(MODES);
    for k in 1..=MODES {
        let mut freq = [0.0; 2];
        for a in 0..domain.dim() {
            let extent = (hi[a] - lo[a]).max(domain.h());
            freq[a] = rng.gen_range(-2.0..2.0) * PI / extent;
        }
        waves.push(Wave {
            amp: rng.gen_range(-1.0..1.0) / k as f64,
            freq,
            phase: rng.gen_range(0.0..2.0 * PI),
        });
    }
    (waves, lo)
}

fn eval(waves: &[Wave], lo: Point, x: Point) -> f64 {
    waves
        .iter()
        .map(|w| w.amp * (w.freq[0] * (x[0] - lo[0]) + w.freq[1] * (x[1] - lo[1]) + w.phase).sin())
        .sum()
}

/// Constant plus a few low-frequency sine modes scaled to the bounding box.
pub fn random_smooth<R: Rng>(domain: &Arc<GridDomain>, rng: &mut R) -> Result<Field> {
    let c = rng.gen_range(-1.0..1.0);
    let (w, lo) = waves(domain, rng);
    Field::from_fn(domain, |x| c + eval(&w, lo, x))
}

/// Smooth field bounded away from zero with a dominant linear trend, so
/// that `|u|` and `|grad u|` stay away from zero.
pub fn random_positive_smooth<R: Rng>(domain: &Arc<GridDomain>, rng: &mut R) -> Result<Field> {
    let (lo, hi) = domain.bounding_box();
    let mut slope = [0.0; 2];
    for a in 0..domain.dim() {
        let extent = (hi[a] - lo[a]).max(domain.h());
        slope[a] = rng.gen_range(0.5..1.5) / extent;
    }
    let (w, _) = waves(domain, rng);
    Field::from_fn(domain, |x| {
        2.0 + slope[0] * (x[0] - lo[0]) + slope[1] * (x[1] - lo[1]) + 0.1 * eval(&w, lo, x)
    })
}

/// Independent uniform nodal values in `[-scale, scale]`.
pub fn random_vector_field<R: Rng>(domain: &Arc<GridDomain>, rng: &mut R) -> Result<VectorField> {
    let scale: f64 = rng.gen_range(0.1..10.0);
    let dim = domain.dim();
    let values = (0..domain.len())
        .map(|_| {
            let mut v = [0.0; 2];
            for c in v.iter_mut().take(dim) {
                *c = rng.gen_range(-scale..scale);
            }
            v
        })
        .collect();
    VectorField::new(Arc::clone(domain), values)
}

const ATTEMPTS: usize = 200;

fn random_center<R: Rng>(domain: &GridDomain, rng: &mut R) -> Point {
    let i = rng.gen_range(0..domain.len());
    let mut x = domain.center(i);
    for a in 0..domain.dim() {
        x[a] += rng.gen_range(-0.5..0.5) * domain.h();
    }
    x
}

/// Bump of the given radius at a random center where it fits.
pub fn random_bump<R: Rng>(domain: &Arc<GridDomain>, radius: f64, rng: &mut R) -> Result<Field> {
    random_bump_where(domain, radius, rng, |_| true)
}

/// Like [`random_bump`], keeping only bumps accepted by `keep`.
pub fn random_bump_where<R, F>(domain: &Arc<GridDomain>, radius: f64, rng: &mut R, keep: F) -> Result<Field>
where
    R: Rng,
    F: Fn(&Field) -> bool,
{
    for _ in 0..ATTEMPTS {
        let c = random_center(domain, rng);
        if let Ok(b) = bump(domain, c, radius) {
            if keep(&b) {
                return Ok(b);
            }
        }
    }
    Err(LabError::NotCompactlySupported(format!(
        "no bump of radius {radius} fits after {ATTEMPTS} attempts"
    )))
}

/// Two bumps of the given radius whose supports are at least two cells apart.
pub fn disjoint_bump_pair<R: Rng>(domain: &Arc<GridDomain>, radius: f64, rng: &mut R) -> Result<(Field, Field)> {
    disjoint_bump_pair_where(domain, radius, rng, |_| true)
}

pub fn disjoint_bump_pair_where<R, F>(
    domain: &Arc<GridDomain>,
    radius: f64,
    rng: &mut R,
    keep: F,
) -> Result<(Field, Field)>
where
    R: Rng,
    F: Fn(&Field) -> bool,
{
    let first = random_bump_where(domain, radius, rng, &keep)?;
    for _ in 0..ATTEMPTS {
        let second = random_bump_where(domain, radius, rng, &keep)?;
        if first.is_disjoint_from(&second)? {
            return Ok((first, second));
        }
    }
    Err(LabError::NotDisjoint(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Arc<GridDomain> {
        Arc::new(GridDomain::make_box(&[0.0, 0.0], &[1.0, 1.0], 0.02).unwrap())
    }

    #[test]
    fn seeded_draws_repeat() {
        let d = square();
        let a = random_smooth(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_smooth(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn positive_fields_stay_positive() {
        let d = square();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = random_positive_smooth(&d, &mut rng).unwrap();
            assert!(u.values().iter().all(|&x| x > 1.0));
            let g = u.gradient();
            assert!(g.values().iter().all(|v| v[0] > 0.0 && v[1] > 0.0));
        }
    }

    #[test]
    fn bump_pairs_are_disjoint_and_interior() {
        let d = square();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (u, v) = disjoint_bump_pair(&d, 0.1, &mut rng).unwrap();
            assert!(u.is_disjoint_from(&v).unwrap());
            assert!(u.vanishes_on_boundary_layer() && v.vanishes_on_boundary_layer());
        }
        assert!(random_bump(&d, 0.8, &mut rng).is_err());
    }
}
