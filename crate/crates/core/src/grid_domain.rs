//! Rasterized bounded open sets of `R^1` and `R^2`.
//!
//! A [`GridDomain`] is a finite set of active cells on the lattice
//! `origin + h * Z^dim`. Cell `k` covers `origin + h*k + [0, h)^dim` and its
//! node is the cell center. One-dimensional domains store the unused second
//! index and coordinate as zero.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A point of `R^dim`; the second coordinate is zero when `dim == 1`.
pub type Point = [f64; 2];

pub const DEFAULT_CELL_BUDGET: u64 = 1_000_000;
pub const CELL_BUDGET_ENV: &str = "SIL_CELL_BUDGET";

const NO_NEIGHBOR: u32 = u32::MAX;
// Relative slack (in cells) used when a point sits on a cell face.
const LOCATE_SLACK: f64 = 1e-9;

/// Largest grid any constructor will build, overridable through
/// `SIL_CELL_BUDGET`.
pub fn cell_budget() -> u64 {
    std::env::var(CELL_BUDGET_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .filter(|&b| b > 0)
        .unwrap_or(DEFAULT_CELL_BUDGET)
}

#[derive(Clone)]
pub struct GridDomain {
    dim: usize,
    h: f64,
    origin: Point,
    cells: Vec<[i64; 2]>,
    lookup: HashMap<[i64; 2], u32>,
    // [axis0-, axis0+, axis1-, axis1+]
    neighbors: Vec<[u32; 4]>,
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.h == other.h
            && self.origin == other.origin
            && self.cells == other.cells
    }
}

impl fmt::Debug for GridDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridDomain")
            .field("dim", &self.dim)
            .field("h", &self.h)
            .field("origin", &&self.origin[..self.dim])
            .field("cells", &self.cells.len())
            .field("measure", &self.measure())
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(LabError::UnsupportedDim(dim))
    }
}

fn check_width(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidExtent(format!("cell width {h} must be positive")))
    }
}

impl GridDomain {
    /// Builds a domain from explicit lattice indices. Duplicates are merged.
    pub fn from_cells<I>(dim: usize, h: f64, origin: Point, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = [i64; 2]>,
    {
        check_dim(dim)?;
        check_width(h)?;
        let mut cells: Vec<[i64; 2]> = cells
            .into_iter()
            .map(|c| if dim == 1 { [c[0], 0] } else { c })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        if cells.is_empty() {
            return Err(LabError::InvalidExtent("domain has no active cells".into()));
        }
        let budget = cell_budget();
        if cells.len() as u64 > budget {
            return Err(LabError::CellBudgetExceeded {
                cells: cells.len() as u64,
                budget,
            });
        }
        let origin = if dim == 1 { [origin[0], 0.0] } else { origin };
        let lookup: HashMap<[i64; 2], u32> = cells
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32))
            .collect();
        let neighbors = cells
            .iter()
            .map(|c| {
                let mut nb = [NO_NEIGHBOR; 4];
                for axis in 0..dim {
                    for (slot, step) in [(2 * axis, -1), (2 * axis + 1, 1)] {
                        let mut k = *c;
                        k[axis] += step;
                        if let Some(&j) = lookup.get(&k) {
                            nb[slot] = j;
                        }
                    }
                }
                nb
            })
            .collect();
        Ok(Self {
            dim,
            h,
            origin,
            cells,
            lookup,
            neighbors,
        })
    }

    /// Rasterizes `{x : inside(x)}` over the index box `[lo, hi)`: a cell is
    /// active iff its center satisfies the predicate.
    pub fn rasterize<F>(
        dim: usize,
        h: f64,
        origin: Point,
        lo: [i64; 2],
        hi: [i64; 2],
        inside: F,
    ) -> Result<Self>
    where
        F: Fn(Point) -> bool,
    {
        check_dim(dim)?;
        check_width(h)?;
        let (lo, hi) = if dim == 1 {
            ([lo[0], 0], [hi[0], 1])
        } else {
            (lo, hi)
        };
        let total = (hi[0] - lo[0]).max(0) as u64 * (hi[1] - lo[1]).max(0) as u64;
        let budget = cell_budget();
        if total > budget {
            return Err(LabError::CellBudgetExceeded {
                cells: total,
                budget,
            });
        }
        let mut cells = Vec::new();
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                let k = [i, j];
                if inside(center_of(dim, h, &origin, k)) {
                    cells.push(k);
                }
            }
        }
        Self::from_cells(dim, h, origin, cells)
    }

    /// Rasterization of the open box `(lo, hi)` with the lattice anchored at `lo`.
    pub fn make_box(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let dim = lo.len();
        check_dim(dim)?;
        if hi.len() != dim {
            return Err(LabError::DimMismatch(dim, hi.len()));
        }
        check_width(h)?;
        let mut lo_p = [0.0; 2];
        let mut hi_p = [0.0; 2];
        let mut n = [1i64; 2];
        for a in 0..dim {
            let extent = hi[a] - lo[a];
            if !(extent.is_finite() && extent > 0.0) {
                return Err(LabError::InvalidExtent(format!(
                    "box extent along axis {a} is {extent}"
                )));
            }
            let count = (extent / h).ceil();
            if count > cell_budget() as f64 {
                return Err(LabError::CellBudgetExceeded {
                    cells: count as u64,
                    budget: cell_budget(),
                });
            }
            n[a] = count as i64;
            lo_p[a] = lo[a];
            hi_p[a] = hi[a];
        }
        Self::rasterize(dim, h, lo_p, [0, 0], n, |x| {
            (0..dim).all(|a| x[a] > lo_p[a] && x[a] < hi_p[a])
        })
    }

    /// Union of open boxes minus closed boxes, on a lattice anchored at the
    /// componentwise minimum of the box corners.
    pub fn from_boxes(dim: usize, h: f64, boxes: &[(Point, Point)], subtract: &[(Point, Point)]) -> Result<Self> {
        check_dim(dim)?;
        check_width(h)?;
        if boxes.is_empty() {
            return Err(LabError::EmptyInput("domain needs at least one box"));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (a, b) in boxes {
            for ax in 0..dim {
                if !(b[ax] > a[ax]) {
                    return Err(LabError::InvalidExtent(format!(
                        "box with lo {:?} and hi {:?}",
                        &a[..dim],
                        &b[..dim]
                    )));
                }
                lo[ax] = lo[ax].min(a[ax]);
                hi[ax] = hi[ax].max(b[ax]);
            }
        }
        if dim == 1 {
            lo[1] = 0.0;
            hi[1] = 0.0;
        }
        let mut n = [1i64; 2];
        for ax in 0..dim {
            n[ax] = ((hi[ax] - lo[ax]) / h).ceil() as i64;
        }
        let in_open = |x: Point, (a, b): &(Point, Point)| (0..dim).all(|ax| x[ax] > a[ax] && x[ax] < b[ax]);
        let in_closed = |x: Point, (a, b): &(Point, Point)| (0..dim).all(|ax| x[ax] >= a[ax] && x[ax] <= b[ax]);
        Self::rasterize(dim, h, lo, [0, 0], n, |x| {
            boxes.iter().any(|bx| in_open(x, bx)) && !subtract.iter().any(|bx| in_closed(x, bx))
        })
    }

    /// `(0,1) x ((-2,-1) u (1,2))`, the two-strip target domain of the
    /// translation example.
    pub fn example_5_4_omega2(h: f64) -> Result<Self> {
        Self::from_boxes(
            2,
            h,
            &[([0.0, -2.0], [1.0, -1.0]), ([0.0, 1.0], [1.0, 2.0])],
            &[],
        )
    }

    /// `(0,1) x (-1,1)`, the source domain of the translation example.
    pub fn example_5_4_omega1(h: f64) -> Result<Self> {
        Self::make_box(&[0.0, -1.0], &[1.0, 1.0], h)
    }

    /// Union of the open intervals removed from `[0,1]` by a finite fat
    /// Cantor construction of total removed length `removed`; see
    /// [`FatCantor`].
    pub fn fat_cantor(removed: f64, h: f64) -> Result<(Self, FatCantor)> {
        let construction = FatCantor::new(removed, 4.0 * h)?;
        let intervals = construction.intervals.clone();
        let n = (1.0 / h).ceil() as i64;
        let domain = Self::rasterize(1, h, [0.0, 0.0], [0, 0], [n, 1], |x| {
            let t = x[0];
            // intervals are sorted and disjoint
            let k = intervals.partition_point(|&(_, b)| b <= t);
            k < intervals.len() && intervals[k].0 < t && t < intervals[k].1
        })?;
        Ok((domain, construction))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Always false: domains have at least one cell.
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[[i64; 2]] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> [i64; 2] {
        self.cells[i]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.cell_volume()
    }

    pub fn center(&self, i: usize) -> Point {
        center_of(self.dim, self.h, &self.origin, self.cells[i])
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.center(i))
    }

    pub fn index_of(&self, cell: [i64; 2]) -> Option<usize> {
        let cell = if self.dim == 1 { [cell[0], 0] } else { cell };
        self.lookup.get(&cell).map(|&i| i as usize)
    }

    pub fn neighbor(&self, i: usize, axis: usize, forward: bool) -> Option<usize> {
        let j = self.neighbors[i][2 * axis + usize::from(forward)];
        (j != NO_NEIGHBOR).then_some(j as usize)
    }

    /// Lattice index of the cell containing `x` (active or not).
    pub fn lattice_index(&self, x: Point) -> [i64; 2] {
        let mut k = [0i64; 2];
        for a in 0..self.dim {
            k[a] = ((x[a] - self.origin[a]) / self.h).floor() as i64;
        }
        k
    }

    /// Active cell containing `x`. Points within a tiny fraction of a cell
    /// of an active cell's closure are attributed to it.
    pub fn locate(&self, x: Point) -> Option<usize> {
        if let Some(i) = self.index_of(self.lattice_index(x)) {
            return Some(i);
        }
        let eps = LOCATE_SLACK * self.h;
        let offsets: &[[f64; 2]] = if self.dim == 1 {
            &[[eps, 0.0], [-eps, 0.0]]
        } else {
            &[
                [eps, 0.0],
                [-eps, 0.0],
                [0.0, eps],
                [0.0, -eps],
                [eps, eps],
                [eps, -eps],
                [-eps, eps],
                [-eps, -eps],
            ]
        };
        offsets
            .iter()
            .find_map(|d| self.index_of(self.lattice_index([x[0] + d[0], x[1] + d[1]])))
    }

    pub fn contains_point(&self, x: Point) -> bool {
        self.locate(x).is_some()
    }

    /// Closed bounding box of the union of active cells.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for c in &self.cells {
            for a in 0..self.dim {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a] + 1);
            }
        }
        let mut blo = [0.0; 2];
        let mut bhi = [0.0; 2];
        for a in 0..self.dim {
            blo[a] = self.origin[a] + self.h * lo[a] as f64;
            bhi[a] = self.origin[a] + self.h * hi[a] as f64;
        }
        (blo, bhi)
    }

    /// True if some face neighbor of cell `i` is inactive.
    pub fn is_boundary_cell(&self, i: usize) -> bool {
        self.neighbors[i][..2 * self.dim]
            .iter()
            .any(|&j| j == NO_NEIGHBOR)
    }

    /// Number of exposed cell faces times the face size `h^(dim-1)`.
    pub fn perimeter_estimate(&self) -> f64 {
        let faces: usize = self
            .neighbors
            .iter()
            .map(|nb| nb[..2 * self.dim].iter().filter(|&&j| j == NO_NEIGHBOR).count())
            .sum();
        faces as f64 * self.h.powi(self.dim as i32 - 1)
    }

    /// Component label per cell (face adjacency) and the number of components.
    /// Labels are ordered by the first cell of each component.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.len()];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for &j in &self.neighbors[i][..2 * self.dim] {
                    if j != NO_NEIGHBOR && label[j as usize] == usize::MAX {
                        label[j as usize] = count;
                        queue.push_back(j as usize);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn connected_components(&self) -> Vec<GridDomain> {
        let (label, count) = self.component_labels();
        let mut parts: Vec<Vec<[i64; 2]>> = vec![Vec::new(); count];
        for (i, &l) in label.iter().enumerate() {
            parts[l].push(self.cells[i]);
        }
        parts
            .into_iter()
            .map(|cells| {
                Self::from_cells(self.dim, self.h, self.origin, cells)
                    .expect("component of a valid domain is valid")
            })
            .collect()
    }

    /// Sub-domain on the same lattice made of the listed cells.
    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::from_cells(
            self.dim,
            self.h,
            self.origin,
            indices.into_iter().map(|i| self.cells[i]),
        )
    }

    /// Rasterization of `{Q x + b : x in self}` on a lattice of width `h_out`
    /// anchored at the image of this domain's origin.
    pub fn apply_rigid_motion(&self, m: &RigidMotion, h_out: f64) -> Result<Self> {
        if m.dim() != self.dim {
            return Err(LabError::DimMismatch(self.dim, m.dim()));
        }
        check_width(h_out)?;
        let origin = m.apply(self.origin);
        let (lo, hi) = self.bounding_box();
        let corners: Vec<Point> = if self.dim == 1 {
            vec![lo, hi]
        } else {
            vec![lo, hi, [lo[0], hi[1]], [hi[0], lo[1]]]
        };
        let mut klo = [0i64; 2];
        let mut khi = [1i64; 2];
        for a in 0..self.dim {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in &corners {
                let y = m.apply(*c)[a];
                mn = mn.min(y);
                mx = mx.max(y);
            }
            klo[a] = ((mn - origin[a]) / h_out).floor() as i64 - 1;
            khi[a] = ((mx - origin[a]) / h_out).ceil() as i64 + 1;
        }
        Self::rasterize(self.dim, h_out, origin, klo, khi, |y| {
            self.contains_point(m.apply_inverse(y))
        })
    }

    /// Measure of `self \ other`, `other \ self` and `self n other` on the
    /// common refinement lattice (finer width, anchored at the finer domain).
    pub fn overlap_measures(&self, other: &GridDomain) -> Result<OverlapMeasures> {
        if self.dim != other.dim {
            return Err(LabError::DimMismatch(self.dim, other.dim));
        }
        let dim = self.dim;
        if self.h == other.h && self.origin == other.origin {
            let common = self
                .cells
                .iter()
                .filter(|c| other.lookup.contains_key(*c))
                .count();
            let vol = self.cell_volume();
            return Ok(OverlapMeasures {
                only_first: (self.len() - common) as f64 * vol,
                only_second: (other.len() - common) as f64 * vol,
                both: common as f64 * vol,
            });
        }
        let fine = if self.h <= other.h { self } else { other };
        let h = fine.h;
        let origin = fine.origin;
        let (alo, ahi) = self.bounding_box();
        let (blo, bhi) = other.bounding_box();
        let mut klo = [0i64; 2];
        let mut khi = [1i64; 2];
        for a in 0..dim {
            klo[a] = ((alo[a].min(blo[a]) - origin[a]) / h).floor() as i64 - 1;
            khi[a] = ((ahi[a].max(bhi[a]) - origin[a]) / h).ceil() as i64 + 1;
        }
        let total = (khi[0] - klo[0]) as u64 * (khi[1] - klo[1]) as u64;
        let budget = cell_budget();
        if total > budget {
            return Err(LabError::CellBudgetExceeded {
                cells: total,
                budget,
            });
        }
        let (mut first, mut second, mut both) = (0u64, 0u64, 0u64);
        for i in klo[0]..khi[0] {
            for j in klo[1]..khi[1] {
                let x = center_of(dim, h, &origin, [i, j]);
                match (self.contains_point(x), other.contains_point(x)) {
                    (true, true) => both += 1,
                    (true, false) => first += 1,
                    (false, true) => second += 1,
                    (false, false) => {}
                }
            }
        }
        let vol = h.powi(dim as i32);
        Ok(OverlapMeasures {
            only_first: first as f64 * vol,
            only_second: second as f64 * vol,
            both: both as f64 * vol,
        })
    }

    pub fn symmetric_difference_measure(&self, other: &GridDomain) -> Result<f64> {
        self.overlap_measures(other).map(|o| o.symmetric_difference())
    }

    /// Grid proxy for "interior of the closure equals the set": no inactive
    /// cell has all of its face neighbors active.
    pub fn is_topologically_regular(&self) -> bool {
        for (i, c) in self.cells.iter().enumerate() {
            for axis in 0..self.dim {
                for (slot, step) in [(2 * axis, -1), (2 * axis + 1, 1)] {
                    if self.neighbors[i][slot] != NO_NEIGHBOR {
                        continue;
                    }
                    let mut hole = *c;
                    hole[axis] += step;
                    let enclosed = (0..self.dim).all(|ax| {
                        [-1, 1].iter().all(|s| {
                            let mut k = hole;
                            k[ax] += s;
                            self.lookup.contains_key(&k)
                        })
                    });
                    if enclosed {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn center_of(dim: usize, h: f64, origin: &Point, k: [i64; 2]) -> Point {
    let mut x = [0.0; 2];
    for a in 0..dim {
        x[a] = origin[a] + h * (k[a] as f64 + 0.5);
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapMeasures {
    pub only_first: f64,
    pub only_second: f64,
    pub both: f64,
}

impl OverlapMeasures {
    pub fn symmetric_difference(&self) -> f64 {
        self.only_first + self.only_second
    }
}

/// Outcome of [`congruence_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CongruenceVerdict {
    pub congruent: bool,
    pub symmetric_difference: f64,
}

/// Compares `first` with the image of `second` under `m`.
pub fn congruence_check(
    first: &GridDomain,
    second: &GridDomain,
    m: &RigidMotion,
    tol: f64,
) -> Result<CongruenceVerdict> {
    if first.dim() != second.dim() {
        return Err(LabError::DimMismatch(first.dim(), second.dim()));
    }
    let h_out = first.h().min(second.h());
    let image = second.apply_rigid_motion(m, h_out)?;
    let defect = first.symmetric_difference_measure(&image)?;
    Ok(CongruenceVerdict {
        congruent: defect <= tol,
        symmetric_difference: defect,
    })
}

/// Finite fat Cantor construction on `[0, 1]`.
///
/// Stage `n` removes an open middle interval from each of the `2^(n-1)`
/// remaining closed intervals; the stage removes `removed * 2^-n` in total,
/// and the last stage also removes the leftover `removed * 2^-depth` so
/// that exactly `removed` is taken away. The depth is the largest one whose
/// smallest removed interval is at least `min_gap` long.
#[derive(Clone, Debug, PartialEq)]
pub struct FatCantor {
    pub removed: f64,
    pub depth: u32,
    /// Removed open intervals, sorted.
    pub intervals: Vec<(f64, f64)>,
}

impl FatCantor {
    pub fn new(removed: f64, min_gap: f64) -> Result<Self> {
        if !(removed > 0.0 && removed < 1.0) {
            return Err(LabError::InvalidExtent(format!(
                "fat Cantor removed length {removed} must lie in (0, 1)"
            )));
        }
        // smallest gap at depth K is removed / 2^(2K-2)
        let mut depth = 1u32;
        while depth < 30 && removed / 4f64.powi(depth as i32) >= min_gap {
            depth += 1;
        }
        let mut kept = vec![(0.0f64, 1.0f64)];
        let mut intervals = Vec::new();
        for stage in 1..=depth {
            let stage_total = if stage == depth {
                removed * 0.5f64.powi(stage as i32 - 1)
            } else {
                removed * 0.5f64.powi(stage as i32)
            };
            let gap = stage_total / kept.len() as f64;
            let mut next = Vec::with_capacity(2 * kept.len());
            for &(a, b) in &kept {
                let mid = 0.5 * (a + b);
                let (ga, gb) = (mid - 0.5 * gap, mid + 0.5 * gap);
                intervals.push((ga, gb));
                next.push((a, ga));
                next.push((gb, b));
            }
            kept = next;
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            removed,
            depth,
            intervals,
        })
    }

    pub fn removed_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// Parse `"fat_cantor(0.5)"`.
pub fn parse_fat_cantor(name: &str) -> Option<f64> {
    let inner = name.trim().strip_prefix("fat_cantor(")?.strip_suffix(')')?;
    inner.trim().parse().ok()
}

/// `x -> Q x + b` with a weight sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMotion {
    dim: usize,
    q: [[f64; 2]; 2],
    b: Point,
    sign: i8,
}

pub const ORTHOGONALITY_TOL: f64 = 1e-12;

impl RigidMotion {
    /// `q` is row-major and `dim x dim`.
    pub fn new(dim: usize, q: &[Vec<f64>], b: &[f64], sign: i32) -> Result<Self> {
        check_dim(dim)?;
        if q.len() != dim || q.iter().any(|r| r.len() != dim) || b.len() != dim {
            return Err(LabError::DegenerateMotion(format!(
                "expected a {dim}x{dim} matrix and a length-{dim} offset"
            )));
        }
        let mut qm = [[0.0, 0.0], [0.0, 1.0]];
        let mut bv = [0.0; 2];
        for r in 0..dim {
            for c in 0..dim {
                qm[r][c] = q[r][c];
            }
            bv[r] = b[r];
        }
        Self::from_parts(dim, qm, bv, sign)
    }

    pub fn from_parts(dim: usize, q: [[f64; 2]; 2], b: Point, sign: i32) -> Result<Self> {
        check_dim(dim)?;
        if sign != 1 && sign != -1 {
            return Err(LabError::DegenerateMotion(format!("sign {sign} is not +-1")));
        }
        let mut q = q;
        let mut b = b;
        if dim == 1 {
            q[0][1] = 0.0;
            q[1][0] = 0.0;
            q[1][1] = 1.0;
            b[1] = 0.0;
        }
        let m = Self {
            dim,
            q,
            b,
            sign: sign as i8,
        };
        let orth = m.orthogonality_defect();
        if !(orth <= ORTHOGONALITY_TOL) {
            return Err(LabError::DegenerateMotion(format!(
                "max |Q^T Q - I| = {orth:e}"
            )));
        }
        if !((m.det().abs() - 1.0).abs() <= ORTHOGONALITY_TOL) {
            return Err(LabError::DegenerateMotion(format!("det Q = {}", m.det())));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self::translation(dim, [0.0, 0.0])
    }

    pub fn translation(dim: usize, b: Point) -> Self {
        Self::from_parts(dim, [[1.0, 0.0], [0.0, 1.0]], b, 1).expect("identity matrix is orthogonal")
    }

    /// Planar rotation by `theta` about the origin followed by `b`.
    pub fn rotation(theta: f64, b: Point, sign: i32) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Self::from_parts(2, [[c, -s], [s, c]], b, sign)
    }

    /// Planar rotation by `theta` about `pivot`.
    pub fn rotation_about(theta: f64, pivot: Point) -> Self {
        let (s, c) = theta.sin_cos();
        let b = [
            pivot[0] - (c * pivot[0] - s * pivot[1]),
            pivot[1] - (s * pivot[0] + c * pivot[1]),
        ];
        Self::from_parts(2, [[c, -s], [s, c]], b, 1).expect("rotation matrix is orthogonal")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> [[f64; 2]; 2] {
        self.q
    }

    pub fn b(&self) -> Point {
        self.b
    }

    pub fn sign(&self) -> i32 {
        self.sign as i32
    }

    pub fn with_sign(mut self, sign: i32) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(LabError::DegenerateMotion(format!("sign {sign} is not +-1")));
        }
        self.sign = sign as i8;
        Ok(self)
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.q[0][0]
        } else {
            self.q[0][0] * self.q[1][1] - self.q[0][1] * self.q[1][0]
        }
    }

    /// Rotation angle of the planar part, `atan2(q10, q00)`.
    pub fn angle(&self) -> f64 {
        self.q[1][0].atan2(self.q[0][0])
    }

    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let dot: f64 = (0..self.dim).map(|k| self.q[k][r] * self.q[k][c]).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        if worst.is_nan() {
            f64::INFINITY
        } else {
            worst
        }
    }

    pub fn apply(&self, x: Point) -> Point {
        let mut y = [0.0; 2];
        for r in 0..self.dim {
            y[r] = (0..self.dim).map(|c| self.q[r][c] * x[c]).sum::<f64>() + self.b[r];
        }
        y
    }

    pub fn apply_inverse(&self, y: Point) -> Point {
        let mut x = [0.0; 2];
        for c in 0..self.dim {
            x[c] = (0..self.dim).map(|r| self.q[r][c] * (y[r] - self.b[r])).sum();
        }
        x
    }

    pub fn inverse(&self) -> Self {
        let mut inv = *self;
        for r in 0..self.dim {
            for c in 0..self.dim {
                inv.q[r][c] = self.q[c][r];
            }
        }
        inv.b = [0.0; 2];
        let rotated = inv.apply(self.b);
        inv.b = [-rotated[0], -rotated[1]];
        inv
    }

    /// Rows of `Q` truncated to `dim`.
    pub fn q_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|r| self.q[r][..self.dim].to_vec()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RigidMotionRepr {
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default = "default_sign")]
    sign: i32,
}

fn default_sign() -> i32 {
    1
}

impl Serialize for RigidMotion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RigidMotionRepr {
            q: self.q_rows(),
            b: self.b[..self.dim].to_vec(),
            sign: self.sign(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidMotion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RigidMotionRepr::deserialize(d)?;
        RigidMotion::new(r.q.len(), &r.q, &r.b, r.sign).map_err(serde::de::Error::custom)
    }
}
