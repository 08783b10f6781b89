//! Hardy–Littlewood maximal function, A1 constants, and Coifman–Rochberg
//! weights on grids.
//!
//! Every supremum over cubes is taken over the same node-centered
//! [`CubeFamily`], with averages over the nodes a cube contains (clipped to
//! the grid). Two-sided inequalities checked elsewhere use this family on both
//! sides, so they can be asserted without discretization slack.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Cube;
use crate::grid::{ScalarField, WeightField};
use crate::window::{sliding_extreme, window_averages, CubeFamily, Extreme, PrefixSums};

/// Mean of `f` over the grid nodes inside the closed cube `q`.
pub fn cube_average(f: &ScalarField, q: &Cube) -> Result<f64> {
    let grid = f.grid();
    if q.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: q.dim(),
        });
    }
    let range = grid.node_range(q).ok_or(Error::EmptyCubeSample)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    grid.for_each_in_range(&range, |i| {
        sum += f.get(i);
        count += 1;
    });
    Ok(sum / count as f64)
}

/// Minimum of `f` over the grid nodes inside `q` (the essential-infimum surrogate).
pub fn cube_min(f: &ScalarField, q: &Cube) -> Result<f64> {
    let grid = f.grid();
    let range = grid.node_range(q).ok_or(Error::EmptyCubeSample)?;
    let mut m = f64::INFINITY;
    grid.for_each_in_range(&range, |i| m = m.min(f.get(i)));
    Ok(m)
}

/// Candidate cube centered at node `center` on ladder level `level`.
pub fn family_cube(f: &ScalarField, center: usize, level: usize) -> Cube {
    let grid = f.grid();
    Cube {
        center: grid.node(center),
        half_side: CubeFamily::half_side(level, grid.spacing()),
    }
}

/// `M[g]` over the full node-centered family.
pub fn hl_maximal(g: &ScalarField) -> ScalarField {
    hl_maximal_with(g, &CubeFamily::full(g.grid()))
}

/// `M[g](x) = max { avg_Q |g| : Q in family, x in Q }`.
///
/// For a fixed level the cubes containing `x` are exactly those centered in
/// the window of the same radius around `x`, so each level is a window
/// average followed by a sliding maximum.
pub fn hl_maximal_with(g: &ScalarField, family: &CubeFamily) -> ScalarField {
    let grid = g.grid();
    let ext = grid.extents().to_vec();
    let abs: Vec<f64> = g.values().iter().map(|v| v.abs()).collect();
    let sums = PrefixSums::new(&ext, &abs);
    let out = family
        .levels()
        .par_iter()
        .map(|&k| {
            let avg = window_averages(&ext, &sums, k);
            sliding_extreme(&ext, &avg, k, Extreme::Max)
        })
        .reduce(
            || abs.clone(),
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        );
    ScalarField::from_parts_unchecked(grid.clone(), out)
}

/// Estimated A1 constant of a weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    /// `max avg_Q w / min_Q w` over the family; `+inf` when some cube has a
    /// zero node but positive mass.
    pub norm_estimate: f64,
    pub worst_cube: Cube,
    pub cube_count: usize,
    /// False when the weight is "not A1 at resolution".
    pub finite: bool,
}

pub fn a1_norm(w: &WeightField) -> A1Report {
    a1_norm_with(w, &CubeFamily::full(w.grid()))
}

pub fn a1_norm_with(w: &WeightField, family: &CubeFamily) -> A1Report {
    let grid = w.grid();
    let ext = grid.extents().to_vec();
    let vals = w.values();
    let sums = PrefixSums::new(&ext, vals);
    // (ratio, level, center); ties resolved toward the smallest level and center.
    let best = family
        .levels()
        .par_iter()
        .map(|&k| {
            let avg = window_averages(&ext, &sums, k);
            let min = sliding_extreme(&ext, vals, k, Extreme::Min);
            let mut best = (f64::NEG_INFINITY, k, 0usize);
            for (c, (a, m)) in avg.iter().zip(&min).enumerate() {
                let r = a1_ratio(*a, *m);
                if r > best.0 {
                    best = (r, k, c);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                    b
                } else {
                    a
                }
            },
        );
    let (norm, level, center) = best;
    A1Report {
        norm_estimate: norm.max(1.0),
        worst_cube: family_cube(w.field(), center, level),
        cube_count: family.levels().len() * grid.len(),
        finite: norm.is_finite(),
    }
}

fn a1_ratio(avg: f64, min: f64) -> f64 {
    if min > 0.0 {
        avg / min
    } else if avg > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Whether `avg(w,K) <= ||w||_A1 avg(w,Q)` for nested cubes `Q ⊆ K`.
pub fn monotone_cube_bound_check(w: &WeightField, q: &Cube, k: &Cube) -> Result<bool> {
    let report = a1_norm(w);
    monotone_cube_bound_check_with(w, q, k, report.norm_estimate)
}

/// As [`monotone_cube_bound_check`] with a precomputed A1 constant.
pub fn monotone_cube_bound_check_with(
    w: &WeightField,
    q: &Cube,
    k: &Cube,
    a1: f64,
) -> Result<bool> {
    if !k.contains_cube(q) {
        return Err(Error::NotNested {
            inner: q.to_string(),
            outer: k.to_string(),
        });
    }
    let avg_k = cube_average(w.field(), k)?;
    let avg_q = cube_average(w.field(), q)?;
    Ok(avg_k <= a1 * avg_q * (1.0 + 1e-12))
}

/// `M[g]^theta`, an A1 weight for `0 < theta < 1`.
pub fn coifman_rochberg(g: &ScalarField, theta: f64) -> Result<WeightField> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta", format!("{theta} is not in (0, 1)")));
    }
    let m = hl_maximal(g);
    WeightField::new(m.map(|v| v.powf(theta))?)
}
