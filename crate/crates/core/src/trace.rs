//! Trace-norm functionals: the sharp maximal functions of a function or a jet
//! on a finite set, their `L_p` integrals, the packing sums of the
//! variational criteria, and one-dimensional divided differences.
//!
//! Every supremum over points of `E` is an exact finite maximum. Suprema over
//! cube packings are randomized searches and report lower bounds.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::extension::JetField;
use crate::geometry::{sup_dist, Cube, PointSet};
use crate::grid::{Grid, ScalarField};
use crate::poly::{Basis, MultiIndex};

/// Dilation applied to packing cubes before testing pair membership.
pub const PACKING_DILATION: f64 = 1e4;

/// Exhaustive subset searches are used up to this many points.
pub const EXHAUSTIVE_LIMIT: usize = 25;

/// `f#(x) = max_{y,z in E} |f(y) - f(z)| / (||x-y|| + ||x-z||)`.
pub fn sharp_max_function(f: &[f64], e: &PointSet, x: &[f64]) -> Result<f64> {
    if f.len() != e.len() {
        return Err(Error::MismatchedSets);
    }
    if x.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: x.len(),
        });
    }
    let d: Vec<f64> = e.points().iter().map(|y| sup_dist(x, y)).collect();
    Ok(pair_max(f, &d))
}

fn pair_max(f: &[f64], d: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let num = (f[i] - f[j]).abs();
            if num > 0.0 {
                best = best.max(num / (d[i] + d[j]));
            }
        }
    }
    best
}

/// A sharp field on a grid and its `L_p` norm over a truncation box.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceReport {
    pub sharp_field: ScalarField,
    /// `(int_box sharp^p)^{1/p}` by the midpoint rule over grid nodes in the box.
    pub functional_value: f64,
    pub p: f64,
    pub truncation_box: Cube,
    /// Upper bound for `int_{outside box} sharp^p` (infinite if `E` touches the box faces).
    pub tail_bound: f64,
    /// Per-`beta` norms for jets (empty for scalar data).
    pub per_beta: Vec<(MultiIndex, f64)>,
    /// Sum of the per-`beta` norms; equals `functional_value` for scalar data.
    pub summed_norms: f64,
}

/// JSON summary of a trace computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub functional: String,
    pub value: f64,
    pub tail_bound: f64,
    pub corpus_id: Option<String>,
    pub seed: Option<u64>,
}

impl TraceReport {
    /// The functional recomputed from `sharp_field`.
    pub fn recompute(&self) -> f64 {
        box_lp_norm(&self.sharp_field, self.p, &self.truncation_box)
    }

    /// `(I^p + tail)^{1/p}`: an upper bound for the untruncated integral.
    pub fn upper_bound(&self) -> f64 {
        (self.functional_value.powf(self.p) + self.tail_bound).powf(1.0 / self.p)
    }

    pub fn summary(
        &self,
        functional: &str,
        corpus_id: Option<String>,
        seed: Option<u64>,
    ) -> TraceSummary {
        TraceSummary {
            functional: functional.to_string(),
            value: self.functional_value,
            tail_bound: self.tail_bound,
            corpus_id,
            seed,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.sharp_field.write_csv(path)
    }
}

impl TraceSummary {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Midpoint-rule `L_p` norm of `g` over the grid nodes in `bx`.
pub fn box_lp_norm(g: &ScalarField, p: f64, bx: &Cube) -> f64 {
    let grid = g.grid();
    let Some(range) = grid.node_range(bx) else {
        return 0.0;
    };
    let mut s = 0.0;
    grid.for_each_in_range(&range, |i| s += g.get(i).powf(p));
    (s * grid.cell_volume()).powf(1.0 / p)
}

fn check_trace_exponent(p: f64, n: usize) -> Result<()> {
    if !(p > n as f64 && p.is_finite()) {
        return Err(invalid("p", format!("{p} must exceed the dimension {n}")));
    }
    Ok(())
}

/// Bound for `int_{||x-c|| > B} (osc / (2 (||x-c|| - b)^k))^p dx` where `E` lies
/// in the ball of radius `b < B` about the box center `c`.
fn tail_term(osc: f64, k: usize, p: f64, n: usize, bx: &Cube, e: &PointSet) -> f64 {
    if osc == 0.0 {
        return 0.0;
    }
    let b = e
        .points()
        .iter()
        .map(|y| sup_dist(y, &bx.center))
        .fold(0.0, f64::max);
    let big = bx.half_side;
    if b >= big {
        return f64::INFINITY;
    }
    let kp = k as f64 * p;
    let nf = n as f64;
    (0.5 * osc).powf(p)
        * nf
        * 2f64.powi(n as i32)
        * (big / (big - b)).powf(nf - 1.0)
        * (big - b).powf(nf - kp)
        / (kp - nf)
}

/// `I_p(f; E) = (int_box (f#)^p)^{1/p}`.
pub fn trace_norm_l1p(
    f: &[f64],
    e: &PointSet,
    p: f64,
    bx: &Cube,
    grid: &Grid,
) -> Result<TraceReport> {
    let n = e.dim();
    check_trace_exponent(p, n)?;
    if f.len() != e.len() {
        return Err(Error::MismatchedSets);
    }
    if grid.dim() != n || bx.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grid.dim(),
        });
    }
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let d: Vec<f64> = e.points().iter().map(|y| sup_dist(&x, y)).collect();
            pair_max(f, &d)
        })
        .collect();
    let sharp = ScalarField::new(grid.clone(), values)?;
    let value = box_lp_norm(&sharp, p, bx);
    let osc = f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - f.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TraceReport {
        sharp_field: sharp,
        functional_value: value,
        p,
        truncation_box: bx.clone(),
        tail_bound: tail_term(osc, 1, p, n, bx, e),
        per_beta: Vec::new(),
        summed_norms: value,
    })
}

/// Pair numerators `|D^beta P_y(y) - D^beta P_z(y)|` of a jet, for every `|beta| <= m-1`.
#[derive(Clone, Debug)]
pub struct JetSharp {
    points: Vec<Vec<f64>>,
    betas: Vec<MultiIndex>,
    /// `numerators[b][y * len + z]`.
    numerators: Vec<Vec<f64>>,
    m: usize,
}

impl JetSharp {
    pub fn new(jet: &JetField) -> Self {
        let pts = jet.points().points().to_vec();
        let len = pts.len();
        let basis = Basis::get(jet.points().dim(), jet.m() - 1);
        let betas = basis.indices().to_vec();
        let numerators = betas
            .par_iter()
            .map(|beta| {
                let mut out = vec![0.0; len * len];
                for y in 0..len {
                    let own = jet.poly(y).derivative_at(beta, &pts[y]);
                    for z in 0..len {
                        if z != y {
                            out[y * len + z] =
                                (own - jet.poly(z).derivative_at(beta, &pts[y])).abs();
                        }
                    }
                }
                out
            })
            .collect();
        Self {
            points: pts,
            betas,
            numerators,
            m: jet.m(),
        }
    }

    pub fn betas(&self) -> &[MultiIndex] {
        &self.betas
    }

    /// Largest numerator for each `beta`.
    pub fn oscillations(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|v| v.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// The per-`beta` suprema at `x`.
    pub fn per_beta(&self, x: &[f64]) -> Vec<f64> {
        let len = self.points.len();
        let d: Vec<f64> = self.points.iter().map(|y| sup_dist(x, y)).collect();
        self.betas
            .iter()
            .zip(&self.numerators)
            .map(|(beta, num)| {
                let k = (self.m - beta.iter().sum::<usize>()) as i32;
                let dk: Vec<f64> = d.iter().map(|v| v.powi(k)).collect();
                let mut best: f64 = 0.0;
                for y in 0..len {
                    for z in 0..len {
                        let v = num[y * len + z];
                        if v > 0.0 {
                            best = best.max(v / (dk[y] + dk[z]));
                        }
                    }
                }
                best
            })
            .collect()
    }

    /// `J#_E(x)`, the sum of [`JetSharp::per_beta`].
    pub fn value(&self, x: &[f64]) -> f64 {
        self.per_beta(x).iter().sum()
    }
}

pub fn jet_sharp_max(jet: &JetField, x: &[f64]) -> f64 {
    JetSharp::new(jet).value(x)
}

/// The jet trace functional. `functional_value` integrates `J#_E`;
/// `summed_norms` adds the per-`beta` norms. The two agree up to the number of
/// multi-indices in either direction.
pub fn jet_trace_norm(jet: &JetField, p: f64, bx: &Cube, grid: &Grid) -> Result<TraceReport> {
    let n = jet.points().dim();
    check_trace_exponent(p, n)?;
    if grid.dim() != n || bx.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grid.dim(),
        });
    }
    let js = JetSharp::new(jet);
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| js.per_beta(&grid.node(i)))
        .collect();
    let nb = js.betas().len();
    let total: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let sharp = ScalarField::new(grid.clone(), total)?;
    let per_beta = (0..nb)
        .map(|b| {
            let field = ScalarField::from_parts_unchecked(
                grid.clone(),
                rows.iter().map(|r| r[b]).collect(),
            );
            (js.betas()[b].clone(), box_lp_norm(&field, p, bx))
        })
        .collect::<Vec<_>>();
    let summed = per_beta.iter().map(|(_, v)| v).sum();
    // (sum_b J_b)^p <= nb^{p-1} sum_b J_b^p
    let tail: f64 = js
        .betas()
        .iter()
        .zip(js.oscillations())
        .map(|(beta, osc)| {
            tail_term(
                osc,
                jet.m() - beta.iter().sum::<usize>(),
                p,
                n,
                bx,
                jet.points(),
            )
        })
        .sum::<f64>()
        * (nb as f64).powf(p - 1.0);
    Ok(TraceReport {
        functional_value: box_lp_norm(&sharp, p, bx),
        sharp_field: sharp,
        p,
        truncation_box: bx.clone(),
        tail_bound: tail,
        per_beta,
        summed_norms: summed,
    })
}

fn check_disjoint(cubes: &[Cube]) -> Result<()> {
    for i in 0..cubes.len() {
        for j in i + 1..cubes.len() {
            if cubes[i].interiors_overlap(&cubes[j]) {
                return Err(Error::Overlap(i, j));
            }
        }
    }
    Ok(())
}

/// `sum_i |D^beta P_{x_i}(x_i) - D^beta P_{y_i}(x_i)|^p / (diam Q_i)^{(m-|beta|)p - n}`
/// for disjoint cubes `Q_i` with `x_i, y_i` points of `E` in `PACKING_DILATION * Q_i`.
pub fn variational_sum(
    jet: &JetField,
    cubes: &[Cube],
    pairs: &[(Vec<f64>, Vec<f64>)],
    beta: &[usize],
    p: f64,
) -> Result<f64> {
    if cubes.len() != pairs.len() {
        return Err(Error::MismatchedSets);
    }
    let order: usize = beta.iter().sum();
    if order + 1 > jet.m() {
        return Err(invalid(
            "beta",
            format!("|beta| = {order} must be at most m - 1"),
        ));
    }
    check_disjoint(cubes)?;
    let n = jet.points().dim() as f64;
    let expo = (jet.m() - order) as f64 * p - n;
    let mut total = 0.0;
    for (i, (q, (x, y))) in cubes.iter().zip(pairs).enumerate() {
        let big = q.dilate(PACKING_DILATION);
        if !big.contains_point(x) || !big.contains_point(y) {
            return Err(Error::PairOutside(i));
        }
        let ix = jet.points().index_of(x).ok_or(Error::PairOutside(i))?;
        let iy = jet.points().index_of(y).ok_or(Error::PairOutside(i))?;
        let num = (jet.poly(ix).derivative_at(beta, x) - jet.poly(iy).derivative_at(beta, x)).abs();
        if num > 0.0 {
            total += num.powf(p) / q.diam().powf(expo);
        }
    }
    Ok(total)
}

/// Best packing found by a randomized search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingSearch {
    pub value: f64,
    pub cubes: Vec<Cube>,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub trials: usize,
    pub seed: u64,
}

/// Randomized lower bound for the supremum of [`variational_sum`] over packings.
///
/// Each pair `(x, y)` gets the smallest admissible cube, centered at the
/// midpoint and scaled by a random factor; pairs are added greedily (in
/// decreasing term order first, then in random orders) while cubes stay disjoint.
pub fn variational_search(
    jet: &JetField,
    beta: &[usize],
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<PackingSearch> {
    let order: usize = beta.iter().sum();
    if order + 1 > jet.m() {
        return Err(invalid(
            "beta",
            format!("|beta| = {order} must be at most m - 1"),
        ));
    }
    let pts = jet.points().points();
    let n = jet.points().dim();
    let expo = (jet.m() - order) as f64 * p - n as f64;
    let mut candidates = Vec::new();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            let num = (jet.poly(i).derivative_at(beta, &pts[i])
                - jet.poly(j).derivative_at(beta, &pts[i]))
            .abs();
            if num > 0.0 {
                candidates.push((i, j, num));
            }
        }
    }
    let cube_for = |i: usize, j: usize, scale: f64| {
        let center: Vec<f64> = pts[i]
            .iter()
            .zip(&pts[j])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let r = sup_dist(&pts[i], &pts[j]) / (2.0 * PACKING_DILATION) * (1.0 + 1e-9) * scale;
        Cube {
            center,
            half_side: r,
        }
    };
    let pack = |order: &[(usize, usize, f64)], scales: &[f64]| {
        let mut cubes: Vec<Cube> = Vec::new();
        let mut pairs = Vec::new();
        let mut value = 0.0;
        for (t, &(i, j, num)) in order.iter().enumerate() {
            let q = cube_for(i, j, scales[t]);
            if cubes.iter().any(|c| c.interiors_overlap(&q)) {
                continue;
            }
            value += num.powf(p) / q.diam().powf(expo);
            cubes.push(q);
            pairs.push((pts[i].clone(), pts[j].clone()));
        }
        (value, cubes, pairs)
    };
    let mut sorted = candidates.clone();
    sorted.sort_by(|a, b| {
        let ta = a.2.powf(p) / cube_for(a.0, a.1, 1.0).diam().powf(expo);
        let tb = b.2.powf(p) / cube_for(b.0, b.1, 1.0).diam().powf(expo);
        tb.total_cmp(&ta)
    });
    let mut best = pack(&sorted, &vec![1.0; sorted.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let mut order = candidates.clone();
        order.shuffle(&mut rng);
        let scales: Vec<f64> = (0..order.len())
            .map(|_| 10f64.powf(rng.gen_range(0.0..2.0)))
            .collect();
        let got = pack(&order, &scales);
        if got.0 > best.0 {
            best = got;
        }
    }
    Ok(PackingSearch {
        value: best.0,
        cubes: best.1,
        pairs: best.2,
        trials,
        seed,
    })
}

/// `sum_i |G(x_i) - G(y_i)|^p / (diam Q_i)^{p-n}` over disjoint equal cubes with
/// grid nodes `x_i, y_i` in `Q_i`.
pub fn brudnyi_sum(
    g: &ScalarField,
    cubes: &[Cube],
    pairs: &[(Vec<f64>, Vec<f64>)],
    p: f64,
) -> Result<f64> {
    let grid = g.grid();
    check_trace_exponent(p, grid.dim())?;
    if cubes.len() != pairs.len() {
        return Err(Error::MismatchedSets);
    }
    if let Some(first) = cubes.first() {
        if let Some(i) = cubes
            .iter()
            .position(|q| (q.half_side - first.half_side).abs() > 1e-12 * first.half_side)
        {
            return Err(Error::UnequalCubes(i));
        }
    }
    check_disjoint(cubes)?;
    let tol = 1e-9 * grid.spacing();
    let mut total = 0.0;
    for (i, (q, (x, y))) in cubes.iter().zip(pairs).enumerate() {
        if !q.contains_point_tol(x, tol) || !q.contains_point_tol(y, tol) {
            return Err(Error::PairOutside(i));
        }
        let a = grid.node_at(x).ok_or_else(|| Error::NotANode(x.clone()))?;
        let b = grid.node_at(y).ok_or_else(|| Error::NotANode(y.clone()))?;
        let num = (g.get(a) - g.get(b)).abs();
        if num > 0.0 {
            total += num.powf(p) / q.diam().powf(p - grid.dim() as f64);
        }
    }
    Ok(total)
}

/// Randomized lower bound for the supremum of [`brudnyi_sum`].
///
/// Each trial tiles the grid with equal node-aligned cubes of random width and
/// offset, neighbors sharing a face, and pairs the extreme nodes of each cube.
pub fn brudnyi_search(g: &ScalarField, p: f64, trials: usize, seed: u64) -> Result<PackingSearch> {
    let grid = g.grid();
    let n = grid.dim();
    check_trace_exponent(p, n)?;
    let shortest = grid.extents().iter().copied().min().unwrap_or(0);
    if shortest < 2 {
        return Err(Error::GridTooSmall {
            needed: 2,
            have: shortest,
        });
    }
    let mut widths = vec![2usize];
    while widths.last().unwrap() * 2 - 1 <= shortest {
        let w = widths.last().unwrap() * 2 - 1;
        widths.push(w);
    }
    let s = grid.spacing();
    let tile = |w: usize, offset: &[usize]| {
        let step = w - 1;
        let starts: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                (offset[a]..)
                    .step_by(step)
                    .take_while(|&st| st + step < grid.extents()[a])
                    .collect()
            })
            .collect();
        let mut value = 0.0;
        let mut cubes = Vec::new();
        let mut pairs = Vec::new();
        if starts.iter().any(|v| v.is_empty()) {
            return (value, cubes, pairs);
        }
        let mut pos = vec![0usize; n];
        'outer: loop {
            let range: Vec<(usize, usize)> = (0..n)
                .map(|a| (starts[a][pos[a]], starts[a][pos[a]] + step))
                .collect();
            let (mut lo, mut hi) = ((f64::INFINITY, 0), (f64::NEG_INFINITY, 0));
            grid.for_each_in_range(&range, |i| {
                let v = g.get(i);
                if v < lo.0 {
                    lo = (v, i);
                }
                if v > hi.0 {
                    hi = (v, i);
                }
            });
            let center: Vec<f64> = (0..n)
                .map(|a| grid.origin()[a] + (range[a].0 as f64 + 0.5 * step as f64) * s)
                .collect();
            let q = Cube {
                center,
                half_side: 0.5 * step as f64 * s,
            };
            let num = hi.0 - lo.0;
            if num > 0.0 {
                value += num.powf(p) / q.diam().powf(p - n as f64);
            }
            cubes.push(q);
            pairs.push((grid.node(hi.1), grid.node(lo.1)));
            for a in (0..n).rev() {
                if pos[a] + 1 < starts[a].len() {
                    pos[a] += 1;
                    continue 'outer;
                }
                pos[a] = 0;
            }
            break;
        }
        (value, cubes, pairs)
    };
    let mut best = tile(2, &vec![0; n]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let w = widths[rng.gen_range(0..widths.len())];
        let offset: Vec<usize> = (0..n).map(|_| rng.gen_range(0..w - 1)).collect();
        let got = tile(w, &offset);
        if got.0 > best.0 {
            best = got;
        }
    }
    Ok(PackingSearch {
        value: best.0,
        cubes: best.1,
        pairs: best.2,
        trials,
        seed,
    })
}

fn check_distinct(s: &[f64]) -> Result<()> {
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if s[i] == s[j] {
                return Err(Error::DuplicatePoints);
            }
        }
    }
    Ok(())
}

/// `Delta^m f[S]` by the Newton recurrence, `m = |S| - 1`; `values[i] = f(s[i])`.
pub fn divided_difference(values: &[f64], s: &[f64]) -> Result<f64> {
    if values.len() != s.len() {
        return Err(Error::MismatchedSets);
    }
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    check_distinct(s)?;
    let mut col = values.to_vec();
    for k in 1..s.len() {
        for i in 0..s.len() - k {
            col[i] = (col[i + 1] - col[i]) / (s[i + k] - s[i]);
        }
    }
    Ok(col[0])
}

/// `sum_i f(x_i) / omega_S'(x_i)` with `omega_S(x) = prod_j (x - x_j)`.
pub fn divided_difference_symmetric(values: &[f64], s: &[f64]) -> Result<f64> {
    if values.len() != s.len() {
        return Err(Error::MismatchedSets);
    }
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    check_distinct(s)?;
    Ok((0..s.len())
        .map(|i| {
            let w: f64 = (0..s.len())
                .filter(|&j| j != i)
                .map(|j| s[i] - s[j])
                .product();
            values[i] / w
        })
        .sum())
}

/// Divided differences of every order `k <= m` over consecutive windows of sorted `E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DividedDifferenceTable {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub m: usize,
    /// `table[k][i] = Delta^k f[x_i, ..., x_{i+k}]`.
    pub table: Vec<Vec<f64>>,
}

impl DividedDifferenceTable {
    pub fn new(points: &[f64], values: &[f64], m: usize) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::MismatchedSets);
        }
        if points.len() <= m {
            return Err(invalid(
                "E",
                format!("needs more than m = {m} points, has {}", points.len()),
            ));
        }
        check_distinct(points)?;
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let xs: Vec<f64> = order.iter().map(|&i| points[i]).collect();
        let fs: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let mut table = vec![fs.clone()];
        for k in 1..=m {
            let prev = &table[k - 1];
            let next: Vec<f64> = (0..xs.len() - k)
                .map(|i| (prev[i + 1] - prev[i]) / (xs[i + k] - xs[i]))
                .collect();
            table.push(next);
        }
        Ok(Self {
            points: xs,
            values: fs,
            m,
            table,
        })
    }

    /// `Delta^{|idx|-1} f` on the sorted points with the given indices.
    pub fn subset(&self, idx: &[usize]) -> Result<f64> {
        let s: Vec<f64> = idx.iter().map(|&i| self.points[i]).collect();
        let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
        divided_difference(&v, &s)
    }

    /// Largest `|Delta^m f|` over consecutive windows.
    pub fn max_window(&self) -> f64 {
        self.table[self.m]
            .iter()
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows `k, i, x_i, x_{i+k}, value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("k,i,x_first,x_last,value\n");
        for (k, row) in self.table.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{k},{i},{},{},{v}\n",
                    self.points[i],
                    self.points[i + k]
                ));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Calls `visit` with every increasing `k`-subset of `0..len`.
fn for_each_subset(len: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut t = k;
        while t > 0 && idx[t - 1] == len - k + t - 1 {
            t -= 1;
        }
        if t == 0 {
            return;
        }
        idx[t - 1] += 1;
        for u in t..k {
            idx[u] = idx[u - 1] + 1;
        }
    }
}

/// `sup |Delta^m f[S]|` over `(m+1)`-subsets of `E`, with the search used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetSup {
    /// Exact maximum over all subsets (only for small `E`).
    pub exhaustive: Option<f64>,
    /// Maximum over consecutive windows of sorted `E`.
    pub windows: f64,
    /// Maximum over random subsets (only for large `E`).
    pub random: Option<f64>,
}

impl SubsetSup {
    pub fn value(&self) -> f64 {
        self.exhaustive
            .unwrap_or(self.windows)
            .max(self.windows)
            .max(self.random.unwrap_or(0.0))
    }
}

/// `sup_{S subset E, #S = m+1} |Delta^m f[S]|`.
pub fn trace_1d_linf(values: &[f64], e: &[f64], m: usize, seed: u64) -> Result<SubsetSup> {
    let table = DividedDifferenceTable::new(e, values, m)?;
    let windows = table.max_window();
    let len = e.len();
    if len <= EXHAUSTIVE_LIMIT {
        let mut best: f64 = 0.0;
        let mut s = vec![0.0; m + 1];
        let mut v = vec![0.0; m + 1];
        for_each_subset(len, m + 1, |idx| {
            for (t, &i) in idx.iter().enumerate() {
                s[t] = table.points[i];
                v[t] = table.values[i];
            }
            if let Ok(d) = divided_difference(&v, &s) {
                best = best.max(d.abs());
            }
        });
        return Ok(SubsetSup {
            exhaustive: Some(best),
            windows,
            random: None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..len).collect();
    let mut best: f64 = 0.0;
    for _ in 0..20_000 {
        let mut idx: Vec<usize> = all.choose_multiple(&mut rng, m + 1).copied().collect();
        idx.sort_unstable();
        best = best.max(table.subset(&idx)?.abs());
    }
    Ok(SubsetSup {
        exhaustive: None,
        windows,
        random: Some(best),
    })
}

/// The two integral forms of the one-dimensional trace norm:
/// `sup_S (|Delta^m f[S]| diam S / diam({x} u S))^p` and
/// `sup |Delta^{m-1} f[x_0..x_{m-1}] - Delta^{m-1} f[x_1..x_m]|^p / (|x-x_0|^p + |x-x_m|^p)`,
/// each integrated over the grid nodes in `bx` and raised to `1/p`.
pub fn trace_1d_lp(
    values: &[f64],
    e: &[f64],
    m: usize,
    p: f64,
    bx: &Cube,
    grid: &Grid,
) -> Result<(f64, f64)> {
    if grid.dim() != 1 || bx.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.dim(),
        });
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("{p} must exceed 1")));
    }
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    if e.len() > EXHAUSTIVE_LIMIT {
        return Err(invalid(
            "E",
            format!("at most {EXHAUSTIVE_LIMIT} points for exact subset sups"),
        ));
    }
    let table = DividedDifferenceTable::new(e, values, m)?;
    // (first point, last point, |Delta^{m-1} difference| = |Delta^m f[S]| diam S)
    let mut subsets = Vec::new();
    for_each_subset(e.len(), m + 1, |idx| {
        let lo = table.points[idx[0]];
        let hi = table.points[idx[m]];
        let head = table.subset(&idx[..m]).unwrap_or(0.0);
        let tail = table.subset(&idx[1..]).unwrap_or(0.0);
        let num = (head - tail).abs();
        if num > 0.0 {
            subsets.push((lo, hi, num));
        }
    });
    let rows: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i)[0];
            let mut a: f64 = 0.0;
            let mut b: f64 = 0.0;
            for &(lo, hi, num) in &subsets {
                let diam = (hi.max(x) - lo.min(x)).max(hi - lo);
                a = a.max((num / diam).powf(p));
                b = b.max(num.powf(p) / ((x - lo).abs().powf(p) + (x - hi).abs().powf(p)));
            }
            (a, b)
        })
        .collect();
    let first = ScalarField::from_parts_unchecked(grid.clone(), rows.iter().map(|r| r.0).collect());
    let second =
        ScalarField::from_parts_unchecked(grid.clone(), rows.iter().map(|r| r.1).collect());
    Ok((
        box_lp_norm(&first, 1.0, bx).powf(1.0 / p),
        box_lp_norm(&second, 1.0, bx).powf(1.0 / p),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    fn two_points() -> PointSet {
        PointSet::new(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn sharp_function_by_hand() {
        let e = two_points();
        assert_eq!(sharp_max_function(&[0.0, 1.0], &e, &[0.5]).unwrap(), 1.0);
        assert!((sharp_max_function(&[0.0, 1.0], &e, &[2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sharp_max_function(&[4.0, 4.0], &e, &[0.3]).unwrap(), 0.0);
        let single = PointSet::new(vec![vec![0.2]]).unwrap();
        assert_eq!(sharp_max_function(&[1.0], &single, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn two_point_trace_norm_matches_closed_form() {
        // f# = 1 on [0,1] and 1/(2|x - 1/2|) outside; int_{-B}^{B} f#^2 = 2 - 1/(2(2B-1)) - 1/(2(2B+1)).
        let big = 8.0;
        let bx = Cube::new(vec![0.0], big).unwrap();
        let grid = Grid::cell_centered(&bx, 16_000).unwrap();
        let r = trace_norm_l1p(&[0.0, 1.0], &two_points(), 2.0, &bx, &grid).unwrap();
        let exact = 2.0 - 0.5 / (2.0 * big - 1.0) - 0.5 / (2.0 * big + 1.0);
        assert!((r.functional_value.powi(2) - exact).abs() < 1e-3);
        assert_eq!(r.recompute(), r.functional_value);
        let outside = 0.5 / (2.0 * big - 1.0) + 0.5 / (2.0 * big + 1.0);
        assert!(r.tail_bound >= outside);
        let scaled = trace_norm_l1p(&[0.0, -3.0], &two_points(), 2.0, &bx, &grid).unwrap();
        assert!((scaled.functional_value - 3.0 * r.functional_value).abs() < 1e-12);
        assert!(trace_norm_l1p(&[0.0, 1.0], &two_points(), 1.0, &bx, &grid).is_err());
    }

    #[test]
    fn jet_sharp_reduces_to_scalar_for_first_order() {
        let e = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![-0.4, 0.7]]).unwrap();
        let f = [0.3, -1.0, 2.0];
        let polys = e
            .points()
            .iter()
            .zip(f)
            .map(|(x, v)| Polynomial::from_coeffs(x.clone(), 0, vec![v]).unwrap())
            .collect();
        let jet = JetField::new(1, e.clone(), polys).unwrap();
        for x in [[0.1, 0.1], [2.0, -1.0], [0.0, 0.0]] {
            let a = jet_sharp_max(&jet, &x);
            let b = sharp_max_function(&f, &e, &x).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_second_order_jet_by_hand() {
        // P_0 = 0, P_1(t) = t - 1. beta = 0: |P_y(y) - P_z(y)| = |0 - (-1)| = 1 for (y,z) = (0,1)
        // and |0 - 0| = 0 for (1,0). beta = 1: |0 - 1| = 1 both ways.
        let e = two_points();
        let polys = vec![
            Polynomial::from_coeffs(vec![0.0], 1, vec![0.0, 0.0]).unwrap(),
            Polynomial::from_coeffs(vec![1.0], 1, vec![0.0, 1.0]).unwrap(),
        ];
        let jet = JetField::new(2, e, polys).unwrap();
        // At x = 1/2: beta = 0 gives 1/(1/4 + 1/4) = 2, beta = 1 gives 1/(1/2 + 1/2) = 1.
        assert!((jet_sharp_max(&jet, &[0.5]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn compatible_jet_has_zero_trace() {
        // Dyadic data keeps every Taylor coefficient exact, so numerators vanish exactly.
        let e = PointSet::new(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
        let p = Polynomial::from_coeffs(vec![0.0], 2, vec![1.0, -2.0, 0.5]).unwrap();
        let jet = JetField::from_polynomial(&p, &e, 3).unwrap();
        let bx = Cube::new(vec![0.5], 2.0).unwrap();
        let grid = Grid::cell_centered(&bx, 64).unwrap();
        let r = jet_trace_norm(&jet, 2.0, &bx, &grid).unwrap();
        assert!(r.functional_value < 1e-12);
        let s = variational_search(&jet, &[0], 2.0, 5, 1).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn per_beta_norms_bracket_the_integrand_norm() {
        let e = two_points();
        let polys = vec![
            Polynomial::from_coeffs(vec![0.0], 1, vec![0.0, 0.3]).unwrap(),
            Polynomial::from_coeffs(vec![1.0], 1, vec![1.0, -0.5]).unwrap(),
        ];
        let jet = JetField::new(2, e, polys).unwrap();
        let bx = Cube::new(vec![0.5], 3.0).unwrap();
        let grid = Grid::cell_centered(&bx, 600).unwrap();
        let r = jet_trace_norm(&jet, 3.0, &bx, &grid).unwrap();
        let nb = r.per_beta.len() as f64;
        assert!(r.functional_value <= r.summed_norms * (1.0 + 1e-12));
        assert!(r.summed_norms <= nb * r.functional_value * (1.0 + 1e-12));
        assert!(r.tail_bound.is_finite());
    }

    #[test]
    fn variational_sum_single_cube() {
        let e = two_points();
        let polys = vec![
            Polynomial::from_coeffs(vec![0.0], 0, vec![0.0]).unwrap(),
            Polynomial::from_coeffs(vec![1.0], 0, vec![2.0]).unwrap(),
        ];
        let jet = JetField::new(1, e, polys).unwrap();
        let q = Cube::new(vec![0.5], 0.001).unwrap();
        let pair = (vec![0.0], vec![1.0]);
        // |0 - 2|^2 / (0.002)^{2 - 1}
        let v = variational_sum(&jet, std::slice::from_ref(&q), std::slice::from_ref(&pair), &[0], 2.0).unwrap();
        assert!((v - 4.0 / 0.002).abs() < 1e-9);
        let tiny = Cube::new(vec![0.5], 1e-6).unwrap();
        assert!(matches!(
            variational_sum(&jet, &[tiny], std::slice::from_ref(&pair), &[0], 2.0),
            Err(Error::PairOutside(0))
        ));
        assert!(matches!(
            variational_sum(&jet, &[q.clone(), q], &[pair.clone(), pair], &[0], 2.0),
            Err(Error::Overlap(0, 1))
        ));
    }

    #[test]
    fn brudnyi_sum_for_identity() {
        let g = Grid::new(vec![0.0], 0.125, vec![9]).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0]).unwrap();
        let cubes: Vec<Cube> = (0..4)
            .map(|i| Cube::new(vec![0.125 + 0.25 * i as f64], 0.125).unwrap())
            .collect();
        let pairs: Vec<_> = (0..4)
            .map(|i| (vec![0.25 * i as f64], vec![0.25 * (i + 1) as f64]))
            .collect();
        let v = brudnyi_sum(&f, &cubes, &pairs, 2.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let w = brudnyi_sum(&f.scale(3.0), &cubes, &pairs, 2.0).unwrap();
        assert!((w - 9.0).abs() < 1e-12);
        let mut uneven = cubes.clone();
        uneven[2] = Cube::new(vec![0.625], 0.1).unwrap();
        assert!(matches!(
            brudnyi_sum(&f, &uneven, &pairs, 2.0),
            Err(Error::UnequalCubes(2))
        ));
        let search = brudnyi_search(&f, 2.0, 20, 42).unwrap();
        assert!((search.value - 1.0).abs() < 1e-12);
        let c = ScalarField::constant(&g, 1.0).unwrap();
        assert_eq!(brudnyi_search(&c, 2.0, 5, 42).unwrap().value, 0.0);
    }

    #[test]
    fn divided_difference_formulas_agree() {
        let s = [0.0, 0.5, 1.0];
        let v: Vec<f64> = s.iter().map(|x: &f64| x.exp()).collect();
        let a = divided_difference(&v, &s).unwrap();
        let b = divided_difference_symmetric(&v, &s).unwrap();
        assert!((a - b).abs() < 1e-12);
        let cubes = [-1.0, 0.3, 2.0, 2.5];
        let v: Vec<f64> = cubes.iter().map(|x: &f64| x.powi(3)).collect();
        assert!((divided_difference(&v, &cubes).unwrap() - 1.0).abs() < 1e-12);
        assert!(divided_difference(&[1.0, 2.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn linf_trace_of_absolute_value() {
        let e = [-1.0, 0.0, 1.0];
        let v = [1.0, 0.0, 1.0];
        let r = trace_1d_linf(&v, &e, 2, 0).unwrap();
        assert_eq!(r.value(), 1.0);
        assert_eq!(r.exhaustive, Some(1.0));
        assert!(trace_1d_linf(&v, &e, 3, 0).is_err());
    }

    #[test]
    fn lp_forms_vanish_below_degree() {
        let e = [0.0, 0.3, 0.7, 1.0];
        let v: Vec<f64> = e.iter().map(|x| 2.0 * x - 1.0).collect();
        let bx = Cube::new(vec![0.5], 2.0).unwrap();
        let grid = Grid::cell_centered(&bx, 200).unwrap();
        let (a, b) = trace_1d_lp(&v, &e, 2, 2.0, &bx, &grid).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn subset_enumeration_counts() {
        let mut count = 0;
        for_each_subset(6, 3, |_| count += 1);
        assert_eq!(count, 20);
    }
}
