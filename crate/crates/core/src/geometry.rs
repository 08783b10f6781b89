//! Axis-parallel cubes, finite point sets, Whitney decompositions of the
//! complement of a point set inside a truncation box, and the partition of
//! cube families into pairwise disjoint subfamilies.
//!
//! All distances use the uniform norm `max_i |x_i - y_i|`, so the diameter of
//! a cube is twice its half-side.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform-norm distance between two points.
pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Lexicographic order on coordinate vectors.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Closed axis-parallel cube `Q(center, half_side)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub half_side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, half_side: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(invalid("center", "zero-dimensional cube"));
        }
        if !(half_side > 0.0 && half_side.is_finite()) {
            return Err(invalid("half_side", format!("{half_side} is not positive")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("center", "non-finite coordinate"));
        }
        Ok(Self { center, half_side })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn diam(&self) -> f64 {
        2.0 * self.half_side
    }

    pub fn volume(&self) -> f64 {
        self.diam().powi(self.dim() as i32)
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_side
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_side
    }

    /// `λQ`: same center, half-side multiplied by `lambda`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            center: self.center.clone(),
            half_side: self.half_side * lambda,
        }
    }

    /// `Q* = (9/8) Q`.
    pub fn star(&self) -> Self {
        self.dilate(9.0 / 8.0)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        sup_dist(&self.center, x) <= self.half_side
    }

    /// Closed containment with an absolute slack.
    pub fn contains_point_tol(&self, x: &[f64], tol: f64) -> bool {
        sup_dist(&self.center, x) <= self.half_side + tol
    }

    /// Strict interior membership.
    pub fn interior_contains(&self, x: &[f64]) -> bool {
        sup_dist(&self.center, x) < self.half_side
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|a| self.lo(a) <= other.lo(a) && other.hi(a) <= self.hi(a))
    }

    /// Closed intersection.
    pub fn intersects(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|a| self.lo(a) <= other.hi(a) && other.lo(a) <= self.hi(a))
    }

    /// Whether the interiors intersect.
    pub fn interiors_overlap(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|a| self.lo(a) < other.hi(a) && other.lo(a) < self.hi(a))
    }

    /// Uniform-norm distance from the cube to a point.
    pub fn dist_to_point(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| ((v - c).abs() - self.half_side).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Uniform-norm distance between two cubes.
    pub fn dist_to_cube(&self, other: &Cube) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| ((a - b).abs() - self.half_side - other.half_side).max(0.0))
            .fold(0.0, f64::max)
    }

    /// The `2^n` corners in lexicographic sign order.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|a| {
                        if mask >> (n - 1 - a) & 1 == 1 {
                            self.hi(a)
                        } else {
                            self.lo(a)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Dyadic children in lexicographic order of their centers.
    pub fn children(&self) -> Vec<Cube> {
        let h = 0.5 * self.half_side;
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| Cube {
                center: (0..n)
                    .map(|a| {
                        if mask >> (n - 1 - a) & 1 == 1 {
                            self.center[a] + h
                        } else {
                            self.center[a] - h
                        }
                    })
                    .collect(),
                half_side: h,
            })
            .collect()
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q({:?}, {})", self.center, self.half_side)
    }
}

/// Finite nonempty set of distinct points of R^n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPointSet")]
pub struct PointSet {
    points: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPointSet {
    points: Vec<Vec<f64>>,
}

impl TryFrom<RawPointSet> for PointSet {
    type Error = Error;
    fn try_from(raw: RawPointSet) -> Result<Self> {
        Self::new(raw.points)
    }
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let n = first.len();
        if n == 0 {
            return Err(invalid("points", "zero-dimensional points"));
        }
        for p in &points {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid("points", "non-finite coordinate"));
            }
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| lex_cmp(a, b));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoints);
        }
        Ok(Self { points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == x)
    }

    /// Smallest cube containing all points, centered at the bounding-box center.
    pub fn bounding_cube(&self) -> Cube {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in &self.points {
            for a in 0..n {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let half = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| 0.5 * (h - l))
            .fold(0.0, f64::max);
        Cube {
            center,
            half_side: half,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Distance from `x` to `E` in the uniform norm and the attaining point
/// (lexicographically smallest among ties).
pub fn dist_point_set(x: &[f64], e: &PointSet) -> Result<(f64, Vec<f64>)> {
    if e.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: x.len(),
        });
    }
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for p in e.points() {
        let d = sup_dist(x, p);
        best = match best {
            None => Some((d, p)),
            Some((bd, bp)) => {
                if d < bd || (d == bd && lex_cmp(p, bp) == Ordering::Less) {
                    Some((d, p))
                } else {
                    Some((bd, bp))
                }
            }
        };
    }
    let (d, p) = best.ok_or(Error::EmptySet)?;
    Ok((d, p.clone()))
}

/// Distance from a cube to `E`.
pub fn dist_cube_set(q: &Cube, e: &PointSet) -> f64 {
    e.points()
        .iter()
        .map(|p| q.dist_to_point(p))
        .fold(f64::INFINITY, f64::min)
}

/// `a_Q`: the point of `E` nearest to `Q`, lexicographically smallest among ties.
pub fn nearest_anchor(q: &Cube, e: &PointSet) -> Result<Vec<f64>> {
    if e.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: q.dim(),
        });
    }
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for p in e.points() {
        let d = q.dist_to_point(p);
        let better = match best {
            None => true,
            Some((bd, bp)) => d < bd || (d == bd && lex_cmp(p, bp) == Ordering::Less),
        };
        if better {
            best = Some((d, p));
        }
    }
    Ok(best.ok_or(Error::EmptySet)?.1.clone())
}

/// Where a cube sits relative to the Whitney window `diam Q <= dist(Q,E) <= 4 diam Q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhitneyFit {
    TooClose,
    Admissible,
    TooFar,
}

pub fn whitney_fit(diam: f64, dist: f64) -> WhitneyFit {
    if dist < diam {
        WhitneyFit::TooClose
    } else if dist <= 4.0 * diam {
        WhitneyFit::Admissible
    } else {
        WhitneyFit::TooFar
    }
}

/// A Whitney family `W_E` of dyadic cubes of a truncation box.
#[derive(Clone, Debug)]
pub struct WhitneyDecomposition {
    cubes: Vec<Cube>,
    dists: Vec<f64>,
    collar: Vec<Cube>,
    source: PointSet,
    truncation_box: Cube,
}

/// Dyadic Whitney selection inside `bx`.
///
/// A dyadic cube is kept as soon as `diam Q <= dist(Q,E)`; for every cube
/// below the root this already forces `dist(Q,E) <= 4 diam Q`, since the
/// parent was split only because it came within one parent diameter of `E`.
/// Cubes that are still too close at depth `min_level` form the collar.
pub fn whitney_decompose(e: &PointSet, bx: &Cube, min_level: u32) -> Result<WhitneyDecomposition> {
    if e.dim() != bx.dim() {
        return Err(Error::DimensionMismatch {
            expected: bx.dim(),
            got: e.dim(),
        });
    }
    if let Some(p) = e.points().iter().find(|p| !bx.contains_point(p)) {
        return Err(Error::OutsideBox { point: p.clone() });
    }
    let mut cubes = Vec::new();
    let mut dists = Vec::new();
    let mut collar = Vec::new();
    let mut stack = vec![(bx.clone(), 0u32)];
    while let Some((q, level)) = stack.pop() {
        let dist = dist_cube_set(&q, e);
        match whitney_fit(q.diam(), dist) {
            WhitneyFit::Admissible => {
                cubes.push(q);
                dists.push(dist);
            }
            WhitneyFit::TooFar => {
                // Only a root box can be this far from E, and E lies inside it.
                debug_assert!(level == 0);
                cubes.push(q);
                dists.push(dist);
            }
            WhitneyFit::TooClose if level >= min_level => collar.push(q),
            WhitneyFit::TooClose => {
                for child in q.children().into_iter().rev() {
                    stack.push((child, level + 1));
                }
            }
        }
    }
    Ok(WhitneyDecomposition {
        cubes,
        dists,
        collar,
        source: e.clone(),
        truncation_box: bx.clone(),
    })
}

impl WhitneyDecomposition {
    /// Builds a decomposition from an explicit cube list, checking that every
    /// cube satisfies the Whitney window and that interiors do not overlap.
    pub fn from_cubes(cubes: Vec<Cube>, source: PointSet, truncation_box: Cube) -> Result<Self> {
        let mut dists = Vec::with_capacity(cubes.len());
        for (i, q) in cubes.iter().enumerate() {
            let d = dist_cube_set(q, &source);
            if whitney_fit(q.diam(), d) != WhitneyFit::Admissible {
                return Err(invalid(
                    "cubes",
                    format!("cube {i} violates diam Q <= dist(Q,E) <= 4 diam Q"),
                ));
            }
            for (j, k) in cubes.iter().enumerate().take(i) {
                if q.interiors_overlap(k) {
                    return Err(Error::Overlap(j, i));
                }
            }
            dists.push(d);
        }
        Ok(Self {
            cubes,
            dists,
            collar: Vec::new(),
            source,
            truncation_box,
        })
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// `dist(Q,E)` for each cube, aligned with [`cubes`](Self::cubes).
    pub fn dists(&self) -> &[f64] {
        &self.dists
    }

    pub fn collar(&self) -> &[Cube] {
        &self.collar
    }

    pub fn source(&self) -> &PointSet {
        &self.source
    }

    pub fn truncation_box(&self) -> &Cube {
        &self.truncation_box
    }

    pub fn position(&self, k: &Cube) -> Option<usize> {
        self.cubes.iter().position(|q| q == k)
    }

    /// Indices of the cubes whose closures meet cube `k`.
    pub fn touching_indices(&self, k: usize) -> Vec<usize> {
        let kc = &self.cubes[k];
        self.cubes
            .iter()
            .enumerate()
            .filter(|(_, q)| q.intersects(kc))
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether `x` lies in a collar cube (and in no kept cube).
    pub fn in_collar(&self, x: &[f64]) -> bool {
        self.collar.iter().any(|c| c.contains_point(x))
            && !self.cubes.iter().any(|c| c.contains_point(x))
    }

    /// CSV export: one row per cube with center coordinates, half-side and `dist(Q,E)`.
    pub fn to_csv(&self) -> String {
        let n = self.truncation_box.dim();
        let mut out = String::new();
        for a in 0..n {
            out.push_str(&format!("c{a},"));
        }
        out.push_str("half_side,dist_to_E\n");
        for (q, d) in self.cubes.iter().zip(&self.dists) {
            for c in &q.center {
                out.push_str(&format!("{c:e},"));
            }
            out.push_str(&format!("{:e},{d:e}\n", q.half_side));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// `T(K)`: all cubes of `W` whose closures meet `K`.
pub fn touching_family(k: &Cube, w: &WhitneyDecomposition) -> Result<Vec<Cube>> {
    let idx = w.position(k).ok_or(Error::NotInDecomposition)?;
    Ok(w.touching_indices(idx)
        .into_iter()
        .map(|i| w.cubes[i].clone())
        .collect())
}

/// Upper bound asserted for `#T(K)`.
pub fn touching_bound(n: usize) -> usize {
    12usize.pow(n as u32)
}

/// Maximum number of closed cubes of the family sharing a common point.
///
/// The intersection of closed boxes, when nonempty, contains the point whose
/// coordinates are the largest lower endpoints, so it suffices to test the
/// grid spanned by lower endpoints.
pub fn covering_multiplicity(cubes: &[Cube]) -> usize {
    let Some(first) = cubes.first() else {
        return 0;
    };
    let n = first.dim();
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut v: Vec<f64> = cubes.iter().map(|q| q.lo(a)).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let mut best = 0;
    let mut idx = vec![0usize; n];
    let mut point = vec![0.0; n];
    loop {
        for a in 0..n {
            point[a] = axes[a][idx[a]];
        }
        let count = cubes.iter().filter(|q| q.contains_point(&point)).count();
        best = best.max(count);
        let mut a = n;
        loop {
            if a == 0 {
                return best;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// `2^(n-1) (M - 1) + 1`.
pub fn disjoint_family_bound(n: usize, multiplicity: usize) -> usize {
    if multiplicity == 0 {
        return 0;
    }
    (1usize << (n - 1)) * (multiplicity - 1) + 1
}

/// Splits a family of closed cubes into subfamilies of pairwise disjoint cubes.
///
/// Intervals are colored greedily by left endpoint, which is optimal. In
/// higher dimensions cubes are colored greedily from the largest down; if that
/// exceeds `2^(n-1)(M-1)+1` colors, an exact backtracking search targets the bound.
pub fn partition_disjoint(cubes: &[Cube]) -> Vec<Vec<Cube>> {
    if cubes.is_empty() {
        return Vec::new();
    }
    let n = cubes[0].dim();
    let m = cubes.len();
    let adj: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i && cubes[i].intersects(&cubes[j]))
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    if n == 1 {
        order.sort_by(|&a, &b| {
            cubes[a]
                .lo(0)
                .total_cmp(&cubes[b].lo(0))
                .then(cubes[a].hi(0).total_cmp(&cubes[b].hi(0)))
        });
    } else {
        order.sort_by(|&a, &b| {
            cubes[b]
                .half_side
                .total_cmp(&cubes[a].half_side)
                .then_with(|| lex_cmp(&cubes[a].center, &cubes[b].center))
        });
    }
    let mut colors = greedy_coloring(&adj, &order);
    let used = colors.iter().max().map_or(0, |c| c + 1);
    let bound = disjoint_family_bound(n, covering_multiplicity(cubes));
    if used > bound {
        if let Some(better) = exact_coloring(&adj, bound, 2_000_000) {
            colors = better;
        }
    }
    let k = colors.iter().max().map_or(0, |c| c + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &c) in colors.iter().enumerate() {
        out[c].push(cubes[i].clone());
    }
    out
}

fn greedy_coloring(adj: &[Vec<usize>], order: &[usize]) -> Vec<usize> {
    let mut colors = vec![usize::MAX; adj.len()];
    for &v in order {
        let mut taken: Vec<bool> = vec![false; adj.len() + 1];
        for &u in &adj[v] {
            if colors[u] != usize::MAX {
                taken[colors[u]] = true;
            }
        }
        colors[v] = taken.iter().position(|t| !t).expect("a free color exists");
    }
    colors
}

/// DSatur-ordered backtracking for a coloring with at most `k` colors.
fn exact_coloring(adj: &[Vec<usize>], k: usize, budget: usize) -> Option<Vec<usize>> {
    fn pick(adj: &[Vec<usize>], colors: &[usize]) -> Option<usize> {
        let mut best: Option<(usize, usize, usize)> = None;
        for v in 0..adj.len() {
            if colors[v] != usize::MAX {
                continue;
            }
            let mut seen: Vec<usize> = adj[v]
                .iter()
                .filter(|&&u| colors[u] != usize::MAX)
                .map(|&u| colors[u])
                .collect();
            seen.sort_unstable();
            seen.dedup();
            let key = (seen.len(), adj[v].len(), v);
            if best.is_none_or(|b| (key.0, key.1) > (b.0, b.1)) {
                best = Some(key);
            }
        }
        best.map(|b| b.2)
    }
    fn go(adj: &[Vec<usize>], k: usize, colors: &mut Vec<usize>, budget: &mut usize) -> bool {
        let Some(v) = pick(adj, colors) else {
            return true;
        };
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        for c in 0..k {
            if adj[v].iter().all(|&u| colors[u] != c) {
                colors[v] = c;
                if go(adj, k, colors, budget) {
                    return true;
                }
                colors[v] = usize::MAX;
            }
        }
        false
    }
    let mut colors = vec![usize::MAX; adj.len()];
    let mut budget = budget;
    go(adj, k, &mut colors, &mut budget).then_some(colors)
}
