//! Weighted distances on R^n: the cube-average pre-metric, its sup and inf
//! forms over the candidate cube family, and the geodesic metric obtained by
//! minimizing over chains in a grid graph.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{sup_dist, Cube, PointSet};
use crate::grid::{Grid, ScalarField, WeightField};
use crate::maximal::a1_norm_with;
use crate::window::{
    box_count, window, window_averages, CubeFamily, Extreme, PrefixSums, RangeTable,
};

/// A distance known on a finite set of indexed points.
pub trait NodeMetric {
    fn len(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Value of a cube-average distance together with whether its cube was clipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Delta {
    pub value: f64,
    pub truncated: bool,
}

/// Power mean of `h` over cubes, from prefix sums of `h^q`.
#[derive(Clone, Debug)]
struct PowerMeans {
    grid: Grid,
    q: f64,
    sums: PrefixSums,
    powered: Vec<f64>,
}

impl PowerMeans {
    fn new(h: &WeightField, q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("{q} must be positive and finite")));
        }
        let powered: Vec<f64> = h.values().iter().map(|v| v.powf(q)).collect();
        if powered.iter().any(|v| !v.is_finite()) {
            return Err(invalid("weight", "h^q overflows"));
        }
        let sums = PrefixSums::new(h.grid().extents(), &powered);
        Ok(Self {
            grid: h.grid().clone(),
            q,
            sums,
            powered,
        })
    }

    fn mean_over(&self, range: &[(usize, usize)]) -> f64 {
        (self.sums.sum(range) / box_count(range) as f64).max(0.0)
    }

    /// Mean of `h^q` over the nodes in `cube`; an empty sample falls back to the nearest node.
    fn cube_mean(&self, cube: &Cube) -> (f64, bool) {
        let range = self.grid.node_range(cube).unwrap_or_else(|| {
            let i = self.grid.nearest_node(&cube.center);
            self.grid
                .multi_index(i)
                .into_iter()
                .map(|k| (k, k))
                .collect()
        });
        (self.mean_over(&range), self.grid.clips(cube))
    }

    fn delta(&self, x: &[f64], y: &[f64]) -> Result<Delta> {
        let n = self.grid.dim();
        for p in [x, y] {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
        }
        let r = sup_dist(x, y);
        if r == 0.0 {
            return Ok(Delta {
                value: 0.0,
                truncated: false,
            });
        }
        let cube = Cube {
            center: x.to_vec(),
            half_side: r,
        };
        let (mean, truncated) = self.cube_mean(&cube);
        Ok(Delta {
            value: r * mean.powf(1.0 / self.q),
            truncated,
        })
    }

    /// Node-to-node version of [`PowerMeans::delta`]; identical values, no float box search.
    fn delta_nodes(&self, i: usize, j: usize) -> Delta {
        if i == j {
            return Delta {
                value: 0.0,
                truncated: false,
            };
        }
        let ext = self.grid.extents();
        let a = self.grid.multi_index(i);
        let b = self.grid.multi_index(j);
        let k = a
            .iter()
            .zip(&b)
            .map(|(u, v)| u.abs_diff(*v))
            .max()
            .unwrap_or(0);
        let w = window(&a, k, ext);
        let truncated = a.iter().zip(ext).any(|(&u, &e)| u < k || u + k > e - 1);
        let r = sup_dist(&self.grid.node(i), &self.grid.node(j));
        Delta {
            value: r * self.mean_over(&w).powf(1.0 / self.q),
            truncated,
        }
    }
}

/// On-disk description of a [`QuasiMetricSpec`]: exponent plus paths to the
/// weight `h` and its grid, relative to the file holding this record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricSpecRef {
    pub q: f64,
    pub weight_ref: String,
    pub grid_ref: String,
}

/// The pre-metric `delta_q(x, y : h)` for a weight `h` on a grid, with `q >= n`.
#[derive(Clone, Debug)]
pub struct QuasiMetricSpec {
    weight: WeightField,
    means: PowerMeans,
}

impl QuasiMetricSpec {
    pub fn new(weight: WeightField, q: f64) -> Result<Self> {
        let n = weight.grid().dim();
        if !(q >= n as f64) {
            return Err(invalid("q", format!("{q} is below the dimension {n}")));
        }
        let means = PowerMeans::new(&weight, q)?;
        Ok(Self { weight, means })
    }

    pub fn q(&self) -> f64 {
        self.means.q
    }

    pub fn grid(&self) -> &Grid {
        &self.means.grid
    }

    pub fn weight(&self) -> &WeightField {
        &self.weight
    }

    /// The field `h^q`.
    pub fn power_weight(&self) -> Result<WeightField> {
        WeightField::new(ScalarField::new(
            self.grid().clone(),
            self.means.powered.clone(),
        )?)
    }

    pub fn delta(&self, x: &[f64], y: &[f64]) -> Result<Delta> {
        self.means.delta(x, y)
    }

    /// `max(delta(x,y), delta(y,x))`.
    pub fn delta_sym(&self, x: &[f64], y: &[f64]) -> Result<Delta> {
        let a = self.means.delta(x, y)?;
        let b = self.means.delta(y, x)?;
        Ok(Delta {
            value: a.value.max(b.value),
            truncated: a.truncated || b.truncated,
        })
    }

    pub fn delta_nodes(&self, i: usize, j: usize) -> Delta {
        self.means.delta_nodes(i, j)
    }

    pub fn delta_sym_nodes(&self, i: usize, j: usize) -> Delta {
        let a = self.means.delta_nodes(i, j);
        let b = self.means.delta_nodes(j, i);
        Delta {
            value: a.value.max(b.value),
            truncated: a.truncated || b.truncated,
        }
    }

    /// Writes the weight (binary with grid sidecar), the grid JSON, and the spec record.
    pub fn save(&self, path: &Path) -> Result<QuasiMetricSpecRef> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "spec".into());
        let weight_ref = format!("{stem}.weight.bin");
        let grid_ref = format!("{stem}.grid.json");
        self.weight.field().write_binary(&dir.join(&weight_ref))?;
        fs::write(
            dir.join(&grid_ref),
            serde_json::to_string_pretty(self.grid())?,
        )?;
        let record = QuasiMetricSpecRef {
            q: self.q(),
            weight_ref,
            grid_ref,
        };
        fs::write(path, serde_json::to_string_pretty(&record)?)?;
        Ok(record)
    }

    /// Loads a spec record; the weight may be a binary dump or a CSV on the referenced grid.
    pub fn load(path: &Path) -> Result<Self> {
        let record: QuasiMetricSpecRef = serde_json::from_str(&fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let grid: Grid = serde_json::from_str(&fs::read_to_string(dir.join(&record.grid_ref))?)?;
        let wpath = dir.join(&record.weight_ref);
        let field = if record.weight_ref.ends_with(".csv") {
            ScalarField::read_csv(&grid, &wpath)?
        } else {
            let f = ScalarField::read_binary(&wpath)?;
            if f.grid() != &grid {
                return Err(invalid("weight_ref", "weight grid differs from grid_ref"));
            }
            f
        };
        Self::new(WeightField::new(field)?, record.q)
    }
}

pub fn delta_q(spec: &QuasiMetricSpec, x: &[f64], y: &[f64]) -> Result<Delta> {
    spec.delta(x, y)
}

/// Per-level range extrema of family-cube averages, answering "extreme
/// average among family cubes of level k containing both x and y".
#[derive(Clone, Debug)]
struct FamilyRanges {
    grid: Grid,
    levels: Vec<usize>,
    tables: Vec<RangeTable>,
}

impl FamilyRanges {
    fn new(values: &[f64], grid: &Grid, family: &CubeFamily, op: Extreme) -> Self {
        let ext = grid.extents().to_vec();
        let sums = PrefixSums::new(&ext, values);
        let levels: Vec<usize> = family.levels().to_vec();
        let tables = levels
            .par_iter()
            .map(|&k| RangeTable::new(&ext, &window_averages(&ext, &sums, k), op))
            .collect();
        Self {
            grid: grid.clone(),
            levels,
            tables,
        }
    }

    /// `(level, extreme)` for every level with at least one qualifying center.
    fn per_level<'a>(
        &'a self,
        x: &'a [f64],
        y: &'a [f64],
    ) -> impl Iterator<Item = (usize, f64)> + 'a {
        let s = self.grid.spacing();
        self.levels
            .iter()
            .zip(&self.tables)
            .filter_map(move |(&k, t)| {
                let h = CubeFamily::half_side(k, s);
                let lo: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.max(*b) - h).collect();
                let hi: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.min(*b) + h).collect();
                let range = self.grid.node_range_box(&lo, &hi)?;
                Some((k, t.query(&range)))
            })
    }
}

/// `phi_q(x, y : w) = ||x-y|| max_{Q ∋ x,y} (avg_Q w)^{1/q}` over the candidate family.
#[derive(Clone, Debug)]
pub struct SupForm {
    q: f64,
    ranges: FamilyRanges,
}

impl SupForm {
    pub fn new(w: &WeightField, q: f64) -> Result<Self> {
        Self::with_family(w, q, &CubeFamily::full(w.grid()))
    }

    pub fn with_family(w: &WeightField, q: f64, family: &CubeFamily) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("{q} must be positive and finite")));
        }
        Ok(Self {
            q,
            ranges: FamilyRanges::new(w.values(), w.grid(), family, Extreme::Max),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn grid(&self) -> &Grid {
        &self.ranges.grid
    }

    pub fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = sup_dist(x, y);
        if r == 0.0 {
            return 0.0;
        }
        let best = self
            .ranges
            .per_level(x, y)
            .map(|(_, v)| v)
            .fold(0.0f64, f64::max);
        r * best.powf(1.0 / self.q)
    }
}

pub fn phi_q(w: &WeightField, q: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(SupForm::new(w, q)?.phi(x, y))
}

/// `phi(x_0, x_m) / sum phi(x_i, x_{i+1})`, or 0 when both sides vanish.
pub fn chain_ratio(form: &SupForm, chain: &[Vec<f64>]) -> Result<f64> {
    if chain.len() < 2 {
        return Err(invalid("chain", "needs at least two points"));
    }
    let lhs = form.phi(&chain[0], &chain[chain.len() - 1]);
    let rhs: f64 = chain.windows(2).map(|p| form.phi(&p[0], &p[1])).sum();
    Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// Whether `phi(x_0, x_m) <= 16 sum phi(x_i, x_{i+1})`, up to a `1e-12` relative slack.
pub fn chain_inequality_check(form: &SupForm, chain: &[Vec<f64>]) -> Result<bool> {
    Ok(chain_ratio(form, chain)? <= 16.0 * (1.0 + 1e-12))
}

/// `(delta_s(x,y:h), delta_q(x,y:h))` for `0 < s <= q`.
pub fn exponent_comparison(
    h: &WeightField,
    q: f64,
    s: f64,
    x: &[f64],
    y: &[f64],
) -> Result<(f64, f64)> {
    if !(s > 0.0) {
        return Err(invalid("s", format!("{s} must be positive")));
    }
    if s > q {
        return Err(invalid("s", format!("{s} exceeds q = {q}")));
    }
    let lo = PowerMeans::new(h, s)?.delta(x, y)?.value;
    let hi = PowerMeans::new(h, q)?.delta(x, y)?.value;
    Ok((lo, hi))
}

/// `min_{Q ∋ x,y} diam Q (avg_Q h^s)^{1/s}` over the candidate family.
#[derive(Clone, Debug)]
pub struct InfCubeForm {
    s: f64,
    ranges: FamilyRanges,
}

impl InfCubeForm {
    pub fn new(h: &WeightField, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid("s", format!("{s} must be positive and finite")));
        }
        let powered: Vec<f64> = h.values().iter().map(|v| v.powf(s)).collect();
        Ok(Self {
            s,
            ranges: FamilyRanges::new(
                &powered,
                h.grid(),
                &CubeFamily::full(h.grid()),
                Extreme::Min,
            ),
        })
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        if sup_dist(x, y) == 0.0 {
            return 0.0;
        }
        let sp = self.ranges.grid.spacing();
        self.ranges
            .per_level(x, y)
            .map(|(k, v)| 2.0 * CubeFamily::half_side(k, sp) * v.max(0.0).powf(1.0 / self.s))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn inf_cube_distance(h: &WeightField, q: f64, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = h.grid().dim() as f64;
    if !(n <= s && s <= q) {
        return Err(invalid(
            "s",
            format!("need n <= s <= q, got s = {s}, q = {q}"),
        ));
    }
    Ok(InfCubeForm::new(h, s)?.value(x, y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Grid nodes (plus registered extra points) joined by edges of uniform
/// index length at most the hop radius, weighted by the symmetrized pre-metric.
#[derive(Clone, Debug)]
pub struct GeodesicGraph {
    points: Vec<Vec<f64>>,
    adjacency: Vec<Vec<(usize, f64)>>,
    grid_len: usize,
    hop_radius: usize,
}

impl GeodesicGraph {
    pub fn new(spec: &QuasiMetricSpec, hop_radius: usize) -> Result<Self> {
        Self::with_points(spec, hop_radius, None)
    }

    /// Registers the points of `extra`; points that are grid nodes reuse the node.
    pub fn with_points(
        spec: &QuasiMetricSpec,
        hop_radius: usize,
        extra: Option<&PointSet>,
    ) -> Result<Self> {
        if hop_radius == 0 {
            return Err(invalid("hop_radius", "must be at least 1"));
        }
        let grid = spec.grid();
        let n = grid.dim();
        let ext = grid.extents().to_vec();
        let r = hop_radius;
        let mut adjacency: Vec<Vec<(usize, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let idx = grid.multi_index(i);
                let w = window(&idx, r, &ext);
                let mut out = Vec::new();
                grid.for_each_in_range(&w, |j| {
                    if j != i {
                        out.push((j, spec.delta_sym_nodes(i, j).value));
                    }
                });
                out
            })
            .collect();
        let mut points: Vec<Vec<f64>> = grid.nodes().collect();
        let grid_len = points.len();
        if let Some(e) = extra {
            if e.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: e.dim(),
                });
            }
            let reach = r as f64 * grid.spacing();
            for p in e.points() {
                if grid.node_at(p).is_some() {
                    continue;
                }
                let id = points.len();
                let mut edges = Vec::new();
                let cube = Cube {
                    center: p.clone(),
                    half_side: reach,
                };
                if let Some(range) = grid.node_range(&cube) {
                    let mut near = Vec::new();
                    grid.for_each_in_range(&range, |j| near.push(j));
                    for j in near {
                        let d = spec.delta_sym(p, &points[j])?.value;
                        edges.push((j, d));
                        adjacency[j].push((id, d));
                    }
                }
                for (other, q) in points.iter().enumerate().skip(grid_len) {
                    if sup_dist(p, q) <= reach * (1.0 + 1e-12) {
                        let d = spec.delta_sym(p, q)?.value;
                        edges.push((other, d));
                        adjacency[other].push((id, d));
                    }
                }
                points.push(p.clone());
                adjacency.push(edges);
            }
        }
        Ok(Self {
            points,
            adjacency,
            grid_len,
            hop_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    pub fn hop_radius(&self) -> usize {
        self.hop_radius
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Graph index of `p`: a grid node or a registered extra point.
    pub fn index_of(&self, p: &[f64], grid: &Grid) -> Option<usize> {
        grid.node_at(p).or_else(|| {
            self.points[self.grid_len..]
                .iter()
                .position(|q| q.as_slice() == p)
                .map(|k| k + self.grid_len)
        })
    }

    /// Single-source shortest paths (Dijkstra).
    pub fn shortest_from(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Reverse((Key(0.0), src)));
        while let Some(Reverse((Key(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Key(nd), v)));
                }
            }
        }
        dist
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let d = self.shortest_from(i)[j];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Disconnected(j))
        }
    }

    /// Geodesic and symmetrized pre-metric values for every pair of graph points.
    pub fn all_pairs(&self, spec: &QuasiMetricSpec) -> Result<DistanceTable> {
        let m = self.len();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let geo = self.shortest_from(i);
                let delta = (0..m)
                    .map(|j| {
                        if i < self.grid_len && j < self.grid_len {
                            Ok(spec.delta_sym_nodes(i, j).value)
                        } else {
                            spec.delta_sym(&self.points[i], &self.points[j])
                                .map(|d| d.value)
                        }
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((geo, delta))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut geo = Vec::with_capacity(m * m);
        let mut delta = Vec::with_capacity(m * m);
        for (g, d) in rows {
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Disconnected(j));
            }
            geo.extend(g);
            delta.extend(d);
        }
        Ok(DistanceTable {
            points: self.points.clone(),
            geo,
            delta,
        })
    }
}

/// Shortest-path distance between two points; points off the grid are registered first.
pub fn geodesic_dq(spec: &QuasiMetricSpec, x: &[f64], y: &[f64], hop_radius: usize) -> Result<f64> {
    let pts: Vec<Vec<f64>> = if x == y {
        vec![x.to_vec()]
    } else {
        vec![x.to_vec(), y.to_vec()]
    };
    let set = PointSet::new(pts)?;
    let graph = GeodesicGraph::with_points(spec, hop_radius, Some(&set))?;
    let i = graph
        .index_of(x, spec.grid())
        .ok_or_else(|| Error::NotANode(x.to_vec()))?;
    let j = graph
        .index_of(y, spec.grid())
        .ok_or_else(|| Error::NotANode(y.to_vec()))?;
    graph.distance(i, j)
}

/// Dense all-pairs table of geodesic distances `d_q` and symmetrized `delta_q`.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    points: Vec<Vec<f64>>,
    geo: Vec<f64>,
    delta: Vec<f64>,
}

impl DistanceTable {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        self.geo[i * self.points.len() + j]
    }

    pub fn delta(&self, i: usize, j: usize) -> f64 {
        self.delta[i * self.points.len() + j]
    }

    /// `max delta/d` over pairs with `d > 0`, with the attaining pair.
    pub fn max_ratio(&self) -> (f64, usize, usize) {
        let m = self.points.len();
        let mut best = (1.0, 0, 0);
        for i in 0..m {
            for j in 0..m {
                let d = self.geodesic(i, j);
                if d > 0.0 {
                    let r = self.delta(i, j) / d;
                    if r > best.0 {
                        best = (r, i, j);
                    }
                }
            }
        }
        best
    }

    /// Index of the point nearest to `p` in the uniform norm.
    pub fn nearest(&self, p: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.points.iter().enumerate() {
            let d = sup_dist(p, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "i,j,delta_q,d_q,ratio")?;
        let m = self.points.len();
        for i in 0..m {
            for j in 0..m {
                let (dl, dg) = (self.delta(i, j), self.geodesic(i, j));
                let ratio = if dg > 0.0 { dl / dg } else { 1.0 };
                writeln!(out, "{i},{j},{dl:e},{dg:e},{ratio:e}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

impl NodeMetric for DistanceTable {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.geodesic(i, j)
    }
}

/// Sampled `v_x(t) = t (avg_{Q(x,t)} h^q)^{1/q}` and its least concave majorant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcaveProfile {
    pub anchor: Vec<f64>,
    /// `(t, v_x(t))` on the dyadic ladder, starting with `(0, 0)`.
    pub samples: Vec<(f64, f64)>,
    /// `(t, omega_x(t))` at the same abscissae.
    pub knots: Vec<(f64, f64)>,
    /// A1 constant of `h^q` used in the doubling check.
    pub eta: f64,
    /// `None` when the A1 constant is infinite and the check was skipped.
    pub doubling_ok: Option<bool>,
    pub monotone: bool,
    pub truncated: bool,
}

impl ConcaveProfile {
    /// Piecewise-linear majorant, constant after the last knot.
    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= 0.0 {
            return 0.0;
        }
        for w in k.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        k.last().map(|p| p.1).unwrap_or(0.0)
    }
}

/// Upper hull of points sorted by abscissa, evaluated back at every abscissa.
pub fn least_concave_majorant(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b when it lies on or below the chord a -> p.
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    points
        .iter()
        .map(|&(t, v)| {
            let i = hull.partition_point(|h| h.0 < t);
            if i < hull.len() && hull[i].0 == t {
                return (t, hull[i].1.max(v));
            }
            let (a, b) = (hull[i - 1], hull[i]);
            (t, a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0))
        })
        .collect()
}

pub fn metric_profile(spec: &QuasiMetricSpec, x: &[f64]) -> Result<ConcaveProfile> {
    let grid = spec.grid();
    let i = grid.node_at(x).ok_or_else(|| Error::NotANode(x.to_vec()))?;
    let anchor = grid.node(i);
    let s = grid.spacing();
    let ext = grid.extents();
    let idx = grid.multi_index(i);
    let q = spec.q();
    let mut samples = vec![(0.0, 0.0)];
    let mut truncated = false;
    let top = ext.iter().copied().max().unwrap_or(1) - 1;
    let mut k = 1;
    while k <= top.max(1) {
        let w = window(&idx, k, ext);
        truncated |= idx.iter().zip(ext).any(|(&u, &e)| u < k || u + k > e - 1);
        let t = k as f64 * s;
        samples.push((t, t * spec.means.mean_over(&w).powf(1.0 / q)));
        k *= 2;
    }
    let monotone = samples.windows(2).all(|w| w[1].1 >= w[0].1);
    let w = spec.power_weight()?;
    let levels: Vec<usize> = (0..samples.len() - 1).map(|j| 1usize << j).collect();
    let report = a1_norm_with(&w, &CubeFamily::from_levels(levels));
    let eta = report.norm_estimate;
    let doubling_ok = report.finite.then(|| {
        let c = eta.powf(1.0 / q) * (1.0 + 1e-12);
        samples[1..].iter().enumerate().all(|(a, &(t1, v1))| {
            samples[a + 2..]
                .iter()
                .all(|&(t2, v2)| v2 / t2 <= c * v1 / t1)
        })
    });
    // Running maximum first, so the majorant is also nondecreasing.
    let mut run = samples.clone();
    for j in 1..run.len() {
        run[j].1 = run[j].1.max(run[j - 1].1);
    }
    let knots = least_concave_majorant(&run);
    Ok(ConcaveProfile {
        anchor,
        samples,
        knots,
        eta,
        doubling_ok,
        monotone,
        truncated,
    })
}

/// `(d(x,z) + d(z,y)) / d(x,y)` for a point `z` between `x` and `y`.
pub fn pseudoconvexity_check(d: &impl NodeMetric, x: usize, y: usize, z: usize) -> Result<f64> {
    let dxy = d.dist(x, y);
    if dxy == 0.0 {
        if x != y {
            return Err(Error::DegenerateMetric);
        }
        return Ok(1.0);
    }
    Ok((d.dist(x, z) + d.dist(z, y)) / dxy)
}

/// Grid node nearest to `x + t (y - x)`.
pub fn segment_node(grid: &Grid, x: &[f64], y: &[f64], t: f64) -> usize {
    let p: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect();
    grid.nearest_node(&p)
}

/// Largest observed constants in `d(y,z) <= C d(x,z)` and
/// `d(x,z)/|x-z| <= C d(y,z)/|y-z|` over triples with `|y-z| <= lambda |x-z|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleSweep {
    pub lambda: f64,
    pub samples: usize,
    pub growth: f64,
    pub slope: f64,
}

pub fn triple_sweep(table: &DistanceTable, lambda: f64, samples: usize, seed: u64) -> TripleSweep {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = table.points.len();
    let mut out = TripleSweep {
        lambda,
        samples: 0,
        growth: 0.0,
        slope: 0.0,
    };
    if m < 3 {
        return out;
    }
    let mut tries = 0;
    while out.samples < samples && tries < 100 * samples {
        tries += 1;
        let (x, y, z) = (
            rng.gen_range(0..m),
            rng.gen_range(0..m),
            rng.gen_range(0..m),
        );
        let nxz = sup_dist(&table.points[x], &table.points[z]);
        let nyz = sup_dist(&table.points[y], &table.points[z]);
        if nxz == 0.0 || nyz == 0.0 || nyz > lambda * nxz {
            continue;
        }
        let (dxz, dyz) = (table.geodesic(x, z), table.geodesic(y, z));
        if dxz == 0.0 || dyz == 0.0 {
            continue;
        }
        out.samples += 1;
        out.growth = out.growth.max(dyz / dxz);
        out.slope = out.slope.max((dxz / nxz) / (dyz / nyz));
    }
    out
}
