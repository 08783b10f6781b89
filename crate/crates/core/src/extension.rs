//! Extension operators: Taylor polynomials, the McShane inf-convolution, a
//! smooth partition of unity on Whitney cubes, and Whitney's formula
//! `F = sum_Q phi_Q P_{a_Q}` for polynomial jets.
//!
//! Derivatives of the partition and of `F` are computed exactly from
//! truncated Taylor series, never by differencing assembled fields.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::AnalyticFunction;
use crate::geometry::{lex_cmp, nearest_anchor, sup_dist, Cube, PointSet, WhitneyDecomposition};
use crate::grid::{Grid, ScalarField};
use crate::metrics::NodeMetric;
use crate::poly::{coeffs_to_keys, keys_to_coeffs, Basis, MultiIndex, Polynomial, Series};
use crate::sobolev::{central_stencil, node_derivative};

/// Degree-`m` Taylor polynomial of an analytic function at `y`.
pub fn taylor_poly_analytic(f: &AnalyticFunction, y: &[f64], m: usize) -> Polynomial {
    f.taylor(y, m)
}

/// Degree-`m` Taylor polynomial at grid node `y`, from central differences.
pub fn taylor_poly(f: &ScalarField, y: &[f64], m: usize) -> Result<Polynomial> {
    let node = f
        .grid()
        .node_at(y)
        .ok_or_else(|| Error::NotANode(y.to_vec()))?;
    let basis = Basis::get(y.len(), m);
    let derivs = basis
        .indices()
        .iter()
        .map(|a| node_derivative(f, a, node))
        .collect::<Result<Vec<f64>>>()?;
    Polynomial::from_derivatives(f.grid().node(node), m, &derivs)
}

/// `|D^beta F(x) - D^beta T^m_y[F](x)| / (||x-y||^{m-|beta|} d(x,y))`; 0 when `x = y`.
pub fn taylor_remainder_check(
    f: &AnalyticFunction,
    d: impl Fn(&[f64], &[f64]) -> f64,
    m: usize,
    beta: &[usize],
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let order: usize = beta.iter().sum();
    if order > m {
        return Err(invalid("beta", format!("order {order} exceeds m = {m}")));
    }
    let r = sup_dist(x, y);
    if r == 0.0 {
        return Ok(0.0);
    }
    let t = f.taylor(y, m);
    let lhs = (f.derivative(beta, x) - t.derivative_at(beta, x)).abs();
    let den = r.powi((m - order) as i32) * d(x, y);
    Ok(if lhs == 0.0 { 0.0 } else { lhs / den })
}

/// The uniform-norm distance between a list of points.
#[derive(Clone, Debug)]
pub struct SupNormMetric {
    pub points: Vec<Vec<f64>>,
}

impl NodeMetric for SupNormMetric {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        sup_dist(&self.points[i], &self.points[j])
    }
}

/// Checks `|f_a - f_b| <= L d(e_a, e_b)` on all pairs of `E` (relative slack `1e-12`).
pub fn check_lipschitz_on_set(
    f: &[f64],
    e_nodes: &[usize],
    d: &impl NodeMetric,
    lipschitz: f64,
) -> Result<()> {
    for a in 0..e_nodes.len() {
        for b in a + 1..e_nodes.len() {
            let diff = (f[a] - f[b]).abs();
            let bound = lipschitz * d.dist(e_nodes[a], e_nodes[b]);
            if diff > bound * (1.0 + 1e-12) {
                return Err(Error::NotLipschitz {
                    lipschitz,
                    i: a,
                    j: b,
                    diff,
                    bound,
                });
            }
        }
    }
    Ok(())
}

/// `F(x) = min_{y in E} f(y) + L d(x, y)` at every point of the metric.
///
/// `e_nodes[i]` is the metric index of the `i`-th point of `E`.
pub fn mcshane_extend(
    f: &[f64],
    e_nodes: &[usize],
    d: &(impl NodeMetric + Sync),
    lipschitz: f64,
) -> Result<Vec<f64>> {
    if f.len() != e_nodes.len() {
        return Err(Error::MismatchedSets);
    }
    if e_nodes.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(invalid(
            "lipschitz",
            format!("{lipschitz} is not a finite nonnegative number"),
        ));
    }
    check_lipschitz_on_set(f, e_nodes, d, lipschitz)?;
    let mut out: Vec<f64> = (0..d.len())
        .into_par_iter()
        .map(|x| {
            e_nodes
                .iter()
                .zip(f)
                .map(|(&y, &fy)| fy + lipschitz * d.dist(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // On E the minimum is attained at the point itself; pin it to avoid rounding.
    for (&y, &fy) in e_nodes.iter().zip(f) {
        out[y] = fy;
    }
    Ok(out)
}

/// `max |F(i) - F(j)| / d(i, j)` over pairs with `d > 0`, with the attaining pair.
pub fn lipschitz_seminorm(values: &[f64], d: &(impl NodeMetric + Sync)) -> (f64, usize, usize) {
    (0..d.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0, i, i);
            for j in 0..d.len() {
                let dij = d.dist(i, j);
                let diff = (values[i] - values[j]).abs();
                let r = if dij > 0.0 {
                    diff / dij
                } else if diff > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if r > best.0 {
                    best = (r, i, j);
                }
            }
            best
        })
        .reduce(
            || (0.0, 0, 0),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                    b
                } else {
                    a
                }
            },
        )
}

/// `exp(-1/(1-t^2))` on `(-1, 1)`; derivatives below `e^{-600}` scale are dropped.
fn cutoff_series(t: Series) -> Series {
    let t0 = t.value();
    let n = t.basis().dim();
    let order = t.order();
    if t0.abs() >= 1.0 || 1.0 / (1.0 - t0 * t0) > 600.0 {
        return Series::zero(n, order);
    }
    let one = Series::constant(n, order, 1.0);
    let s = one.add(&t.mul(&t).scale(-1.0));
    s.recip().scale(-1.0).exp()
}

/// Normalized tensor bumps `phi_Q = psi_Q / sum_K psi_K`, with `psi_Q`
/// supported in `Q* = (9/8) Q`.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    decomposition: WhitneyDecomposition,
    stars: Vec<Cube>,
    index: StarIndex,
}

impl PartitionOfUnity {
    pub fn new(decomposition: &WhitneyDecomposition) -> Self {
        let stars: Vec<Cube> = decomposition.cubes().iter().map(|q| q.star()).collect();
        let index = StarIndex::new(&stars, decomposition.truncation_box());
        Self {
            decomposition: decomposition.clone(),
            stars,
            index,
        }
    }

    pub fn decomposition(&self) -> &WhitneyDecomposition {
        &self.decomposition
    }

    pub fn stars(&self) -> &[Cube] {
        &self.stars
    }

    /// Indices of the cubes whose star has `x` in its interior.
    pub fn active(&self, x: &[f64]) -> Vec<usize> {
        self.index
            .candidates(x)
            .iter()
            .copied()
            .filter(|&i| self.stars[i].interior_contains(x))
            .collect()
    }

    /// Series of the unnormalized bump `psi_Q` at `x`.
    pub fn bump_series(&self, q: usize, x: &[f64], order: usize) -> Series {
        let star = &self.stars[q];
        let n = x.len();
        let mut out = Series::constant(n, order, 1.0);
        for a in 0..n {
            let t = Series::variable(n, order, a, (x[a] - star.center[a]) / star.half_side)
                .rescale(star.half_side);
            out = out.mul(&cutoff_series(t));
        }
        out
    }

    /// Series of every nonzero `phi_Q` at `x`; `None` when no bump covers `x`.
    pub fn series(&self, x: &[f64], order: usize) -> Option<Vec<(usize, Series)>> {
        let bumps: Vec<(usize, Series)> = self
            .active(x)
            .into_iter()
            .map(|q| (q, self.bump_series(q, x, order)))
            .filter(|(_, s)| s.value() > 0.0)
            .collect();
        if bumps.is_empty() {
            return None;
        }
        let mut total = Series::zero(x.len(), order);
        for (_, s) in &bumps {
            total.add_assign(s);
        }
        let inv = total.recip();
        Some(bumps.into_iter().map(|(q, s)| (q, s.mul(&inv))).collect())
    }

    /// `phi_Q(x)`.
    pub fn value(&self, q: usize, x: &[f64]) -> f64 {
        self.series(x, 0)
            .and_then(|v| v.into_iter().find(|(k, _)| *k == q).map(|(_, s)| s.value()))
            .unwrap_or(0.0)
    }

    /// `sum_Q phi_Q(x)`; `None` when no bump covers `x`.
    pub fn sum_at(&self, x: &[f64]) -> Option<f64> {
        self.series(x, 0)
            .map(|v| v.iter().map(|(_, s)| s.value()).sum())
    }
}

pub fn build_partition_of_unity(w: &WhitneyDecomposition) -> PartitionOfUnity {
    PartitionOfUnity::new(w)
}

/// Uniform bucket grid over the box holding all stars.
#[derive(Clone, Debug)]
struct StarIndex {
    lo: Vec<f64>,
    width: f64,
    per_axis: usize,
    buckets: Vec<Vec<usize>>,
}

impl StarIndex {
    fn new(stars: &[Cube], bx: &Cube) -> Self {
        let n = bx.dim();
        let outer = bx.dilate(9.0 / 8.0);
        let lo: Vec<f64> = (0..n).map(|a| outer.lo(a)).collect();
        let per_axis: usize = match n {
            1 => 4096,
            2 => 128,
            _ => 16,
        };
        let width = outer.diam() / per_axis as f64;
        let mut buckets = vec![Vec::new(); per_axis.pow(n as u32)];
        for (i, s) in stars.iter().enumerate() {
            let range: Vec<(usize, usize)> = (0..n)
                .map(|a| {
                    let l = ((s.lo(a) - lo[a]) / width).floor().max(0.0) as usize;
                    let h = ((s.hi(a) - lo[a]) / width).floor().max(0.0) as usize;
                    (l.min(per_axis - 1), h.min(per_axis - 1))
                })
                .collect();
            let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
            'outer: loop {
                let flat = idx.iter().fold(0, |acc, &k| acc * per_axis + k);
                buckets[flat].push(i);
                for a in (0..n).rev() {
                    if idx[a] < range[a].1 {
                        idx[a] += 1;
                        continue 'outer;
                    }
                    idx[a] = range[a].0;
                }
                break;
            }
        }
        Self {
            lo,
            width,
            per_axis,
            buckets,
        }
    }

    fn candidates(&self, x: &[f64]) -> &[usize] {
        let mut flat = 0;
        for (a, &v) in x.iter().enumerate() {
            let k = ((v - self.lo[a]) / self.width).floor();
            if k < 0.0 || k >= self.per_axis as f64 {
                return &[];
            }
            flat = flat * self.per_axis + k as usize;
        }
        &self.buckets[flat]
    }
}

/// A polynomial `P_x` of degree at most `m - 1`, expanded about `x`, for every `x` in `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetField {
    m: usize,
    points: PointSet,
    polys: Vec<Polynomial>,
}

#[derive(Serialize, Deserialize)]
struct JetEntry {
    point: Vec<f64>,
    coeffs: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct JetRepr {
    m: usize,
    entries: Vec<JetEntry>,
}

impl JetField {
    pub fn new(m: usize, points: PointSet, polys: Vec<Polynomial>) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        if polys.len() != points.len() {
            return Err(Error::MismatchedSets);
        }
        let polys = polys
            .into_iter()
            .zip(points.points())
            .map(|(p, x)| {
                if p.dim() != points.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: points.dim(),
                        got: p.dim(),
                    });
                }
                if p.degree() > m - 1
                    && p.coefficient_map()
                        .keys()
                        .any(|a| a.iter().sum::<usize>() > m - 1)
                {
                    return Err(invalid(
                        "polys",
                        format!("degree exceeds m - 1 = {}", m - 1),
                    ));
                }
                Ok(p.with_degree(m - 1).rebase(x))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { m, points, polys })
    }

    /// `P_x = T^{m-1}_x[F]`.
    pub fn from_function(f: &AnalyticFunction, points: &PointSet, m: usize) -> Result<Self> {
        let polys = points.points().iter().map(|x| f.taylor(x, m - 1)).collect();
        Self::new(m, points.clone(), polys)
    }

    /// The jet of a single polynomial (truncated to degree `m - 1` about each point).
    pub fn from_polynomial(p: &Polynomial, points: &PointSet, m: usize) -> Result<Self> {
        let basis = Basis::get(points.dim(), m - 1);
        let polys = points
            .points()
            .iter()
            .map(|x| {
                let d: Vec<f64> = basis
                    .indices()
                    .iter()
                    .map(|a| p.derivative_at(a, x))
                    .collect();
                Polynomial::from_derivatives(x.clone(), m - 1, &d)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(m, points.clone(), polys)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn poly(&self, i: usize) -> &Polynomial {
        &self.polys[i]
    }

    pub fn add(&self, other: &JetField) -> Result<JetField> {
        if self.points != other.points || self.m != other.m {
            return Err(Error::MismatchedSets);
        }
        let polys = self
            .polys
            .iter()
            .zip(&other.polys)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(JetField {
            m: self.m,
            points: self.points.clone(),
            polys,
        })
    }

    pub fn scale(&self, c: f64) -> JetField {
        JetField {
            m: self.m,
            points: self.points.clone(),
            polys: self.polys.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = JetRepr {
            m: self.m,
            entries: self
                .points
                .points()
                .iter()
                .zip(&self.polys)
                .map(|(x, p)| JetEntry {
                    point: x.clone(),
                    coeffs: coeffs_to_keys(&p.coefficient_map()),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: JetRepr = serde_json::from_str(s)?;
        if repr.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        let points = PointSet::new(repr.entries.iter().map(|e| e.point.clone()).collect())?;
        let polys = repr
            .entries
            .iter()
            .map(|e| Polynomial::from_map(e.point.clone(), repr.m - 1, &keys_to_coeffs(&e.coeffs)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(repr.m, points, polys)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Whitney's extension of a jet over a decomposition of the complement of its points.
#[derive(Clone, Debug)]
pub struct WhitneyExtension {
    jet: JetField,
    partition: PartitionOfUnity,
    /// Jet index of `a_Q` for each cube.
    anchors: Vec<usize>,
}

impl WhitneyExtension {
    pub fn new(jet: &JetField, partition: &PartitionOfUnity) -> Result<Self> {
        let w = partition.decomposition();
        let src = w.source();
        if src.len() != jet.points().len()
            || src
                .points()
                .iter()
                .any(|p| jet.points().index_of(p).is_none())
        {
            return Err(Error::MismatchedSets);
        }
        let anchors = w
            .cubes()
            .iter()
            .map(|q| {
                let a = nearest_anchor(q, jet.points())?;
                jet.points().index_of(&a).ok_or(Error::MismatchedSets)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            jet: jet.clone(),
            partition: partition.clone(),
            anchors,
        })
    }

    pub fn jet(&self) -> &JetField {
        &self.jet
    }

    pub fn partition(&self) -> &PartitionOfUnity {
        &self.partition
    }

    /// Jet index of the anchor `a_Q` of cube `q`.
    pub fn anchor(&self, q: usize) -> usize {
        self.anchors[q]
    }

    /// Taylor series of `F` at `x`, truncated at `order`; `None` off the covered region.
    pub fn series(&self, x: &[f64], order: usize) -> Option<Series> {
        if let Some(i) = self.jet.points().index_of(x) {
            return Some(self.jet.poly(i).series_at(x, order));
        }
        let parts = self.partition.series(x, order)?;
        let mut out = Series::zero(x.len(), order);
        for (q, phi) in parts {
            let p = self.jet.poly(self.anchors[q]).series_at(x, order);
            out.add_assign(&phi.mul(&p));
        }
        Some(out)
    }

    pub fn value(&self, x: &[f64]) -> Option<f64> {
        self.series(x, 0).map(|s| s.value())
    }

    pub fn derivative(&self, alpha: &[usize], x: &[f64]) -> Option<f64> {
        self.series(x, alpha.iter().sum())
            .map(|s| s.derivative(alpha))
    }

    /// `F` and all `D^alpha F` with `|alpha| <= order` on every grid node.
    pub fn on_grid(&self, grid: &Grid, order: usize) -> Result<ExtensionField> {
        let n = grid.dim();
        let basis = Basis::get(n, order);
        let rows: Vec<Option<Vec<f64>>> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.series(&grid.node(i), order).map(|s| s.derivatives()))
            .collect();
        let w = self.partition.decomposition();
        let mut columns = vec![vec![0.0; grid.len()]; basis.len()];
        let mut uncovered = vec![false; grid.len()];
        let mut collar = vec![false; grid.len()];
        for (i, row) in rows.iter().enumerate() {
            let x = grid.node(i);
            collar[i] = w.in_collar(&x);
            match row {
                Some(d) => {
                    for (c, v) in columns.iter_mut().zip(d) {
                        c[i] = *v;
                    }
                }
                None => uncovered[i] = true,
            }
        }
        let fields = basis
            .indices()
            .iter()
            .zip(columns)
            .map(|(a, c)| Ok((a.clone(), ScalarField::new(grid.clone(), c)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExtensionField {
            derivatives: fields,
            uncovered,
            in_collar: collar,
        })
    }

    /// `|D^beta_h (F - P_{x_i})(x_i)|` for the jet point `x_i`, where `D^beta_h`
    /// is the tensor central difference of step `h`. Differencing `F - P_{x_i}`
    /// removes the stencil's own truncation error on the polynomial part.
    /// `None` when a stencil point is not covered.
    pub fn boundary_derivative_error(&self, i: usize, beta: &[usize], h: f64) -> Option<f64> {
        let x = self.jet.points().get(i).to_vec();
        let stencils: Vec<Vec<f64>> = beta.iter().map(|&b| central_stencil(b)).collect();
        let mut pos = vec![0usize; beta.len()];
        let mut total = 0.0;
        'outer: loop {
            let mut w = 1.0;
            let mut y = x.clone();
            for a in 0..beta.len() {
                w *= stencils[a][pos[a]];
                y[a] += (pos[a] as f64 - (stencils[a].len() / 2) as f64) * h;
            }
            if w != 0.0 {
                total += w * (self.value(&y)? - self.jet.poly(i).eval(&y));
            }
            for a in (0..beta.len()).rev() {
                if pos[a] + 1 < stencils[a].len() {
                    pos[a] += 1;
                    continue 'outer;
                }
                pos[a] = 0;
            }
            break;
        }
        let order: usize = beta.iter().sum();
        Some((total / h.powi(order as i32)).abs())
    }

    /// Ratio of `|D^alpha F(y) - D^alpha P_{a_K}(y)|` to the local jet mismatch
    /// `sum_{Q in T(K)} sum_xi (diam K)^{|xi|-|alpha|} |D^xi P_{a_Q}(a_K) - D^xi P_{a_K}(a_K)|`.
    /// `None` when `y` is not covered; 0 when both sides vanish.
    pub fn local_estimate_ratio(&self, k: usize, y: &[f64], alpha: &[usize]) -> Option<f64> {
        let w = self.partition.decomposition();
        let cube = &w.cubes()[k];
        let order: usize = alpha.iter().sum();
        let fy = self.derivative(alpha, y)?;
        let pk = self.jet.poly(self.anchors[k]);
        let lhs = (fy - pk.derivative_at(alpha, y)).abs();
        let ak = self.jet.points().get(self.anchors[k]).to_vec();
        let diam = cube.diam();
        let xi_basis = Basis::get(y.len(), self.jet.m() - 1);
        let mut rhs = 0.0;
        for q in w.touching_indices(k) {
            let pq = self.jet.poly(self.anchors[q]);
            for xi in xi_basis.indices() {
                let e = xi.iter().sum::<usize>() as i32 - order as i32;
                rhs += diam.powi(e) * (pq.derivative_at(xi, &ak) - pk.derivative_at(xi, &ak)).abs();
            }
        }
        Some(if lhs == 0.0 { 0.0 } else { lhs / rhs })
    }
}

pub fn whitney_extend_jet(
    jet: &JetField,
    partition: &PartitionOfUnity,
    grid: &Grid,
    order: usize,
) -> Result<ExtensionField> {
    WhitneyExtension::new(jet, partition)?.on_grid(grid, order)
}

/// Extension values and derivatives on a grid.
#[derive(Clone, Debug)]
pub struct ExtensionField {
    /// `(alpha, D^alpha F)` for every `|alpha| <= order`, the first being `F` itself.
    pub derivatives: Vec<(MultiIndex, ScalarField)>,
    /// Nodes no bump reaches (set to 0 in every field).
    pub uncovered: Vec<bool>,
    /// Nodes inside discarded collar cubes.
    pub in_collar: Vec<bool>,
}

impl ExtensionField {
    pub fn values(&self) -> &ScalarField {
        &self.derivatives[0].1
    }

    pub fn derivative(&self, alpha: &[usize]) -> Option<&ScalarField> {
        self.derivatives
            .iter()
            .find(|(a, _)| a == alpha)
            .map(|(_, f)| f)
    }

    /// Nodes where the extension is reliable: covered and outside the collar.
    pub fn usable(&self, i: usize) -> bool {
        !self.uncovered[i] && !self.in_collar[i]
    }
}

/// Points of `E` sorted lexicographically (deterministic iteration helper).
pub fn sorted_points(e: &PointSet) -> Vec<Vec<f64>> {
    let mut v = e.points().to_vec();
    v.sort_by(|a, b| lex_cmp(a, b));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Factor;
    use crate::geometry::whitney_decompose;

    #[test]
    fn mcshane_two_points() {
        // E = {0, 1}, f = (0, 1), uniform distance, L = 1: F(x) = min(|x|, 1 + |x - 1|).
        let xs: Vec<Vec<f64>> = (0..=40).map(|i| vec![-1.0 + 0.075 * i as f64]).collect();
        let mut pts = xs.clone();
        pts.push(vec![0.0]);
        pts.push(vec![1.0]);
        let m = pts.len();
        let d = SupNormMetric {
            points: pts.clone(),
        };
        let f = mcshane_extend(&[0.0, 1.0], &[m - 2, m - 1], &d, 1.0).unwrap();
        for (i, x) in pts.iter().enumerate() {
            let want = x[0].abs().min(1.0 + (x[0] - 1.0).abs());
            assert!((f[i] - want).abs() < 1e-12);
        }
        assert_eq!(f[m - 2], 0.0);
        assert_eq!(f[m - 1], 1.0);
        let (l, _, _) = lipschitz_seminorm(&f, &d);
        assert!(l <= 1.0 + 1e-12);
    }

    #[test]
    fn mcshane_half_point() {
        let pts = vec![vec![0.0], vec![1.0], vec![0.5]];
        let d = SupNormMetric { points: pts };
        let f = mcshane_extend(&[0.0, 1.0], &[0, 1], &d, 1.0).unwrap();
        assert_eq!(f[2], 0.5);
    }

    #[test]
    fn mcshane_rejects_non_lipschitz_data() {
        let d = SupNormMetric {
            points: vec![vec![0.0], vec![1.0]],
        };
        let err = mcshane_extend(&[0.0, 3.0], &[0, 1], &d, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotLipschitz { i: 0, j: 1, .. }));
    }

    #[test]
    fn mcshane_constant_data() {
        let d = SupNormMetric {
            points: (0..10).map(|i| vec![i as f64]).collect(),
        };
        let f = mcshane_extend(&[2.0, 2.0], &[3, 7], &d, 0.5).unwrap();
        // min over E of 2 + L d: constant only on E, growing away from it.
        assert_eq!(f[3], 2.0);
        assert_eq!(f[7], 2.0);
        let g = mcshane_extend(&[2.0, 2.0], &[3, 7], &d, 0.0).unwrap();
        assert!(g.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn taylor_of_exp_from_grid() {
        let g = Grid::new(vec![-0.5], 1e-3, vec![1001]).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].exp()).unwrap();
        let p = taylor_poly(&f, &[0.0], 2).unwrap();
        assert!((p.coeff(&[0]) - 1.0).abs() < 1e-12);
        assert!((p.coeff(&[1]) - 1.0).abs() < 1e-6);
        assert!((p.coeff(&[2]) - 0.5).abs() < 1e-6);
        assert!(matches!(
            taylor_poly(&f, &[0.0003], 2),
            Err(Error::NotANode(_))
        ));
        assert!(matches!(
            taylor_poly(&f, &[-0.5], 2),
            Err(Error::StencilOutOfRange)
        ));
    }

    #[test]
    fn taylor_remainder_vanishes_for_polynomials() {
        let f = AnalyticFunction::product("cube", 1.0, vec![Factor::Power { k: 3 }]);
        let r =
            taylor_remainder_check(&f, sup_dist, 3, &[1], &[0.4], &[-0.2]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(
            taylor_remainder_check(&f, sup_dist, 1, &[0], &[0.4], &[0.4]).unwrap(),
            0.0
        );
    }

    fn point_decomposition() -> WhitneyDecomposition {
        let e = PointSet::new(vec![vec![0.0]]).unwrap();
        whitney_decompose(&e, &Cube::new(vec![0.0], 1.0).unwrap(), 8).unwrap()
    }

    #[test]
    fn partition_sums_to_one_off_e() {
        let w = point_decomposition();
        let p = PartitionOfUnity::new(&w);
        let mut checked = 0;
        for i in 0..1000 {
            let x = [-1.0 + 2.0 * (i as f64 + 0.5) / 1000.0];
            if let Some(s) = p.sum_at(&x) {
                assert!((s - 1.0).abs() < 1e-10, "x={x:?}");
                checked += 1;
            } else {
                assert!(w.in_collar(&x) || x[0].abs() < 1e-2);
            }
        }
        assert!(checked > 950);
    }

    #[test]
    fn bumps_vanish_outside_star_and_stay_in_unit_range() {
        let w = point_decomposition();
        let p = PartitionOfUnity::new(&w);
        for q in 0..w.len() {
            let star = &p.stars()[q];
            for t in [-1.2, -1.0, -0.7, 0.0, 0.5, 1.0, 1.3] {
                let x = [star.center[0] + t * star.half_side];
                let v = p.value(q, &x);
                assert!((0.0..=1.0).contains(&v));
                if t.abs() >= 1.0 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let w = point_decomposition();
        let p = PartitionOfUnity::new(&w);
        let q = w.len() / 2;
        let star = &p.stars()[q];
        let x = [star.center[0] + 0.3 * star.half_side];
        let h = 1e-5 * star.half_side;
        let s = p.series(&x, 2).unwrap();
        let phi = s.iter().find(|(k, _)| *k == q).unwrap().1.clone();
        let fd = (p.value(q, &[x[0] + h]) - p.value(q, &[x[0] - h])) / (2.0 * h);
        assert!((phi.derivative(&[1]) - fd).abs() < 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn single_cube_partition_is_one() {
        let e = PointSet::new(vec![vec![10.0]]).unwrap();
        let bx = Cube::new(vec![1.0], 1.0).unwrap();
        let w = WhitneyDecomposition::from_cubes(
            vec![bx.clone()],
            e,
            Cube::new(vec![5.0], 6.0).unwrap(),
        )
        .unwrap();
        let p = PartitionOfUnity::new(&w);
        for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
            assert!((p.value(0, &[t]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jet_json_round_trip() {
        let e = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
        let f = AnalyticFunction::product(
            "g",
            1.0,
            vec![
                Factor::Exp { rate: 1.0 },
                Factor::Sin {
                    freq: 1.0,
                    phase: 0.0,
                },
            ],
        );
        let j = JetField::from_function(&f, &e, 3).unwrap();
        let s = j.to_json().unwrap();
        assert!(s.contains("\"m\": 3"));
        assert!(s.contains("\"(1,0)\""));
        let back = JetField::from_json(&s).unwrap();
        for (a, b) in back.polys().iter().zip(j.polys()) {
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jet_degree_is_enforced() {
        let e = PointSet::new(vec![vec![0.0]]).unwrap();
        let mut m = BTreeMap::new();
        m.insert(vec![2], 1.0);
        let p = Polynomial::from_map(vec![0.0], 2, &m).unwrap();
        assert!(JetField::new(2, e, vec![p]).is_err());
    }

    #[test]
    fn two_point_zeroth_order_extension() {
        let e = PointSet::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let polys = vec![
            Polynomial::from_coeffs(vec![0.0], 0, vec![0.0]).unwrap(),
            Polynomial::from_coeffs(vec![1.0], 0, vec![1.0]).unwrap(),
        ];
        let j = JetField::new(1, e.clone(), polys).unwrap();
        let w = whitney_decompose(&e, &Cube::new(vec![0.5], 2.0).unwrap(), 12).unwrap();
        let p = PartitionOfUnity::new(&w);
        let ext = WhitneyExtension::new(&j, &p).unwrap();
        assert_eq!(ext.value(&[0.0]), Some(0.0));
        assert_eq!(ext.value(&[1.0]), Some(1.0));
        // Near each point the extension is close to the point's value.
        assert!(ext.value(&[1e-3]).unwrap().abs() < 1e-12);
        assert!((ext.value(&[1.0 - 1e-3]).unwrap() - 1.0).abs() < 1e-12);
        let mid = ext.value(&[0.5]).unwrap();
        assert!((0.0..=1.0).contains(&mid));
    }
}
