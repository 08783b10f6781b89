//! Finite-difference derivatives, `L^m_p` seminorms, Sobolev–Poincaré ratios,
//! the sharp maximal function, and the weight `C M[|grad F|^sigma]^{1/sigma}`
//! that makes a Sobolev function Lipschitz for the cube-average distance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::AnalyticFunction;
use crate::geometry::{sup_dist, Cube};
use crate::grid::{Grid, ScalarField, WeightField};
use crate::maximal::hl_maximal;
use crate::poly::{Basis, MultiIndex};
use crate::window::{box_count, window, PrefixSums};

/// Central difference weights for a `j`-th derivative on offsets `-r..=r`, unit spacing.
///
/// Odd orders compose `[-1/2, 0, 1/2]` with powers of `[1, -2, 1]`; both are
/// exact on polynomials of degree `j + 1`.
pub(crate) fn central_stencil(order: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut conv = |k: &[f64]| {
        let mut next = vec![0.0; out.len() + k.len() - 1];
        for (i, a) in out.iter().enumerate() {
            for (j, b) in k.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        out = next;
    };
    for _ in 0..order / 2 {
        conv(&[1.0, -2.0, 1.0]);
    }
    if order % 2 == 1 {
        conv(&[-0.5, 0.0, 0.5]);
    }
    out
}

/// Nodes needed on each side of the center for `D^alpha`, per axis.
pub fn stencil_radius(alpha: &[usize]) -> Vec<usize> {
    alpha.iter().map(|&a| a.div_ceil(2)).collect()
}

/// Boundary margin (in nodes) outside of which all order-`m` stencils fit.
pub fn derivative_margin(m: usize) -> usize {
    m.div_ceil(2)
}

/// `D^alpha F` at one node by tensor-product central differences.
pub fn node_derivative(f: &ScalarField, alpha: &[usize], node: usize) -> Result<f64> {
    let grid = f.grid();
    if alpha.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: alpha.len(),
        });
    }
    let idx = grid.multi_index(node);
    let radius = stencil_radius(alpha);
    for ((&i, &r), &e) in idx.iter().zip(&radius).zip(grid.extents()) {
        if i < r || i + r >= e {
            return Err(Error::StencilOutOfRange);
        }
    }
    Ok(apply_stencil(f, alpha, &idx))
}

fn apply_stencil(f: &ScalarField, alpha: &[usize], idx: &[usize]) -> f64 {
    let grid = f.grid();
    let strides = grid.strides();
    let stencils: Vec<Vec<f64>> = alpha.iter().map(|&a| central_stencil(a)).collect();
    let center: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
    let mut total = 0.0;
    let mut pos = vec![0usize; alpha.len()];
    'outer: loop {
        let mut w = 1.0;
        let mut flat = center as isize;
        for a in 0..alpha.len() {
            w *= stencils[a][pos[a]];
            let r = (stencils[a].len() / 2) as isize;
            flat += (pos[a] as isize - r) * strides[a] as isize;
        }
        if w != 0.0 {
            total += w * f.get(flat as usize);
        }
        for a in (0..alpha.len()).rev() {
            if pos[a] + 1 < stencils[a].len() {
                pos[a] += 1;
                continue 'outer;
            }
            pos[a] = 0;
        }
        break;
    }
    let order: usize = alpha.iter().sum();
    total / grid.spacing().powi(order as i32)
}

/// All `D^alpha F` with `|alpha| = m`. Nodes within [`derivative_margin`] of the
/// boundary, where a stencil would leave the grid, hold 0.
pub fn discrete_derivatives(
    f: &ScalarField,
    m: usize,
) -> Result<BTreeMap<MultiIndex, ScalarField>> {
    let grid = f.grid();
    let needed = 2 * m + 1;
    if let Some(&have) = grid.extents().iter().find(|&&e| e < needed) {
        return Err(Error::GridTooSmall { needed, have });
    }
    let basis = Basis::get(grid.dim(), m);
    let mut out = BTreeMap::new();
    for k in basis.of_degree(m) {
        let alpha = basis.indices()[k].clone();
        let radius = stencil_radius(&alpha);
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let idx = grid.multi_index(i);
                let fits = idx
                    .iter()
                    .zip(&radius)
                    .zip(grid.extents())
                    .all(|((&j, &r), &e)| j >= r && j + r < e);
                if fits {
                    apply_stencil(f, &alpha, &idx)
                } else {
                    0.0
                }
            })
            .collect();
        out.insert(alpha, ScalarField::new(grid.clone(), values)?);
    }
    Ok(out)
}

/// `(sum_{|alpha|=m} (D^alpha F)^2)^{1/2}` at every node (0 inside the margin).
pub fn derivative_magnitude(f: &ScalarField, m: usize) -> Result<ScalarField> {
    let d = discrete_derivatives(f, m)?;
    let mut acc = vec![0.0; f.grid().len()];
    for field in d.values() {
        for (a, v) in acc.iter_mut().zip(field.values()) {
            *a += v * v;
        }
    }
    ScalarField::new(f.grid().clone(), acc.into_iter().map(f64::sqrt).collect())
}

/// `|grad F|` on every node, using second-order one-sided differences on the faces.
pub fn gradient_magnitude(f: &ScalarField) -> Result<ScalarField> {
    let grid = f.grid();
    if let Some(&have) = grid.extents().iter().find(|&&e| e < 3) {
        return Err(Error::GridTooSmall { needed: 3, have });
    }
    let strides = grid.strides();
    let s = grid.spacing();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let idx = grid.multi_index(i);
            let mut sq = 0.0;
            for a in 0..grid.dim() {
                let st = strides[a];
                let e = grid.extents()[a];
                let d = if idx[a] == 0 {
                    (-3.0 * f.get(i) + 4.0 * f.get(i + st) - f.get(i + 2 * st)) / (2.0 * s)
                } else if idx[a] == e - 1 {
                    (3.0 * f.get(i) - 4.0 * f.get(i - st) + f.get(i - 2 * st)) / (2.0 * s)
                } else {
                    (f.get(i + st) - f.get(i - st)) / (2.0 * s)
                };
                sq += d * d;
            }
            sq.sqrt()
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// How boundary nodes were treated by a seminorm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolicy {
    /// Nodes closer than this many positions to a face are excluded.
    pub trimmed_margin: usize,
}

/// `|nabla^m F|` and its `L_p` norm over interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SeminormReport {
    pub m: usize,
    pub p: f64,
    pub gradient_field: ScalarField,
    pub seminorm: f64,
    pub boundary_policy: BoundaryPolicy,
}

#[derive(Serialize, Deserialize)]
struct SeminormRepr {
    m: usize,
    p: f64,
    seminorm: f64,
    boundary_policy: BoundaryPolicy,
    grid: Grid,
    gradient_field: Vec<f64>,
}

impl SeminormReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SeminormRepr {
            m: self.m,
            p: self.p,
            seminorm: self.seminorm,
            boundary_policy: self.boundary_policy.clone(),
            grid: self.gradient_field.grid().clone(),
            gradient_field: self.gradient_field.values().to_vec(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: SeminormRepr = serde_json::from_str(s)?;
        Ok(Self {
            m: r.m,
            p: r.p,
            seminorm: r.seminorm,
            boundary_policy: r.boundary_policy,
            gradient_field: ScalarField::new(r.grid, r.gradient_field)?,
        })
    }
}

/// Midpoint-rule `L_p` norm of `g` over the nodes at least `margin` from every face.
pub fn interior_lp_norm(g: &ScalarField, p: f64, margin: usize) -> Result<f64> {
    let grid = g.grid();
    let range = grid.interior(margin).ok_or(Error::GridTooSmall {
        needed: 2 * margin + 1,
        have: grid.extents().iter().copied().min().unwrap_or(0),
    })?;
    let mut s = 0.0;
    grid.for_each_in_range(&range, |i| s += g.get(i).abs().powf(p));
    Ok((s * grid.cell_volume()).powf(1.0 / p))
}

/// `||F||_{L^m_p} = ||nabla^m F||_{L_p}` over interior nodes.
pub fn sobolev_seminorm(f: &ScalarField, m: usize, p: f64) -> Result<SeminormReport> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("{p} is not in [1, inf)")));
    }
    let g = derivative_magnitude(f, m)?;
    let margin = derivative_margin(m);
    let seminorm = interior_lp_norm(&g, p, margin)?;
    Ok(SeminormReport {
        m,
        p,
        gradient_field: g,
        seminorm,
        boundary_policy: BoundaryPolicy {
            trimmed_margin: margin,
        },
    })
}

fn check_q(q: f64, n: usize) -> Result<()> {
    if !(q > n as f64 && q.is_finite()) {
        return Err(invalid("q", format!("{q} must exceed the dimension {n}")));
    }
    Ok(())
}

/// `num / den`, reading `0/0` as 0 and `x/0` as infinity (a non-Sobolev sample).
fn guarded_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Oscillation of a field against cube power means of a derivative magnitude.
#[derive(Clone, Debug)]
pub struct PoincareTable {
    field: ScalarField,
    q: f64,
    sums: PrefixSums,
}

impl PoincareTable {
    /// `gradient` is `|grad F|` (or `nabla^m F`) sampled on the grid of `f`.
    pub fn new(f: &ScalarField, gradient: &ScalarField, q: f64) -> Result<Self> {
        if f.grid() != gradient.grid() {
            return Err(invalid("gradient", "sampled on a different grid"));
        }
        check_q(q, f.grid().dim())?;
        let powered: Vec<f64> = gradient.values().iter().map(|v| v.abs().powf(q)).collect();
        Ok(Self {
            field: f.clone(),
            q,
            sums: PrefixSums::new(f.grid().extents(), &powered),
        })
    }

    /// From a field alone, with `|grad F|` by finite differences.
    pub fn from_field(f: &ScalarField, q: f64) -> Result<Self> {
        Self::new(f, &gradient_magnitude(f)?, q)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    fn mean(&self, range: &[(usize, usize)]) -> f64 {
        (self.sums.sum(range) / box_count(range) as f64).max(0.0)
    }

    /// `(avg_Q |grad F|^q)^{1/q}` over the nodes of `cube`.
    pub fn power_mean(&self, cube: &Cube) -> Result<f64> {
        let range = self
            .field
            .grid()
            .node_range(cube)
            .ok_or(Error::EmptyCubeSample)?;
        Ok(self.mean(&range).powf(1.0 / self.q))
    }

    /// `|F(x) - F(y)| / (diam Q (avg_Q |grad F|^q)^{1/q})` for nodes `x, y` in `Q`.
    pub fn check(&self, cube: &Cube, x: &[f64], y: &[f64]) -> Result<f64> {
        let grid = self.field.grid();
        let i = grid.node_at(x).ok_or_else(|| Error::NotANode(x.to_vec()))?;
        let j = grid.node_at(y).ok_or_else(|| Error::NotANode(y.to_vec()))?;
        for p in [x, y] {
            if !cube.contains_point_tol(p, 1e-9 * grid.spacing()) {
                return Err(Error::OutsideBox { point: p.to_vec() });
            }
        }
        let num = (self.field.get(i) - self.field.get(j)).abs();
        Ok(guarded_ratio(num, cube.diam() * self.power_mean(cube)?))
    }

    /// The ratio on `Q_xy = Q(x, ||x - y||)`, clipped to the grid exactly as the
    /// cube-average distance clips it.
    pub fn check_nodes(&self, i: usize, j: usize) -> f64 {
        let grid = self.field.grid();
        self.check_indices(&grid.multi_index(i), i, &grid.multi_index(j), j)
    }

    fn check_indices(&self, a: &[usize], i: usize, b: &[usize], j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let grid = self.field.grid();
        let (o, s) = (grid.origin(), grid.spacing());
        let mut k = 0;
        let mut r: f64 = 0.0;
        for t in 0..a.len() {
            k = k.max(a[t].abs_diff(b[t]));
            r = r.max(((o[t] + a[t] as f64 * s) - (o[t] + b[t] as f64 * s)).abs());
        }
        let w = window(a, k, grid.extents());
        let num = (self.field.get(i) - self.field.get(j)).abs();
        guarded_ratio(num, 2.0 * r * self.mean(&w).powf(1.0 / self.q))
    }

    /// Largest [`PoincareTable::check_nodes`] over all ordered node pairs, with the pair.
    pub fn max_over_pairs(&self) -> (f64, usize, usize) {
        let grid = self.field.grid();
        let idx: Vec<Vec<usize>> = (0..grid.len()).map(|i| grid.multi_index(i)).collect();
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut best = (0.0, i, i);
                for (j, b) in idx.iter().enumerate() {
                    let r = self.check_indices(&idx[i], i, b, j);
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
}

/// Sobolev–Poincaré ratio `|F(x) - F(y)| / (diam Q (avg_Q |grad F|^q)^{1/q})`.
pub fn sobolev_poincare_check(
    f: &ScalarField,
    q: f64,
    cube: &Cube,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    PoincareTable::from_field(f, q)?.check(cube, x, y)
}

/// Jet oscillation `|D^beta P_x(x) - D^beta P_y(x)|` of the Taylor jets of an
/// analytic `F` against `||x-y||^{m-|beta|} (avg_{Q_xy} (nabla^m F)^q)^{1/q}`.
#[derive(Clone, Debug)]
pub struct JetPoincare {
    f: AnalyticFunction,
    m: usize,
    table: PoincareTable,
}

impl JetPoincare {
    pub fn new(f: &AnalyticFunction, grid: &Grid, m: usize, q: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        let values = f.sample(grid)?;
        let top = ScalarField::from_fn(grid, |x| f.derivative_norm(m, x))?;
        Ok(Self {
            f: f.clone(),
            m,
            table: PoincareTable::new(&values, &top, q)?,
        })
    }

    pub fn check(&self, beta: &[usize], x: &[f64], y: &[f64]) -> Result<f64> {
        let order: usize = beta.iter().sum();
        if order + 1 > self.m {
            return Err(invalid(
                "beta",
                format!("|beta| = {order} must be at most m - 1"),
            ));
        }
        let r = sup_dist(x, y);
        if r == 0.0 {
            return Ok(0.0);
        }
        let px = self.f.taylor(x, self.m - 1);
        let py = self.f.taylor(y, self.m - 1);
        let num = (px.derivative_at(beta, x) - py.derivative_at(beta, x)).abs();
        let cube = Cube {
            center: x.to_vec(),
            half_side: r,
        };
        let den = r.powi((self.m - order) as i32) * self.table.power_mean(&cube)?;
        Ok(guarded_ratio(num, den))
    }
}

pub fn jet_poincare_check(
    f: &AnalyticFunction,
    grid: &Grid,
    m: usize,
    q: f64,
    beta: &[usize],
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    JetPoincare::new(f, grid, m, q)?.check(beta, x, y)
}

/// `F#(x) = max_r (1/r) avg_{Q(x,r)} |F - F_{Q(x,r)}|` over node windows of
/// `2k+1` nodes per axis (`r = (k + 1/2) spacing`, `k = 1, 2, 4, ...`) that fit
/// inside the grid. Nodes where no window fits get 0.
pub fn calderon_sharp(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let ext = grid.extents().to_vec();
    let s = grid.spacing();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let idx = grid.multi_index(i);
            let reach = idx
                .iter()
                .zip(&ext)
                .map(|(&j, &e)| j.min(e - 1 - j))
                .min()
                .unwrap_or(0);
            let mut best: f64 = 0.0;
            let mut k = 1;
            while k <= reach {
                let w = window(&idx, k, &ext);
                let mut vals = Vec::with_capacity(box_count(&w));
                grid.for_each_in_range(&w, |t| vals.push(f.get(t)));
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let dev = vals.iter().map(|v| (v - mean).abs()).sum::<f64>() / vals.len() as f64;
                best = best.max(dev / ((k as f64 + 0.5) * s));
                k *= 2;
            }
            best
        })
        .collect();
    ScalarField::from_parts_unchecked(grid.clone(), values)
}

/// `sigma = (p + q)/2`.
pub fn necessity_exponent(p: f64, q: f64) -> f64 {
    0.5 * (p + q)
}

/// `h = c M[|grad F|^sigma]^{1/sigma}`, `sigma = (p+q)/2`, from a sampled gradient
/// magnitude. `None` when the gradient vanishes identically (then `h = 0`).
pub fn necessity_weight_from_gradient(
    gradient: &ScalarField,
    p: f64,
    q: f64,
    c: f64,
) -> Result<Option<WeightField>> {
    let n = gradient.grid().dim();
    check_q(q, n)?;
    if !(p > q && p.is_finite()) {
        return Err(invalid("p", format!("{p} must exceed q = {q}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", format!("{c} must be positive and finite")));
    }
    if gradient.values().iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    let sigma = necessity_exponent(p, q);
    let m = hl_maximal(&gradient.map(|v| v.abs().powf(sigma))?);
    let h = m.map(|v| c * v.powf(1.0 / sigma))?;
    Ok(Some(WeightField::new(h)?))
}

/// [`necessity_weight_from_gradient`] with `|grad F|` by finite differences.
pub fn necessity_weight(f: &ScalarField, p: f64, q: f64, c: f64) -> Result<Option<WeightField>> {
    necessity_weight_from_gradient(&gradient_magnitude(f)?, p, q, c)
}

/// Current layout of the calibration sidecar.
pub const CALIBRATION_VERSION: u32 = 1;

/// A frozen Sobolev–Poincaré constant for one `(n, q)` and grid size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub n: usize,
    pub q: f64,
    pub per_axis: usize,
    /// Largest `|F(x)-F(y)| / (diam Q_xy (avg |grad F|^q)^{1/q})` over the corpus and all node pairs.
    pub poincare_constant: f64,
    /// `2 * poincare_constant`: the factor that makes `|F(x)-F(y)| <= delta_q(x, y : h)`.
    pub lipschitz_constant: f64,
    pub corpus_size: usize,
    pub worst_function: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    pub entries: Vec<CalibrationEntry>,
}

impl Calibration {
    pub fn new(entries: Vec<CalibrationEntry>) -> Self {
        Self {
            version: CALIBRATION_VERSION,
            entries,
        }
    }

    /// The entry for `(n, q)` on the finest grid recorded.
    pub fn lookup(&self, n: usize, q: f64) -> Option<&CalibrationEntry> {
        self.entries
            .iter()
            .filter(|e| e.n == n && (e.q - q).abs() < 1e-12)
            .max_by_key(|e| e.per_axis)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let c: Calibration = serde_json::from_str(&fs::read_to_string(path)?)?;
        if c.version != CALIBRATION_VERSION {
            return Err(invalid(
                "version",
                format!(
                    "calibration file has version {}, expected {CALIBRATION_VERSION}",
                    c.version
                ),
            ));
        }
        Ok(c)
    }
}

/// Sample every function on a cell-centered grid over `[-1, 1]^n` and take the
/// largest Sobolev–Poincaré ratio over all node pairs.
pub fn calibrate_poincare(
    corpus: &[AnalyticFunction],
    n: usize,
    q: f64,
    per_axis: usize,
) -> Result<CalibrationEntry> {
    if corpus.is_empty() {
        return Err(Error::EmptySet);
    }
    let grid = Grid::cell_centered(&Cube::new(vec![0.0; n], 1.0)?, per_axis)?;
    let ratios = corpus
        .iter()
        .map(|f| {
            let table = PoincareTable::from_field(&f.sample(&grid)?, q)?;
            Ok(table.max_over_pairs().0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (worst, c) = ratios.iter().enumerate().fold(
        (0, 0.0),
        |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc },
    );
    Ok(CalibrationEntry {
        n,
        q,
        per_axis,
        poincare_constant: c,
        lipschitz_constant: 2.0 * c,
        corpus_size: corpus.len(),
        worst_function: corpus[worst].name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, spacing: f64, origin: f64) -> Grid {
        Grid::new(vec![origin], spacing, vec![n]).unwrap()
    }

    #[test]
    fn stencils_match_known_weights() {
        assert_eq!(central_stencil(0), vec![1.0]);
        assert_eq!(central_stencil(1), vec![-0.5, 0.0, 0.5]);
        assert_eq!(central_stencil(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(central_stencil(3), vec![-0.5, 1.0, 0.0, -1.0, 0.5]);
        assert_eq!(central_stencil(4), vec![1.0, -4.0, 6.0, -4.0, 1.0]);
    }

    #[test]
    fn exact_on_low_degree_polynomials() {
        let g = Grid::new(vec![-1.0, -1.0], 0.125, vec![17, 17]).unwrap();
        let f = ScalarField::from_fn(&g, |x| 3.0 * x[0] - 2.0 * x[1] + 0.5).unwrap();
        let d = discrete_derivatives(&f, 1).unwrap();
        let inner = g.flat_index(&[5, 9]);
        assert!((d[&vec![1, 0]].get(inner) - 3.0).abs() < 1e-10);
        assert!((d[&vec![0, 1]].get(inner) + 2.0).abs() < 1e-10);
        let sq = ScalarField::from_fn(&line(21, 0.1, -1.0), |x| x[0] * x[0]).unwrap();
        let d2 = discrete_derivatives(&sq, 2).unwrap();
        for i in 1..20 {
            assert!((d2[&vec![2]].get(i) - 2.0).abs() < 1e-10);
        }
        // Degree m + 1 = 3 in two variables, mixed second derivatives.
        let c = ScalarField::from_fn(&g, |x| x[0] * x[0] * x[1] + x[1].powi(3)).unwrap();
        let d2 = discrete_derivatives(&c, 2).unwrap();
        let x = g.node(inner);
        assert!((d2[&vec![1, 1]].get(inner) - 2.0 * x[0]).abs() < 1e-10);
        assert!((d2[&vec![0, 2]].get(inner) - 6.0 * x[1]).abs() < 1e-10);
        assert!((d2[&vec![2, 0]].get(inner) - 2.0 * x[1]).abs() < 1e-10);
    }

    #[test]
    fn sine_error_is_second_order() {
        let err = |n: usize| {
            let s = 1.0 / n as f64;
            let f = ScalarField::from_fn(&line(n + 1, s, 0.0), |x| x[0].sin()).unwrap();
            let d = discrete_derivatives(&f, 1).unwrap();
            (1..n)
                .map(|i| (d[&vec![1]].get(i) - (i as f64 * s).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn grid_too_small_is_reported() {
        let f = ScalarField::constant(&line(4, 0.1, 0.0), 1.0).unwrap();
        assert!(matches!(
            discrete_derivatives(&f, 2),
            Err(Error::GridTooSmall { needed: 5, have: 4 })
        ));
    }

    #[test]
    fn seminorm_of_linear_function_on_unit_box() {
        // Cell-centered nodes on [-s, 1+s]; trimming one node per face leaves [0, 1].
        let n = 32;
        let s = 1.0 / n as f64;
        let g = Grid::new(vec![-0.5 * s, -0.5 * s], s, vec![n + 2, n + 2]).unwrap();
        let f = ScalarField::from_fn(&g, |x| 3.0 * x[0] + 4.0 * x[1]).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let r = sobolev_seminorm(&f, 1, p).unwrap();
            assert!((r.seminorm - 5.0).abs() < 1e-10);
            assert_eq!(r.boundary_policy.trimmed_margin, 1);
        }
        let back =
            SeminormReport::from_json(&sobolev_seminorm(&f, 1, 2.0).unwrap().to_json().unwrap())
                .unwrap();
        assert!((back.seminorm - 5.0).abs() < 1e-10);
    }

    #[test]
    fn seminorm_of_half_square() {
        let n = 64;
        let s = 1.0 / n as f64;
        let f = ScalarField::from_fn(&line(n + 2, s, -0.5 * s), |x| 0.5 * x[0] * x[0]).unwrap();
        let r = sobolev_seminorm(&f, 2, 2.0).unwrap();
        assert!((r.seminorm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn seminorm_is_homogeneous() {
        let g = line(50, 0.02, 0.0);
        let f = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin()).unwrap();
        let a = sobolev_seminorm(&f, 1, 2.0).unwrap().seminorm;
        let b = sobolev_seminorm(&f.scale(-2.5), 1, 2.0).unwrap().seminorm;
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn poincare_ratio_for_linear_function() {
        let g = line(41, 0.05, -1.0);
        let f = ScalarField::from_fn(&g, |x| 2.0 * x[0]).unwrap();
        let cube = Cube::new(vec![0.0], 0.5).unwrap();
        let r = sobolev_poincare_check(&f, 1.5, &cube, &[-0.5], &[0.5]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = sobolev_poincare_check(&f, 2.0, &cube, &[-0.25], &[0.25]).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        let c = ScalarField::constant(&g, 3.0).unwrap();
        assert_eq!(
            sobolev_poincare_check(&c, 2.0, &cube, &[-0.5], &[0.5]).unwrap(),
            0.0
        );
        assert!(sobolev_poincare_check(&f, 1.0, &cube, &[-0.5], &[0.5]).is_err());
    }

    #[test]
    fn jet_check_collapses_to_poincare_for_first_order() {
        let f = &crate::functions::corpus(1)[3];
        let g = Grid::cell_centered(&Cube::new(vec![0.0], 1.0).unwrap(), 64).unwrap();
        let x = g.node(20);
        let y = g.node(31);
        let jet = jet_poincare_check(f, &g, 1, 2.0, &[0], &x, &y).unwrap();
        let grad = ScalarField::from_fn(&g, |p| f.gradient_norm(p)).unwrap();
        let table = PoincareTable::new(&f.sample(&g).unwrap(), &grad, 2.0).unwrap();
        let sp = table.check_nodes(20, 31);
        assert!((jet - 2.0 * sp).abs() < 1e-12 * jet);
    }

    #[test]
    fn jet_check_vanishes_for_low_degree_polynomials() {
        use crate::functions::{AnalyticFunction, Factor};
        let f = AnalyticFunction::product(
            "x",
            1.5,
            vec![Factor::Power { k: 1 }, Factor::Power { k: 1 }],
        );
        let g = Grid::cell_centered(&Cube::new(vec![0.0, 0.0], 1.0).unwrap(), 16).unwrap();
        // x*y has degree 2 = m - 1 for m = 3.
        let r = jet_poincare_check(&f, &g, 3, 2.5, &[1, 0], &g.node(40), &g.node(200)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn sharp_function_of_linear_function() {
        let n = 513;
        let s = 1.0 / 512.0;
        let f = ScalarField::from_fn(&line(n, s, 0.0), |x| 3.0 * x[0]).unwrap();
        let fs = calderon_sharp(&f);
        // Largest fitting window k = 128: factor 1 - 1/(2k+1)^2 below |a|/2.
        assert!((fs.get(256) - 1.5).abs() < 1.5 * 1e-4);
        assert_eq!(fs.get(0), 0.0);
        let c = calderon_sharp(&ScalarField::constant(f.grid(), 2.0).unwrap());
        assert!(c.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn necessity_weight_of_linear_function() {
        let g = line(33, 1.0 / 32.0, 0.0);
        let f = ScalarField::from_fn(&g, |x| -2.0 * x[0]).unwrap();
        let h = necessity_weight(&f, 3.0, 2.0, 1.5).unwrap().unwrap();
        assert!(h.values().iter().all(|&v| (v - 3.0).abs() < 1e-9));
        let c = ScalarField::constant(&g, 1.0).unwrap();
        assert!(necessity_weight(&c, 3.0, 2.0, 1.0).unwrap().is_none());
        assert!(necessity_weight(&f, 1.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn calibration_round_trip() {
        let corpus = crate::functions::corpus(1);
        let e = calibrate_poincare(&corpus[..3], 1, 2.0, 32).unwrap();
        assert!(e.poincare_constant > 0.0 && e.poincare_constant.is_finite());
        assert_eq!(e.lipschitz_constant, 2.0 * e.poincare_constant);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cal.json");
        let c = Calibration::new(vec![e.clone()]);
        c.write(&path).unwrap();
        let back = Calibration::read(&path).unwrap();
        assert_eq!(back.lookup(1, 2.0), Some(&e));
        assert!(back.lookup(2, 2.0).is_none());
    }
}
