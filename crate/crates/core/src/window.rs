//! Box-window primitives on row-major n-dimensional arrays: prefix sums,
//! clipped sliding extrema, and a sparse table for range extrema.

use crate::grid::Grid;

/// Inclusive index box, one `(lo, hi)` pair per axis.
pub type IndexBox = Vec<(usize, usize)>;

/// n-dimensional summed-area table.
///
/// A box sum is a signed combination of `2^n` table entries, so its absolute
/// error scales with the grand total. Sums that come out small against the
/// total are recomputed directly from the stored values.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    ext: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<f64>,
    values: Vec<f64>,
    magnitude: f64,
}

/// Relative size below which a table-derived box sum is recomputed.
const CANCELLATION_LIMIT: f64 = 1e-6;

impl PrefixSums {
    pub fn new(extents: &[usize], values: &[f64]) -> Self {
        let n = extents.len();
        let ext: Vec<usize> = extents.iter().map(|e| e + 1).collect();
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * ext[a + 1];
        }
        let total: usize = ext.iter().product();
        let mut table = vec![0.0; total];
        // Scatter values at offset (+1,...,+1), then cumulative sums along each axis.
        let src = Strides::of(extents);
        let mut idx = vec![0usize; n];
        for (flat, &v) in values.iter().enumerate() {
            src.unflatten(flat, &mut idx);
            let t: usize = idx.iter().zip(&strides).map(|(i, s)| (i + 1) * s).sum();
            table[t] = v;
        }
        for a in 0..n {
            let s = strides[a];
            for t in 0..total {
                if !(t / s).is_multiple_of(ext[a]) {
                    table[t] += table[t - s];
                }
            }
        }
        Self {
            ext,
            strides,
            table,
            values: values.to_vec(),
            magnitude: values.iter().map(|v| v.abs()).sum(),
        }
    }

    pub fn sum(&self, range: &[(usize, usize)]) -> f64 {
        let n = range.len();
        let mut total = 0.0;
        for mask in 0..1usize << n {
            let mut t = 0;
            let mut sign = 1.0;
            for (a, &(lo, hi)) in range.iter().enumerate() {
                if mask >> a & 1 == 1 {
                    t += lo * self.strides[a];
                    sign = -sign;
                } else {
                    t += (hi + 1) * self.strides[a];
                }
            }
            total += sign * self.table[t];
        }
        if total.abs() < CANCELLATION_LIMIT * self.magnitude {
            return self.direct_sum(range);
        }
        total
    }

    fn direct_sum(&self, range: &[(usize, usize)]) -> f64 {
        let n = range.len();
        // Source strides are the table strides with every extent reduced by one.
        let mut src = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            src[a] = src[a + 1] * (self.ext[a + 1] - 1);
        }
        let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
        let mut total = 0.0;
        'outer: loop {
            let base: usize = idx[..n - 1].iter().zip(&src).map(|(i, s)| i * s).sum();
            let (lo, hi) = range[n - 1];
            total += self.values[base + lo..=base + hi].iter().sum::<f64>();
            for a in (0..n - 1).rev() {
                if idx[a] < range[a].1 {
                    idx[a] += 1;
                    continue 'outer;
                }
                idx[a] = range[a].0;
            }
            break;
        }
        total
    }

    pub fn extents(&self) -> Vec<usize> {
        self.ext.iter().map(|e| e - 1).collect()
    }
}

pub fn box_count(range: &[(usize, usize)]) -> usize {
    range.iter().map(|(lo, hi)| hi - lo + 1).product()
}

/// Clipped window of radius `k` around a multi-index.
pub fn window(idx: &[usize], k: usize, extents: &[usize]) -> IndexBox {
    idx.iter()
        .zip(extents)
        .map(|(&i, &e)| (i.saturating_sub(k), (i + k).min(e - 1)))
        .collect()
}

#[derive(Clone, Debug)]
pub(crate) struct Strides {
    ext: Vec<usize>,
}

impl Strides {
    pub(crate) fn of(extents: &[usize]) -> Self {
        Self {
            ext: extents.to_vec(),
        }
    }

    pub(crate) fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.ext.len()).rev() {
            out[a] = flat % self.ext[a];
            flat /= self.ext[a];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

impl Extreme {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Extreme::Max => a >= b,
            Extreme::Min => a <= b,
        }
    }

    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Extreme::Max => a.max(b),
            Extreme::Min => a.min(b),
        }
    }
}

/// Extreme over the clipped window of radius `k` around every index.
pub fn sliding_extreme(extents: &[usize], values: &[f64], k: usize, op: Extreme) -> Vec<f64> {
    let mut cur = values.to_vec();
    let n = extents.len();
    let mut stride = 1;
    let mut strides = vec![0; n];
    for a in (0..n).rev() {
        strides[a] = stride;
        stride *= extents[a];
    }
    let mut line = Vec::new();
    let mut out_line = Vec::new();
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for a in 0..n {
        let e = extents[a];
        let s = strides[a];
        let mut next = cur.clone();
        // Enumerate line starts: all indices with coordinate 0 along axis a.
        for start in 0..cur.len() {
            if !(start / s).is_multiple_of(e) {
                continue;
            }
            line.clear();
            line.extend((0..e).map(|i| cur[start + i * s]));
            out_line.clear();
            out_line.resize(e, 0.0);
            deque.clear();
            let mut pushed = 0;
            for (i, slot) in out_line.iter_mut().enumerate() {
                let hi = (i + k).min(e - 1);
                while pushed <= hi {
                    while let Some(&b) = deque.back() {
                        if op.better(line[pushed], line[b]) {
                            deque.pop_back();
                        } else {
                            break;
                        }
                    }
                    deque.push_back(pushed);
                    pushed += 1;
                }
                let lo = i.saturating_sub(k);
                while let Some(&f) = deque.front() {
                    if f < lo {
                        deque.pop_front();
                    } else {
                        break;
                    }
                }
                *slot = line[*deque.front().expect("window is nonempty")];
            }
            for (i, v) in out_line.iter().enumerate() {
                next[start + i * s] = *v;
            }
        }
        cur = next;
    }
    cur
}

/// Average over the clipped window of radius `k` around every index.
pub fn window_averages(extents: &[usize], sums: &PrefixSums, k: usize) -> Vec<f64> {
    let total: usize = extents.iter().product();
    let st = Strides::of(extents);
    let mut idx = vec![0; extents.len()];
    (0..total)
        .map(|flat| {
            st.unflatten(flat, &mut idx);
            let w = window(&idx, k, extents);
            sums.sum(&w) / box_count(&w) as f64
        })
        .collect()
}

/// Sparse table answering max/min over arbitrary index boxes with `2^n` lookups.
#[derive(Clone, Debug)]
pub struct RangeTable {
    extents: Vec<usize>,
    logs: Vec<usize>,
    op: Extreme,
    /// Indexed by the mixed-radix combination of per-axis log levels.
    tables: Vec<Vec<f64>>,
}

impl RangeTable {
    pub fn new(extents: &[usize], values: &[f64], op: Extreme) -> Self {
        let n = extents.len();
        let logs: Vec<usize> = extents.iter().map(|&e| floor_log2(e) + 1).collect();
        let combos: usize = logs.iter().product();
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * extents[a + 1];
        }
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(combos);
        let mut level = vec![0usize; n];
        for c in 0..combos {
            decode(c, &logs, &mut level);
            if c == 0 {
                tables.push(values.to_vec());
                continue;
            }
            // Derive from the combination with the last nonzero axis level decremented.
            let a = (0..n).rev().find(|&a| level[a] > 0).expect("nonzero level");
            let mut prev = level.clone();
            prev[a] -= 1;
            let src = &tables[encode(&prev, &logs)];
            let shift = 1usize << prev[a];
            let e = extents[a];
            let s = strides[a];
            let t: Vec<f64> = (0..src.len())
                .map(|i| {
                    let coord = (i / s) % e;
                    if coord + shift < e {
                        op.pick(src[i], src[i + shift * s])
                    } else {
                        src[i]
                    }
                })
                .collect();
            tables.push(t);
        }
        Self {
            extents: extents.to_vec(),
            logs,
            op,
            tables,
        }
    }

    pub fn query(&self, range: &[(usize, usize)]) -> f64 {
        let n = self.extents.len();
        let levels: Vec<usize> = range
            .iter()
            .map(|(lo, hi)| floor_log2(hi - lo + 1))
            .collect();
        let table = &self.tables[encode(&levels, &self.logs)];
        let mut best = match self.op {
            Extreme::Max => f64::NEG_INFINITY,
            Extreme::Min => f64::INFINITY,
        };
        for mask in 0..1usize << n {
            let mut flat = 0;
            for a in 0..n {
                let (lo, hi) = range[a];
                let i = if mask >> a & 1 == 1 {
                    hi + 1 - (1usize << levels[a])
                } else {
                    lo
                };
                flat = flat * self.extents[a] + i;
            }
            best = self.op.pick(best, table[flat]);
        }
        best
    }
}

fn floor_log2(x: usize) -> usize {
    debug_assert!(x > 0);
    (usize::BITS - 1 - x.leading_zeros()) as usize
}

fn decode(mut c: usize, radix: &[usize], out: &mut [usize]) {
    for a in (0..radix.len()).rev() {
        out[a] = c % radix[a];
        c /= radix[a];
    }
}

fn encode(levels: &[usize], radix: &[usize]) -> usize {
    levels
        .iter()
        .zip(radix)
        .fold(0, |acc, (&l, &r)| acc * r + l)
}

/// Node-centered candidate cubes: every node is a center, and the half-side
/// runs over a ladder. Level `0` stands for half-side `spacing/2` (the cube
/// holding only its center node); level `k >= 1` for half-side `k * spacing`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeFamily {
    levels: Vec<usize>,
}

impl CubeFamily {
    /// Every integer level up to the one that covers the grid from any center.
    pub fn full(grid: &Grid) -> Self {
        let top = grid.extents().iter().copied().max().unwrap_or(1) - 1;
        Self {
            levels: (0..=top).collect(),
        }
    }

    /// Levels `0, 1, 2, 4, ...`, up to the first that covers the grid.
    pub fn dyadic(grid: &Grid) -> Self {
        let top = grid.extents().iter().copied().max().unwrap_or(1) - 1;
        let mut levels = vec![0];
        let mut k = 1;
        while k < top {
            levels.push(k);
            k *= 2;
        }
        if top > 0 {
            levels.push(top.min(k));
        }
        levels.dedup();
        Self { levels }
    }

    pub fn from_levels(mut levels: Vec<usize>) -> Self {
        levels.sort_unstable();
        levels.dedup();
        Self { levels }
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn half_side(level: usize, spacing: f64) -> f64 {
        if level == 0 {
            0.5 * spacing
        } else {
            level as f64 * spacing
        }
    }
}
