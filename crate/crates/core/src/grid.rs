//! Regular grids over boxes in R^n and the scalar fields sampled on them.
//!
//! Nodes are stored row-major: axis 0 is the slowest-varying index. A grid
//! built with [`Grid::cell_centered`] places one node at the midpoint of each
//! cell, so sums of node values times [`Grid::cell_volume`] are midpoint-rule
//! integrals over [`Grid::cell_bounds`].

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Cube;

/// Relative slack used when deciding whether a node lies on a cube face.
pub(crate) const NODE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: f64,
    extents: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: f64, extents: Vec<usize>) -> Result<Self> {
        if origin.is_empty() {
            return Err(invalid("origin", "zero-dimensional grid"));
        }
        if origin.len() != extents.len() {
            return Err(Error::DimensionMismatch {
                expected: origin.len(),
                got: extents.len(),
            });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid(
                "spacing",
                format!("{spacing} is not a positive real"),
            ));
        }
        if extents.contains(&0) {
            return Err(invalid("extents", "every axis needs at least one node"));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(invalid("origin", "non-finite coordinate"));
        }
        Ok(Self {
            origin,
            spacing,
            extents,
        })
    }

    /// Grid with `per_axis` cells along every axis of `bx`, one node at each cell midpoint.
    pub fn cell_centered(bx: &Cube, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(invalid("per_axis", "must be positive"));
        }
        let spacing = 2.0 * bx.half_side / per_axis as f64;
        let origin = bx
            .center
            .iter()
            .map(|c| c - bx.half_side + 0.5 * spacing)
            .collect();
        Self::new(origin, spacing, vec![per_axis; bx.dim()])
    }

    /// Halves the spacing while keeping the cell bounds fixed (each cell splits into 2^n).
    pub fn refine(&self) -> Self {
        let spacing = 0.5 * self.spacing;
        Self {
            origin: self.origin.iter().map(|o| o - 0.5 * spacing).collect(),
            spacing,
            extents: self.extents.iter().map(|e| 2 * e).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.extents[a + 1];
        }
        strides
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.extents)
            .fold(0, |acc, (&i, &e)| acc * e + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.extents[a];
            flat /= self.extents[a];
        }
        idx
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(flat, &mut out);
        out
    }

    pub fn node_into(&self, mut flat: usize, out: &mut [f64]) {
        for a in (0..self.dim()).rev() {
            let i = flat % self.extents[a];
            flat /= self.extents[a];
            out[a] = self.origin[a] + self.spacing * i as f64;
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Lowest and highest node coordinate per axis.
    pub fn node_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let hi = self
            .origin
            .iter()
            .zip(&self.extents)
            .map(|(o, &e)| o + self.spacing * (e - 1) as f64)
            .collect();
        (self.origin.clone(), hi)
    }

    /// Union of the cells around the nodes: the midpoint-rule integration domain.
    pub fn cell_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.node_bounds();
        let h = 0.5 * self.spacing;
        (
            lo.iter().map(|v| v - h).collect(),
            hi.iter().map(|v| v + h).collect(),
        )
    }

    /// Measure of the cell domain.
    pub fn domain_volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    /// Inclusive node index ranges of the nodes lying in the closed cube, clipped to the grid.
    /// `None` when no node lies in the cube.
    pub fn node_range(&self, cube: &Cube) -> Option<Vec<(usize, usize)>> {
        if cube.dim() != self.dim() {
            return None;
        }
        let lo: Vec<f64> = cube.center.iter().map(|c| c - cube.half_side).collect();
        let hi: Vec<f64> = cube.center.iter().map(|c| c + cube.half_side).collect();
        self.node_range_box(&lo, &hi)
    }

    /// As [`Grid::node_range`] for the closed box `[lo, hi]`.
    pub fn node_range_box(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<(usize, usize)>> {
        if lo.len() != self.dim() || hi.len() != self.dim() {
            return None;
        }
        let mut out = Vec::with_capacity(self.dim());
        for a in 0..self.dim() {
            let l = (lo[a] - self.origin[a]) / self.spacing;
            let h = (hi[a] - self.origin[a]) / self.spacing;
            let l = (l - NODE_EPS).ceil().max(0.0);
            let h = (h + NODE_EPS).floor().min((self.extents[a] - 1) as f64);
            if l > h {
                return None;
            }
            out.push((l as usize, h as usize));
        }
        Some(out)
    }

    /// Whether the closed cube reaches outside the node hull.
    pub fn clips(&self, cube: &Cube) -> bool {
        let (lo, hi) = self.node_bounds();
        let tol = NODE_EPS * self.spacing;
        (0..self.dim()).any(|a| {
            cube.center[a] - cube.half_side < lo[a] - tol
                || cube.center[a] + cube.half_side > hi[a] + tol
        })
    }

    /// Flat index of the node at `point` when `point` is (up to rounding) a node.
    pub fn node_at(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for a in 0..self.dim() {
            let t = (point[a] - self.origin[a]) / self.spacing;
            let r = t.round();
            if (t - r).abs() > 1e-6 || r < 0.0 || r as usize >= self.extents[a] {
                return None;
            }
            idx.push(r as usize);
        }
        Some(self.flat_index(&idx))
    }

    /// Flat index of the node nearest to `point` (clamped into the grid).
    pub fn nearest_node(&self, point: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let t = ((point[a] - self.origin[a]) / self.spacing).round();
                t.clamp(0.0, (self.extents[a] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Calls `f` with the flat index of every node in the inclusive index box.
    pub fn for_each_in_range(&self, range: &[(usize, usize)], mut f: impl FnMut(usize)) {
        let n = self.dim();
        let mut idx: Vec<usize> = range.iter().map(|r| r.0).collect();
        loop {
            f(self.flat_index(&idx));
            let mut a = n;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                if idx[a] < range[a].1 {
                    idx[a] += 1;
                    break;
                }
                idx[a] = range[a].0;
            }
        }
    }

    /// Inclusive index box of the nodes at least `margin` positions away from every face.
    pub fn interior(&self, margin: usize) -> Option<Vec<(usize, usize)>> {
        self.extents
            .iter()
            .map(|&e| {
                if e > 2 * margin {
                    Some((margin, e - 1 - margin))
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Real samples on every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite sample at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut buf = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node_into(i, &mut buf);
                f(&buf)
            })
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn abs(&self) -> Self {
        Self::from_parts_unchecked(
            self.grid.clone(),
            self.values.iter().map(|v| v.abs()).collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_parts_unchecked(
            self.grid.clone(),
            self.values.iter().map(|v| c * v).collect(),
        )
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint-rule L_p norm over the whole cell domain.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let vol = self.grid.cell_volume();
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * vol).powf(1.0 / p)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("index");
        for a in 0..self.grid.dim() {
            out.push_str(&format!(",x{a}"));
        }
        out.push_str(",value\n");
        let mut buf = vec![0.0; self.grid.dim()];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.node_into(i, &mut buf);
            out.push_str(&i.to_string());
            for x in &buf {
                out.push_str(&format!(",{x:e}"));
            }
            out.push_str(&format!(",{v:e}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Reads the `index,...,value` CSV written by [`ScalarField::write_csv`] onto `grid`.
    pub fn read_csv(grid: &Grid, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut values = vec![f64::NAN; grid.len()];
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("line {}: `{line}`", lineno + 1));
            let i: usize = cols
                .first()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(bad)?;
            let v: f64 = cols
                .last()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(bad)?;
            if i >= values.len() {
                return Err(bad());
            }
            values[i] = v;
        }
        Self::new(grid.clone(), values)
    }

    /// Little-endian f64 row-major dump plus a `<path>.json` sidecar describing the grid.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        let sidecar = BinarySidecar {
            grid: self.grid.clone(),
            dtype: "f64-le".into(),
            order: "row-major".into(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let sidecar: BinarySidecar =
            serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        if sidecar.dtype != "f64-le" || sidecar.order != "row-major" {
            return Err(Error::Parse(format!(
                "unsupported layout {}/{}",
                sidecar.dtype, sidecar.order
            )));
        }
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * sidecar.grid.len() {
            return Err(Error::Parse("binary size does not match grid".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(sidecar.grid, values)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[derive(Serialize, Deserialize)]
struct BinarySidecar {
    grid: Grid,
    dtype: String,
    order: String,
}

/// A nonnegative, not identically zero field.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField(ScalarField);

impl WeightField {
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some(i) = field.values().iter().position(|&v| v < 0.0) {
            return Err(invalid(
                "weight",
                format!("negative value {} at node {i}", field.values()[i]),
            ));
        }
        if field.values().iter().all(|&v| v == 0.0) {
            return Err(invalid("weight", "identically zero"));
        }
        Ok(Self(field))
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(ScalarField::from_fn(grid, f)?)
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// Pointwise power w^t.
    pub fn powf(&self, t: f64) -> Result<Self> {
        Self::new(self.0.map(|v| v.powf(t))?)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.0.scale(c))
    }
}
