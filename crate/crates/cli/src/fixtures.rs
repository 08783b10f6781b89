//! Weight fixtures on `[-1, 1]^n` shared by the suite and the acceptance run.

use sobolev_trace::{Cube, Grid, Result, WeightField};

#[derive(Clone, Copy, Debug)]
pub struct WeightFixture {
    pub name: &'static str,
    /// Whether the weight is an A1 weight on the whole space.
    pub a1: bool,
    eval: fn(&[f64]) -> f64,
}

impl WeightFixture {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn sample(&self, grid: &Grid) -> Result<WeightField> {
        WeightField::from_fn(grid, self.eval)
    }

    /// The field `w^{1/q}`, i.e. the `h` with `h^q = w`.
    pub fn root(&self, grid: &Grid, q: f64) -> Result<WeightField> {
        self.sample(grid)?.powf(1.0 / q)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn constant(_: &[f64]) -> f64 {
    1.0
}

fn inverse_power(x: &[f64]) -> f64 {
    norm(x).powf(-0.5 * x.len() as f64)
}

fn two_valued(x: &[f64]) -> f64 {
    if x[0] < 0.1 {
        1.0
    } else {
        4.0
    }
}

fn smooth(x: &[f64]) -> f64 {
    1.0 + 4.0 * x.iter().map(|v| v * v).sum::<f64>()
}

fn shifted_power(x: &[f64]) -> f64 {
    let d = x.iter().fold(0.0f64, |m, v| m.max((v - 0.3).abs()));
    (d + 0.05).powf(-0.8 * x.len() as f64)
}

fn vanishing_power(x: &[f64]) -> f64 {
    norm(x).powi(2)
}

/// Flat on `x_0 >= 0`, decaying faster than any power as `x_0 -> 0^-`.
fn wall(x: &[f64]) -> f64 {
    if x[0] >= 0.0 {
        1.0
    } else {
        (-1.0 / x[0].abs().sqrt()).exp()
    }
}

/// Five A1 weights followed by two that are not A1.
pub fn weight_fixtures() -> Vec<WeightFixture> {
    vec![
        WeightFixture {
            name: "constant",
            a1: true,
            eval: constant,
        },
        WeightFixture {
            name: "inverse-power",
            a1: true,
            eval: inverse_power,
        },
        WeightFixture {
            name: "two-valued",
            a1: true,
            eval: two_valued,
        },
        WeightFixture {
            name: "smooth",
            a1: true,
            eval: smooth,
        },
        WeightFixture {
            name: "shifted-power",
            a1: true,
            eval: shifted_power,
        },
        WeightFixture {
            name: "vanishing-power",
            a1: false,
            eval: vanishing_power,
        },
        WeightFixture {
            name: "wall",
            a1: false,
            eval: wall,
        },
    ]
}

pub fn fixture(name: &str) -> Option<WeightFixture> {
    weight_fixtures().into_iter().find(|f| f.name == name)
}

/// Cell-centered grid on `[-1, 1]^n`.
pub fn unit_grid(n: usize, per_axis: usize) -> Result<Grid> {
    Grid::cell_centered(&Cube::new(vec![0.0; n], 1.0)?, per_axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sobolev_trace::maximal::a1_norm;

    #[test]
    fn a1_estimates_separate_the_fixtures() {
        for f in weight_fixtures() {
            let small = a1_norm(&f.sample(&unit_grid(1, 64).unwrap()).unwrap()).norm_estimate;
            let large = a1_norm(&f.sample(&unit_grid(1, 256).unwrap()).unwrap()).norm_estimate;
            if f.a1 {
                assert!(
                    large < 1.25 * small + 1e-9,
                    "{}: {small} -> {large}",
                    f.name
                );
            } else {
                assert!(large > 1.5 * small, "{}: {small} -> {large}", f.name);
            }
        }
    }
}
