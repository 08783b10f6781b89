//! Smooth test functions with exact derivatives of every order: finite sums
//! of products of one-variable factors.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid, ScalarField};
use crate::poly::{Basis, MultiIndex, Polynomial, Series};

/// One-variable factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    One,
    /// `t^k`.
    Power {
        k: usize,
    },
    /// `exp(rate t)`.
    Exp {
        rate: f64,
    },
    /// `sin(freq t + phase)`.
    Sin {
        freq: f64,
        phase: f64,
    },
    /// `exp(-((t - center)/width)^2)`.
    Gaussian {
        center: f64,
        width: f64,
    },
}

impl Factor {
    /// `j`-th derivative at `t`.
    pub fn derivative(&self, j: usize, t: f64) -> f64 {
        match *self {
            Factor::One => {
                if j == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Factor::Power { k } => {
                if j > k {
                    0.0
                } else {
                    let c: f64 = ((k - j + 1)..=k).map(|i| i as f64).product();
                    c * t.powi((k - j) as i32)
                }
            }
            Factor::Exp { rate } => rate.powi(j as i32) * (rate * t).exp(),
            Factor::Sin { freq, phase } => {
                freq.powi(j as i32)
                    * (freq * t + phase + j as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
            Factor::Gaussian { center, width } => {
                // d^j/du^j e^{-u^2} = (-1)^j H_j(u) e^{-u^2} with physicists' Hermite H_j.
                let u = (t - center) / width;
                let (mut h0, mut h1) = (1.0, 2.0 * u);
                let hj = match j {
                    0 => h0,
                    1 => h1,
                    _ => {
                        for i in 1..j {
                            let h2 = 2.0 * u * h1 - 2.0 * i as f64 * h0;
                            h0 = h1;
                            h1 = h2;
                        }
                        h1
                    }
                };
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * hj * (-u * u).exp() / width.powi(j as i32)
            }
        }
    }
}

/// `coef * prod_a factors[a](x_a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFunction {
    pub name: String,
    pub terms: Vec<Term>,
}

impl AnalyticFunction {
    pub fn new(name: impl Into<String>, terms: Vec<Term>) -> Self {
        Self {
            name: name.into(),
            terms,
        }
    }

    /// `coef * prod factors`.
    pub fn product(name: impl Into<String>, coef: f64, factors: Vec<Factor>) -> Self {
        Self::new(name, vec![Term { coef, factors }])
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.factors.len())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.derivative(&vec![0; x.len()], x)
    }

    /// `D^alpha F(x)`.
    pub fn derivative(&self, alpha: &[usize], x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.factors
                        .iter()
                        .zip(alpha.iter().zip(x))
                        .map(|(f, (&j, &v))| f.derivative(j, v))
                        .product::<f64>()
            })
            .sum()
    }

    /// Euclidean norm of the gradient.
    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        self.derivative_norm(1, x)
    }

    /// `(sum_{|alpha| = m} (D^alpha F(x))^2)^{1/2}`.
    pub fn derivative_norm(&self, m: usize, x: &[f64]) -> f64 {
        let b = Basis::get(x.len(), m);
        b.of_degree(m)
            .map(|i| self.derivative(&b.indices()[i], x).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn series(&self, x: &[f64], order: usize) -> Series {
        let b = Basis::get(x.len(), order);
        let d: Vec<f64> = b.indices().iter().map(|a| self.derivative(a, x)).collect();
        Series::from_derivatives(x.len(), order, &d)
    }

    /// Taylor polynomial of degree `degree` at `x`.
    pub fn taylor(&self, x: &[f64], degree: usize) -> Polynomial {
        let b = Basis::get(x.len(), degree);
        let d: Vec<f64> = b.indices().iter().map(|a| self.derivative(a, x)).collect();
        Polynomial::from_derivatives(x.to_vec(), degree, &d).expect("basis-sized derivatives")
    }

    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }

    pub fn sample_derivative(&self, alpha: &MultiIndex, grid: &Grid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.derivative(alpha, x))
    }
}

fn on_axis(n: usize, axis: usize, f: Factor) -> Vec<Factor> {
    (0..n)
        .map(|a| if a == axis { f.clone() } else { Factor::One })
        .collect()
}

/// Twenty fixed smooth functions on `R^n`, meant for the box `[-1, 1]^n`.
pub fn corpus(n: usize) -> Vec<AnalyticFunction> {
    use Factor::*;
    let last = n - 1;
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    let lin: Vec<Term> = (0..n)
        .map(|a| Term {
            coef: 1.0 + 0.5 * a as f64,
            factors: on_axis(n, a, Power { k: 1 }),
        })
        .collect();
    out.push(AnalyticFunction::new("linear", lin));
    out.push(AnalyticFunction::product(
        "square",
        0.5,
        on_axis(n, 0, Power { k: 2 }),
    ));
    out.push(AnalyticFunction::product(
        "cubic",
        1.0,
        on_axis(n, last, Power { k: 3 }),
    ));
    out.push(AnalyticFunction::product(
        "sin-pi",
        1.0,
        on_axis(
            n,
            0,
            Sin {
                freq: pi,
                phase: 0.0,
            },
        ),
    ));
    out.push(AnalyticFunction::product(
        "cos-3",
        1.0,
        on_axis(
            n,
            last,
            Sin {
                freq: 3.0,
                phase: 0.5 * pi,
            },
        ),
    ));
    out.push(AnalyticFunction::product(
        "exp",
        1.0,
        on_axis(n, 0, Exp { rate: 1.0 }),
    ));
    out.push(AnalyticFunction::product(
        "exp-neg",
        2.0,
        on_axis(n, last, Exp { rate: -1.5 }),
    ));
    out.push(AnalyticFunction::product(
        "bump-wide",
        1.0,
        vec![
            Gaussian {
                center: 0.0,
                width: 0.6
            };
            n
        ],
    ));
    out.push(AnalyticFunction::product(
        "bump-narrow",
        1.0,
        vec![
            Gaussian {
                center: 0.2,
                width: 0.25
            };
            n
        ],
    ));
    out.push(AnalyticFunction::product(
        "bump-offset",
        -1.5,
        (0..n)
            .map(|a| Gaussian {
                center: -0.3 + 0.1 * a as f64,
                width: 0.4,
            })
            .collect(),
    ));
    out.push(AnalyticFunction::product(
        "wave-product",
        1.0,
        (0..n)
            .map(|a| Sin {
                freq: 2.0 + a as f64,
                phase: 0.3,
            })
            .collect(),
    ));
    out.push(AnalyticFunction::product(
        "sin-fast",
        0.3,
        on_axis(
            n,
            0,
            Sin {
                freq: 7.0,
                phase: 0.1,
            },
        ),
    ));
    out.push(AnalyticFunction::product(
        "exp-sin",
        1.0,
        (0..n)
            .map(|a| {
                if a == 0 {
                    Exp { rate: 0.7 }
                } else {
                    Sin {
                        freq: 2.0,
                        phase: 0.0,
                    }
                }
            })
            .collect(),
    ));
    out.push(AnalyticFunction::product(
        "quartic",
        0.25,
        on_axis(n, 0, Power { k: 4 }),
    ));
    out.push(AnalyticFunction::new(
        "poly-mix",
        vec![
            Term {
                coef: 1.0,
                factors: on_axis(n, 0, Power { k: 2 }),
            },
            Term {
                coef: -0.5,
                factors: on_axis(n, last, Power { k: 3 }),
            },
            Term {
                coef: 0.25,
                factors: vec![Power { k: 1 }; n],
            },
        ],
    ));
    out.push(AnalyticFunction::new(
        "bump-pair",
        vec![
            Term {
                coef: 1.0,
                factors: vec![
                    Gaussian {
                        center: 0.4,
                        width: 0.3
                    };
                    n
                ],
            },
            Term {
                coef: -1.0,
                factors: vec![
                    Gaussian {
                        center: -0.4,
                        width: 0.3
                    };
                    n
                ],
            },
        ],
    ));
    out.push(AnalyticFunction::product(
        "gauss-wave",
        1.0,
        (0..n)
            .map(|a| {
                if a == 0 {
                    Gaussian {
                        center: 0.0,
                        width: 0.5,
                    }
                } else {
                    Sin {
                        freq: 3.0,
                        phase: 0.2,
                    }
                }
            })
            .collect(),
    ));
    out.push(AnalyticFunction::product(
        "sin-slow",
        2.0,
        on_axis(
            n,
            last,
            Sin {
                freq: 1.0,
                phase: 0.4,
            },
        ),
    ));
    out.push(AnalyticFunction::new(
        "exp-sum",
        (0..n)
            .map(|a| Term {
                coef: 1.0,
                factors: on_axis(
                    n,
                    a,
                    Exp {
                        rate: 0.5 + 0.5 * a as f64,
                    },
                ),
            })
            .collect(),
    ));
    out.push(AnalyticFunction::new(
        "wave-plus-line",
        vec![
            Term {
                coef: 0.5,
                factors: on_axis(
                    n,
                    0,
                    Sin {
                        freq: 4.0,
                        phase: 0.0,
                    },
                ),
            },
            Term {
                coef: 1.0,
                factors: on_axis(n, last, Power { k: 1 }),
            },
        ],
    ));
    out
}
