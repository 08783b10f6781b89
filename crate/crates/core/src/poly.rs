//! Multi-indices, polynomials in shifted monomials, and truncated Taylor
//! series with exact product, reciprocal and composition rules.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

pub type MultiIndex = Vec<usize>;

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `alpha!`.
pub fn multi_factorial(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

/// `alpha! / (alpha - beta)!`, or 0 when `beta` is not below `alpha`.
pub fn falling(alpha: &[usize], beta: &[usize]) -> f64 {
    let mut out = 1.0;
    for (&a, &b) in alpha.iter().zip(beta) {
        if b > a {
            return 0.0;
        }
        for i in (a - b + 1)..=a {
            out *= i as f64;
        }
    }
    out
}

/// Formats a multi-index as `(a0,a1,...)`.
pub fn format_index(alpha: &[usize]) -> String {
    let parts: Vec<String> = alpha.iter().map(|a| a.to_string()).collect();
    format!("({})", parts.join(","))
}

pub fn parse_index(s: &str) -> Result<MultiIndex> {
    let t = s.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("multi-index `{s}` is not parenthesized")))?;
    inner
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("multi-index `{s}`: {e}")))
        })
        .collect()
}

/// All multi-indices of length `n` and total degree at most `k`, graded,
/// then in decreasing lexicographic order within a degree.
#[derive(Debug)]
pub struct Basis {
    n: usize,
    degree: usize,
    list: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `product[i][j]` is the position of `list[i] + list[j]` when its degree fits.
    product: Vec<Vec<Option<usize>>>,
}

impl Basis {
    /// Shared basis for `(n, degree)`.
    pub fn get(n: usize, degree: usize) -> Arc<Basis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Basis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("basis cache poisoned");
        guard
            .entry((n, degree))
            .or_insert_with(|| Arc::new(Basis::build(n, degree)))
            .clone()
    }

    fn build(n: usize, degree: usize) -> Self {
        let mut list = Vec::new();
        for d in 0..=degree {
            let mut cur = vec![0; n];
            push_degree(&mut list, &mut cur, 0, d);
        }
        let lookup: HashMap<MultiIndex, usize> = list
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let product = list
            .iter()
            .map(|a| {
                list.iter()
                    .map(|b| {
                        let s: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                        lookup.get(&s).copied()
                    })
                    .collect()
            })
            .collect();
        Self {
            n,
            degree,
            list,
            lookup,
            product,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.list
    }

    pub fn position(&self, alpha: &[usize]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Positions of the indices of exact degree `d`.
    pub fn of_degree(&self, d: usize) -> impl Iterator<Item = usize> + '_ {
        self.list
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.iter().sum::<usize>() == d)
            .map(|(i, _)| i)
    }
}

fn push_degree(out: &mut Vec<MultiIndex>, cur: &mut [usize], axis: usize, left: usize) {
    if axis + 1 == cur.len() {
        cur[axis] = left;
        out.push(cur.to_vec());
        return;
    }
    for a in (0..=left).rev() {
        cur[axis] = a;
        push_degree(out, cur, axis + 1, left - a);
    }
    cur[axis] = 0;
}

/// `P(x) = sum_alpha c_alpha (x - base)^alpha` with `|alpha| <= degree`.
#[derive(Clone)]
pub struct Polynomial {
    basis: Arc<Basis>,
    base: Vec<f64>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Polynomial")
            .field("base", &self.base)
            .field("coeffs", &self.coefficient_map())
            .finish()
    }
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.basis.n == other.basis.n
            && self.basis.degree == other.basis.degree
            && self.base == other.base
            && self.coeffs == other.coeffs
    }
}

impl Polynomial {
    pub fn zero(base: Vec<f64>, degree: usize) -> Self {
        let basis = Basis::get(base.len(), degree);
        let coeffs = vec![0.0; basis.len()];
        Self {
            basis,
            base,
            coeffs,
        }
    }

    /// From coefficients listed in [`Basis`] order.
    pub fn from_coeffs(base: Vec<f64>, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let basis = Basis::get(base.len(), degree);
        if coeffs.len() != basis.len() {
            return Err(invalid(
                "coeffs",
                format!(
                    "expected {} coefficients, got {}",
                    basis.len(),
                    coeffs.len()
                ),
            ));
        }
        Ok(Self {
            basis,
            base,
            coeffs,
        })
    }

    pub fn from_map(
        base: Vec<f64>,
        degree: usize,
        map: &BTreeMap<MultiIndex, f64>,
    ) -> Result<Self> {
        let mut p = Self::zero(base, degree);
        for (alpha, &c) in map {
            if alpha.len() != p.dim() {
                return Err(Error::DimensionMismatch {
                    expected: p.dim(),
                    got: alpha.len(),
                });
            }
            let i = p.basis.position(alpha).ok_or_else(|| {
                invalid(
                    "coeffs",
                    format!("{} exceeds degree {degree}", format_index(alpha)),
                )
            })?;
            p.coeffs[i] = c;
        }
        Ok(p)
    }

    /// Taylor polynomial from derivative values `D^alpha F(base)`, in [`Basis`] order.
    pub fn from_derivatives(base: Vec<f64>, degree: usize, derivs: &[f64]) -> Result<Self> {
        let basis = Basis::get(base.len(), degree);
        if derivs.len() != basis.len() {
            return Err(invalid("derivs", "length does not match the basis"));
        }
        let coeffs = basis
            .list
            .iter()
            .zip(derivs)
            .map(|(a, d)| d / multi_factorial(a))
            .collect();
        Ok(Self {
            basis,
            base,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.n
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: &[usize]) -> f64 {
        self.basis.position(alpha).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn coefficient_map(&self) -> BTreeMap<MultiIndex, f64> {
        self.basis
            .list
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, c)| (a.clone(), *c))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.derivative_at(&vec![0; self.dim()], x)
    }

    /// `D^beta P(x)`.
    pub fn derivative_at(&self, beta: &[usize], x: &[f64]) -> f64 {
        let h: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let mut total = 0.0;
        for (alpha, &c) in self.basis.list.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let f = falling(alpha, beta);
            if f == 0.0 {
                continue;
            }
            let mut term = c * f;
            for a in 0..h.len() {
                term *= powu(h[a], alpha[a] - beta[a]);
            }
            total += term;
        }
        total
    }

    /// `D^beta P`, of degree `degree - |beta|` (a zero constant when `|beta|` exceeds it).
    pub fn derivative(&self, beta: &[usize]) -> Polynomial {
        let order: usize = beta.iter().sum();
        let degree = self.degree().saturating_sub(order);
        let mut out = Polynomial::zero(self.base.clone(), degree);
        for (alpha, &c) in self.basis.list.iter().zip(&self.coeffs) {
            let f = falling(alpha, beta);
            if f == 0.0 || c == 0.0 {
                continue;
            }
            let g: MultiIndex = alpha.iter().zip(beta).map(|(a, b)| a - b).collect();
            let i = out.basis.position(&g).expect("degree fits");
            out.coeffs[i] += c * f;
        }
        out
    }

    /// Same polynomial expanded about `base`.
    pub fn rebase(&self, base: &[f64]) -> Polynomial {
        let coeffs = self
            .basis
            .list
            .iter()
            .map(|g| self.derivative_at(g, base) / multi_factorial(g))
            .collect();
        Polynomial {
            basis: self.basis.clone(),
            base: base.to_vec(),
            coeffs,
        }
    }

    /// Same polynomial under another degree bound; terms above a smaller bound are dropped.
    pub fn with_degree(&self, degree: usize) -> Polynomial {
        if degree == self.degree() {
            return self.clone();
        }
        let mut out = Polynomial::zero(self.base.clone(), degree);
        for (alpha, &c) in self.basis.list.iter().zip(&self.coeffs) {
            if let Some(i) = out.basis.position(alpha) {
                out.coeffs[i] = c;
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + other`, re-expanded about `self`'s base; degrees are padded to the larger.
    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let degree = self.degree().max(other.degree());
        let mut a = self.with_degree(degree);
        let b = other.with_degree(degree).rebase(&self.base);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x += y;
        }
        Ok(a)
    }

    /// Taylor series of this polynomial at `x`, truncated at `order`.
    pub fn series_at(&self, x: &[f64], order: usize) -> Series {
        let basis = Basis::get(self.dim(), order);
        let coeffs = basis
            .list
            .iter()
            .map(|g| {
                if g.iter().sum::<usize>() > self.degree() {
                    0.0
                } else {
                    self.derivative_at(g, x) / multi_factorial(g)
                }
            })
            .collect();
        Series { basis, coeffs }
    }
}

fn powu(x: f64, k: usize) -> f64 {
    let mut out = 1.0;
    for _ in 0..k {
        out *= x;
    }
    out
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    base: Vec<f64>,
    degree: usize,
    coeffs: BTreeMap<String, f64>,
}

pub(crate) fn coeffs_to_keys(map: &BTreeMap<MultiIndex, f64>) -> BTreeMap<String, f64> {
    map.iter().map(|(a, c)| (format_index(a), *c)).collect()
}

pub(crate) fn keys_to_coeffs(map: &BTreeMap<String, f64>) -> Result<BTreeMap<MultiIndex, f64>> {
    map.iter().map(|(k, c)| Ok((parse_index(k)?, *c))).collect()
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolynomialRepr {
            base: self.base.clone(),
            degree: self.degree(),
            coeffs: coeffs_to_keys(&self.coefficient_map()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolynomialRepr::deserialize(d)?;
        let map = keys_to_coeffs(&r.coeffs).map_err(serde::de::Error::custom)?;
        Polynomial::from_map(r.base, r.degree, &map).map_err(serde::de::Error::custom)
    }
}

/// Truncated multivariate Taylor series `sum_alpha c_alpha h^alpha` about an
/// implicit expansion point. `D^alpha f(x0) = alpha! c_alpha`.
#[derive(Clone, Debug)]
pub struct Series {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl Series {
    pub fn zero(n: usize, order: usize) -> Self {
        let basis = Basis::get(n, order);
        let coeffs = vec![0.0; basis.len()];
        Self { basis, coeffs }
    }

    pub fn constant(n: usize, order: usize, c: f64) -> Self {
        let mut s = Self::zero(n, order);
        s.coeffs[0] = c;
        s
    }

    /// The affine function `x_axis = value + h_axis`.
    pub fn variable(n: usize, order: usize, axis: usize, value: f64) -> Self {
        let mut s = Self::constant(n, order, value);
        if order >= 1 {
            let mut e = vec![0; n];
            e[axis] = 1;
            let i = s.basis.position(&e).expect("degree-one index");
            s.coeffs[i] = 1.0;
        }
        s
    }

    /// From derivative values `D^alpha f(x0)` in [`Basis`] order.
    pub fn from_derivatives(n: usize, order: usize, derivs: &[f64]) -> Self {
        let basis = Basis::get(n, order);
        let coeffs = basis
            .list
            .iter()
            .zip(derivs)
            .map(|(a, d)| d / multi_factorial(a))
            .collect();
        Self { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.degree
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `D^alpha f(x0)`; zero beyond the truncation order.
    pub fn derivative(&self, alpha: &[usize]) -> f64 {
        self.basis
            .position(alpha)
            .map_or(0.0, |i| self.coeffs[i] * multi_factorial(alpha))
    }

    /// All derivatives in [`Basis`] order.
    pub fn derivatives(&self) -> Vec<f64> {
        self.basis
            .list
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| c * multi_factorial(a))
            .collect()
    }

    pub fn add(&self, other: &Series) -> Series {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Series) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &Series) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    pub fn scale(&self, c: f64) -> Series {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn mul(&self, other: &Series) -> Series {
        let mut out = Series {
            basis: self.basis.clone(),
            coeffs: vec![0.0; self.coeffs.len()],
        };
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if let Some(k) = self.basis.product[i][j] {
                    out.coeffs[k] += a * b;
                }
            }
        }
        out
    }

    /// `g(self)` from `[g(f0), g'(f0), ..., g^(K)(f0)]` at the constant term `f0`.
    pub fn compose(&self, derivs: &[f64]) -> Series {
        let order = self.order();
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let mut out = Series::constant(self.basis.n, order, derivs[0]);
        let mut power = Series::constant(self.basis.n, order, 1.0);
        for (k, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = power.mul(&u);
            out.add_scaled(d / factorial(k), &power);
        }
        out
    }

    pub fn exp(&self) -> Series {
        let e = self.value().exp();
        self.compose(&vec![e; self.order() + 1])
    }

    /// `1/self`; the constant term must be nonzero.
    pub fn recip(&self) -> Series {
        let y = self.value();
        let derivs: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(k) / y.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&derivs)
    }

    /// Replaces `h` by `h / rho`: the series of `x -> f(x0 + (x - x0)/rho)`.
    pub fn rescale(&self, rho: f64) -> Series {
        let mut out = self.clone();
        for (a, c) in self.basis.list.iter().zip(out.coeffs.iter_mut()) {
            *c /= rho.powi(a.iter().sum::<usize>() as i32);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basis_sizes_and_order() {
        let b = Basis::get(2, 3);
        assert_eq!(b.len(), 10);
        assert_eq!(b.indices()[0], vec![0, 0]);
        assert_eq!(b.indices()[1], vec![1, 0]);
        assert_eq!(b.indices()[2], vec![0, 1]);
        assert_eq!(Basis::get(1, 4).len(), 5);
        assert_eq!(Basis::get(3, 2).len(), 10);
    }

    #[test]
    fn index_round_trip() {
        assert_eq!(parse_index("(1, 0,2)").unwrap(), vec![1, 0, 2]);
        assert_eq!(format_index(&[3, 1]), "(3,1)");
        assert!(parse_index("1,2").is_err());
    }

    #[test]
    fn polynomial_eval_and_derivatives() {
        // P(x,y) = 1 + 2(x-1) + 3(x-1)(y+1) + (y+1)^2 about (1,-1).
        let mut m = BTreeMap::new();
        m.insert(vec![0, 0], 1.0);
        m.insert(vec![1, 0], 2.0);
        m.insert(vec![1, 1], 3.0);
        m.insert(vec![0, 2], 1.0);
        let p = Polynomial::from_map(vec![1.0, -1.0], 2, &m).unwrap();
        let (x, y) = (2.5, 0.5);
        let direct = 1.0 + 2.0 * 1.5 + 3.0 * 1.5 * 1.5 + 1.5 * 1.5;
        assert!((p.eval(&[x, y]) - direct).abs() < 1e-12);
        assert!((p.derivative_at(&[1, 0], &[x, y]) - (2.0 + 3.0 * 1.5)).abs() < 1e-12);
        assert!((p.derivative_at(&[0, 2], &[x, y]) - 2.0).abs() < 1e-12);
        assert_eq!(p.derivative_at(&[2, 0], &[x, y]), 0.0);
        let q = p.derivative(&[0, 1]);
        assert_eq!(q.degree(), 1);
        assert!((q.eval(&[x, y]) - (3.0 * 1.5 + 2.0 * 1.5)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rebase_preserves_values(
            c in prop::collection::vec(-3.0f64..3.0, 10),
            b in prop::collection::vec(-2.0f64..2.0, 2),
            x in prop::collection::vec(-2.0f64..2.0, 2),
        ) {
            let p = Polynomial::from_coeffs(vec![0.3, -0.7], 3, c).unwrap();
            let q = p.rebase(&b);
            prop_assert!((p.eval(&x) - q.eval(&x)).abs() < 1e-9);
            for beta in Basis::get(2, 3).indices() {
                prop_assert!((p.derivative_at(beta, &x) - q.derivative_at(beta, &x)).abs() < 1e-8);
            }
        }

        /// Taylor of a derivative is the derivative of the Taylor polynomial.
        #[test]
        fn derivative_commutes_with_taylor(
            c in prop::collection::vec(-3.0f64..3.0, 10),
            y in prop::collection::vec(-1.0f64..1.0, 2),
            x in prop::collection::vec(-1.0f64..1.0, 2),
        ) {
            let f = Polynomial::from_coeffs(vec![0.0, 0.0], 3, c).unwrap();
            let m = 2;
            let basis = Basis::get(2, m);
            let derivs: Vec<f64> = basis.indices().iter().map(|a| f.derivative_at(a, &y)).collect();
            let t = Polynomial::from_derivatives(y.clone(), m, &derivs).unwrap();
            for beta in [vec![1, 0], vec![0, 1]] {
                let db = f.derivative(&beta);
                let b1 = Basis::get(2, m - 1);
                let d2: Vec<f64> = b1.indices().iter().map(|a| db.derivative_at(a, &y)).collect();
                let lhs = Polynomial::from_derivatives(y.clone(), m - 1, &d2).unwrap();
                prop_assert!((lhs.eval(&x) - t.derivative(&beta).eval(&x)).abs() < 1e-9);
            }
        }

        #[test]
        fn series_product_matches_polynomial_product(
            a in prop::collection::vec(-2.0f64..2.0, 6),
            b in prop::collection::vec(-2.0f64..2.0, 6),
            x in prop::collection::vec(-1.0f64..1.0, 2),
        ) {
            let p = Polynomial::from_coeffs(vec![0.0, 0.0], 2, a).unwrap();
            let q = Polynomial::from_coeffs(vec![0.0, 0.0], 2, b).unwrap();
            // Degree 4 product is exact at order 4.
            let s = p.series_at(&x, 4).mul(&q.series_at(&x, 4));
            prop_assert!((s.value() - p.eval(&x) * q.eval(&x)).abs() < 1e-9);
            let d = s.derivative(&[1, 1]);
            let want = p.derivative_at(&[1, 1], &x) * q.eval(&x)
                + p.derivative_at(&[1, 0], &x) * q.derivative_at(&[0, 1], &x)
                + p.derivative_at(&[0, 1], &x) * q.derivative_at(&[1, 0], &x)
                + p.eval(&x) * q.derivative_at(&[1, 1], &x);
            prop_assert!((d - want).abs() < 1e-8);
        }
    }

    #[test]
    fn exp_and_reciprocal_series() {
        // f(t) = exp(t^2 + t) at t = 0.3: compare derivatives with closed forms.
        let t = Series::variable(1, 3, 0, 0.3);
        let g = t.mul(&t).add(&t).exp();
        let (u, du) = (0.3f64 * 0.3 + 0.3, 2.0 * 0.3 + 1.0);
        let e = u.exp();
        assert!((g.derivative(&[0]) - e).abs() < 1e-12);
        assert!((g.derivative(&[1]) - e * du).abs() < 1e-12);
        assert!((g.derivative(&[2]) - e * (du * du + 2.0)).abs() < 1e-11);
        assert!((g.derivative(&[3]) - e * (du.powi(3) + 6.0 * du)).abs() < 1e-10);
        // 1/(1+t) at t = 0.5.
        let r = Series::variable(1, 3, 0, 0.5)
            .add(&Series::constant(1, 3, 1.0))
            .recip();
        for k in 0..=3usize {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let want = sign * factorial(k) / 1.5f64.powi(k as i32 + 1);
            assert!((r.derivative(&[k]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn json_keys() {
        let mut m = BTreeMap::new();
        m.insert(vec![1, 0], 2.5);
        let p = Polynomial::from_map(vec![0.0, 1.0], 1, &m).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"(1,0)\":2.5"));
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
