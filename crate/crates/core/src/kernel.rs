//! Exact covariance kernels of derivative functionals of `G`.
//!
//! A kernel is `P(z, z̄, w̄, w) · e^{z w̄}` with `P` a sparse polynomial. It
//! represents `E[X(z) · conj(Y(w))]` where `X` and `Y` are linear
//! combinations of Wirtinger words applied to `G`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::HermitianCov;
use crate::C64;

/// Largest total order accepted by [`real_derivative_descriptor`].
pub const MAX_REAL_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("derivative order {order} exceeds cap {cap}")]
    OrderTooHigh { order: usize, cap: usize },
    #[error("cannot parse kernel line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Elementary operators that have kernel rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wirtinger {
    /// `∂ = ½(∂x − i∂y)`
    D,
    /// `∂̄ = ½(∂x + i∂y)`
    Dbar,
    /// multiplication by `z̄`
    MulConj,
}

/// User-facing operators; expanded into Wirtinger words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    D,
    Dbar,
    /// `∂̄* f = z̄ f − ∂f`
    CovStar,
    Dx,
    Dy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

/// Linear combination of Wirtinger words; each word lists operators in the
/// order they are applied to `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    terms: Vec<(C64, Vec<Wirtinger>)>,
}

impl Functional {
    pub fn identity() -> Self {
        Self { terms: vec![(C64::new(1.0, 0.0), Vec::new())] }
    }

    pub fn terms(&self) -> &[(C64, Vec<Wirtinger>)] {
        &self.terms
    }

    pub fn from_terms(terms: Vec<(C64, Vec<Wirtinger>)>) -> Self {
        Self { terms }
    }

    pub fn word(op: Wirtinger) -> Self {
        Self { terms: vec![(C64::new(1.0, 0.0), vec![op])] }
    }

    pub fn operator(op: Operator) -> Self {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let terms = match op {
            Operator::D => vec![(one, vec![Wirtinger::D])],
            Operator::Dbar => vec![(one, vec![Wirtinger::Dbar])],
            Operator::CovStar => vec![(one, vec![Wirtinger::MulConj]), (-one, vec![Wirtinger::D])],
            Operator::Dx => vec![(one, vec![Wirtinger::D]), (one, vec![Wirtinger::Dbar])],
            Operator::Dy => vec![(i, vec![Wirtinger::D]), (-i, vec![Wirtinger::Dbar])],
        };
        Self { terms }
    }

    /// `outer ∘ self`.
    pub fn then(&self, outer: &Functional) -> Functional {
        let mut terms = Vec::with_capacity(self.terms.len() * outer.terms.len());
        for (a, inner_word) in &self.terms {
            for (b, outer_word) in &outer.terms {
                let mut w = inner_word.clone();
                w.extend_from_slice(outer_word);
                terms.push((a * b, w));
            }
        }
        Functional { terms }
    }

    pub fn scaled(&self, c: C64) -> Functional {
        Functional { terms: self.terms.iter().map(|(a, w)| (a * c, w.clone())).collect() }
    }

    pub fn plus(&self, other: &Functional) -> Functional {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Functional { terms }
    }

    /// `∂^k`.
    pub fn d_pow(k: usize) -> Functional {
        Functional { terms: vec![(C64::new(1.0, 0.0), vec![Wirtinger::D; k])] }
    }

    /// Rewrites the functional, evaluated at `z0`, as `Σ_k a_k ∂^k G(z0)`
    /// using `∂̄G = 0`, `∂ z̄ = 0` and `∂̄ z̄ = 1`. Returns `a_0, a_1, ...`.
    pub fn analytic_coefficients(&self, z0: C64) -> Vec<C64> {
        // (j, k) -> coefficient of z̄^j ∂^k G
        let mut total: BTreeMap<(u32, u32), C64> = BTreeMap::new();
        for (c, word) in &self.terms {
            let mut cur: BTreeMap<(u32, u32), C64> = BTreeMap::new();
            cur.insert((0, 0), *c);
            for op in word {
                let mut next = BTreeMap::new();
                for (&(j, k), &v) in &cur {
                    match op {
                        Wirtinger::MulConj => *next.entry((j + 1, k)).or_insert(C64::new(0.0, 0.0)) += v,
                        Wirtinger::D => *next.entry((j, k + 1)).or_insert(C64::new(0.0, 0.0)) += v,
                        Wirtinger::Dbar => {
                            if j > 0 {
                                *next.entry((j - 1, k)).or_insert(C64::new(0.0, 0.0)) += v * j as f64;
                            }
                        }
                    }
                }
                cur = next;
            }
            for (key, v) in cur {
                *total.entry(key).or_insert(C64::new(0.0, 0.0)) += v;
            }
        }
        let kmax = total.keys().map(|&(_, k)| k as usize).max().unwrap_or(0);
        let mut out = vec![C64::new(0.0, 0.0); kmax + 1];
        for ((j, k), v) in total {
            out[k as usize] += v * z0.conj().powu(j);
        }
        out
    }
}

/// `(∂+∂̄)^m (i(∂−∂̄))^n`, i.e. the real derivative `f^{(m,n)}`.
pub fn real_derivative_descriptor(m: usize, n: usize) -> Result<Functional, KernelError> {
    real_derivative_descriptor_capped(m, n, MAX_REAL_ORDER)
}

pub fn real_derivative_descriptor_capped(
    m: usize,
    n: usize,
    cap: usize,
) -> Result<Functional, KernelError> {
    if m + n > cap {
        return Err(KernelError::OrderTooHigh { order: m + n, cap });
    }
    let mut f = Functional::identity();
    for _ in 0..m {
        f = f.then(&Functional::operator(Operator::Dx));
    }
    for _ in 0..n {
        f = f.then(&Functional::operator(Operator::Dy));
    }
    Ok(f)
}

/// A derivative functional of `G` at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivDescriptor {
    pub point: C64,
    pub functional: Functional,
}

impl DerivDescriptor {
    pub fn new(point: C64, functional: Functional) -> Self {
        Self { point, functional }
    }

    /// `G(z)`
    pub fn g(z: C64) -> Self {
        Self::new(z, Functional::identity())
    }

    /// `∂^k G(z)`
    pub fn dg(k: usize, z: C64) -> Self {
        Self::new(z, Functional::d_pow(k))
    }

    /// `F(z) = z̄G(z) − ∂G(z)`
    pub fn f(z: C64) -> Self {
        Self::new(z, Functional::operator(Operator::CovStar))
    }

    /// `∂F(z)`
    pub fn df(z: C64) -> Self {
        Self::new(z, Functional::operator(Operator::CovStar).then(&Functional::word(Wirtinger::D)))
    }

    /// `∂̄F(z)` (equal to `G(z)`)
    pub fn dbar_f(z: C64) -> Self {
        Self::new(z, Functional::operator(Operator::CovStar).then(&Functional::word(Wirtinger::Dbar)))
    }

    /// `F^{(m,n)}(z)`
    pub fn f_real(m: usize, n: usize, z: C64) -> Result<Self, KernelError> {
        let d = real_derivative_descriptor(m, n)?;
        Ok(Self::new(z, Functional::operator(Operator::CovStar).then(&d)))
    }

    /// Coefficients `r_n` with `X = Σ_{n<len} r_n ξ_n` for the series of `G`.
    pub fn coefficient_row(&self, len: usize) -> Vec<C64> {
        let a = self.functional.analytic_coefficients(self.point);
        let z = self.point;
        // u_m = z^m / √m!
        let mut u = vec![C64::new(0.0, 0.0); len];
        if len > 0 {
            u[0] = C64::new(1.0, 0.0);
        }
        for m in 1..len {
            u[m] = u[m - 1] * z / (m as f64).sqrt();
        }
        let mut row = vec![C64::new(0.0, 0.0); len];
        for (k, ak) in a.iter().enumerate() {
            if ak.norm() == 0.0 {
                continue;
            }
            for n in k..len {
                // √(n!/(n−k)!) u_{n−k}
                let falling: f64 = (n - k + 1..=n).map(|t| t as f64).product();
                row[n] += ak * falling.sqrt() * u[n - k];
            }
        }
        row
    }
}

/// `Σ c · z^a z̄^b w̄^c w^d · e^{z w̄}`, keyed by `[a, b, c, d]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolyExpKernel {
    coeffs: BTreeMap<[u32; 4], C64>,
}

/// Covariance kernel of `G`: the constant polynomial 1.
pub fn kernel_g() -> PolyExpKernel {
    let mut coeffs = BTreeMap::new();
    coeffs.insert([0, 0, 0, 0], C64::new(1.0, 0.0));
    PolyExpKernel { coeffs }
}

impl PolyExpKernel {
    pub fn coeffs(&self) -> &BTreeMap<[u32; 4], C64> {
        &self.coeffs
    }

    pub fn coefficient(&self, degree: [u32; 4]) -> C64 {
        self.coeffs.get(&degree).copied().unwrap_or_default()
    }

    fn add_term(&mut self, key: [u32; 4], v: C64) {
        let e = self.coeffs.entry(key).or_insert(C64::new(0.0, 0.0));
        *e += v;
        if *e == C64::new(0.0, 0.0) {
            self.coeffs.remove(&key);
        }
    }

    pub fn scaled(&self, c: C64) -> PolyExpKernel {
        let mut out = PolyExpKernel::default();
        for (&k, &v) in &self.coeffs {
            out.add_term(k, v * c);
        }
        out
    }

    pub fn add(&mut self, other: &PolyExpKernel) {
        for (&k, &v) in &other.coeffs {
            self.add_term(k, v);
        }
    }

    /// Applies one Wirtinger operator. On the second side the operator acts
    /// on `conj(f(w))`: `∂ ↦ ∂̄_w`, `∂̄ ↦ ∂_w`, `z̄· ↦ w·`.
    pub fn apply_wirtinger(&self, side: Side, op: Wirtinger) -> PolyExpKernel {
        let mut out = PolyExpKernel::default();
        for (&[a, b, c, d], &v) in &self.coeffs {
            match (side, op) {
                (Side::First, Wirtinger::D) => {
                    if a > 0 {
                        out.add_term([a - 1, b, c, d], v * a as f64);
                    }
                    out.add_term([a, b, c + 1, d], v);
                }
                (Side::First, Wirtinger::Dbar) => {
                    if b > 0 {
                        out.add_term([a, b - 1, c, d], v * b as f64);
                    }
                }
                (Side::First, Wirtinger::MulConj) => out.add_term([a, b + 1, c, d], v),
                (Side::Second, Wirtinger::D) => {
                    if c > 0 {
                        out.add_term([a, b, c - 1, d], v * c as f64);
                    }
                    out.add_term([a + 1, b, c, d], v);
                }
                (Side::Second, Wirtinger::Dbar) => {
                    if d > 0 {
                        out.add_term([a, b, c, d - 1], v * d as f64);
                    }
                }
                (Side::Second, Wirtinger::MulConj) => out.add_term([a, b, c, d + 1], v),
            }
        }
        out
    }

    /// Applies a functional on one side; second-side coefficients enter
    /// conjugated.
    pub fn apply_functional(&self, side: Side, f: &Functional) -> PolyExpKernel {
        let mut out = PolyExpKernel::default();
        for (c, word) in f.terms() {
            let mut k = self.clone();
            for &op in word {
                k = k.apply_wirtinger(side, op);
            }
            let coef = match side {
                Side::First => *c,
                Side::Second => c.conj(),
            };
            out.add(&k.scaled(coef));
        }
        out
    }

    pub fn apply_operator(&self, side: Side, op: Operator) -> PolyExpKernel {
        self.apply_functional(side, &Functional::operator(op))
    }

    pub fn eval(&self, z: C64, w: C64) -> C64 {
        let zb = z.conj();
        let wb = w.conj();
        let poly: C64 = self
            .coeffs
            .iter()
            .map(|(&[a, b, c, d], &v)| v * z.powu(a) * zb.powu(b) * wb.powu(c) * w.powu(d))
            .sum();
        poly * (z * wb).exp()
    }

    /// Polynomial part only (no exponential factor).
    pub fn eval_poly(&self, z: C64, w: C64) -> C64 {
        self.eval(z, w) * (-(z * w.conj())).exp()
    }
}

/// Kernel of `E[X(z) conj(Y(w))]`.
pub fn kernel_between(x: &Functional, y: &Functional) -> PolyExpKernel {
    kernel_g().apply_functional(Side::First, x).apply_functional(Side::Second, y)
}

/// Covariance matrix of the listed functionals.
pub fn eval_cov(descs: &[DerivDescriptor]) -> HermitianCov {
    HermitianCov::from_fn(descs.len(), |i, j| {
        kernel_between(&descs[i].functional, &descs[j].functional).eval(descs[i].point, descs[j].point)
    })
}

/// Cross-covariance `E[a_i conj(b_j)]`, row-major `a.len() × b.len()`.
pub fn cross_cov(a: &[DerivDescriptor], b: &[DerivDescriptor]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(kernel_between(&x.functional, &y.functional).eval(x.point, y.point));
        }
    }
    out
}

/// One monomial per line: `c * z^a zb^b wb^c w^d`.
impl fmt::Display for PolyExpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (&[a, b, c, d], v) in &self.coeffs {
            writeln!(f, "{} * z^{a} zb^{b} wb^{c} w^{d}", v)?;
        }
        Ok(())
    }
}

impl FromStr for PolyExpKernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut k = PolyExpKernel::default();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| KernelError::Parse { line: lineno + 1, reason: reason.into() };
            let (coef, mono) = line.split_once(" * ").ok_or_else(|| err("missing ' * '"))?;
            let v = C64::from_str(coef.trim()).map_err(|_| err("bad coefficient"))?;
            let mut key = [0u32; 4];
            let names = ["z", "zb", "wb", "w"];
            let parts: Vec<&str> = mono.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(err("expected four factors"));
            }
            for (slot, (part, name)) in parts.iter().zip(names).enumerate() {
                let (base, exp) = part.split_once('^').ok_or_else(|| err("missing '^'"))?;
                if base != name {
                    return Err(err("factors out of order"));
                }
                key[slot] = exp.parse().map_err(|_| err("bad exponent"))?;
            }
            k.add_term(key, v);
        }
        Ok(k)
    }
}
