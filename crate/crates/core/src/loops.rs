//! Twisted loop algebra: matrix Laurent polynomials in the spectral
//! parameter, the splitting into polynomial and strictly negative parts, and
//! the equivariant vector fields that drive the Lax hierarchy.

use crate::algebra::{max_abs, Mat, SymmetricSpaceSpec};
use crate::error::{Error, Result};

/// `Σ_{k=lo}^{hi} μᵏ ξ_k` with dense coefficient storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Laurent {
    lo: i32,
    coeffs: Vec<Mat>,
}

impl Laurent {
    pub fn new(lo: i32, coeffs: Vec<Mat>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Structural(
                "Laurent polynomial needs a coefficient".into(),
            ));
        };
        let n = first.nrows();
        for c in &coeffs {
            if !c.is_square() || c.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.nrows(),
                });
            }
        }
        Ok(Self { lo, coeffs })
    }

    pub fn zero(n: usize, lo: i32, hi: i32) -> Self {
        let len = (hi - lo + 1).max(1) as usize;
        Self {
            lo,
            coeffs: vec![Mat::zeros(n, n); len],
        }
    }

    /// `μ^degree · m`.
    pub fn monomial(degree: i32, m: Mat) -> Self {
        Self {
            lo: degree,
            coeffs: vec![m],
        }
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }

    pub fn coeff(&self, degree: i32) -> Option<&Mat> {
        if degree < self.lo || degree > self.hi() {
            None
        } else {
            Some(&self.coeffs[(degree - self.lo) as usize])
        }
    }

    pub fn coeff_or_zero(&self, degree: i32) -> Mat {
        self.coeff(degree)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(self.dim(), self.dim()))
    }

    /// Value at `μ₀`. Negative degrees require `μ₀ ≠ 0`.
    pub fn eval(&self, mu: f64) -> Mat {
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        for (k, c) in self.coeffs.iter().enumerate() {
            let deg = self.lo + k as i32;
            out += c * mu.powi(deg);
        }
        out
    }

    /// Multiply by `μ^shift`.
    pub fn shift(mut self, shift: i32) -> Self {
        self.lo += shift;
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Laurent) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let coeffs = (lo..=hi)
            .map(|d| self.coeff_or_zero(d) + other.coeff_or_zero(d))
            .collect();
        Ok(Self { lo, coeffs })
    }

    pub fn sub(&self, other: &Laurent) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Keep only degrees in `lo..=hi`; an empty window yields a zero
    /// coefficient at `lo`.
    pub fn truncate(&self, lo: i32, hi: i32) -> Self {
        let lo2 = lo.max(self.lo);
        let hi2 = hi.min(self.hi());
        if lo2 > hi2 {
            return Self::zero(self.dim(), lo, lo);
        }
        Self {
            lo: lo2,
            coeffs: (lo2..=hi2).map(|d| self.coeff_or_zero(d)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(max_abs).fold(0.0, f64::max)
    }

    /// Largest coefficient entry outside `lo..=hi`.
    pub fn max_abs_outside(&self, lo: i32, hi: i32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let d = self.lo + *k as i32;
                d < lo || d > hi
            })
            .map(|(_, c)| max_abs(c))
            .fold(0.0, f64::max)
    }

    /// Distance from the twist condition: even coefficients in `k`, odd in
    /// `p`, everything in `g`.
    pub fn twist_residual(&self, spec: &SymmetricSpaceSpec) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (k, c) in self.coeffs.iter().enumerate() {
            let deg = self.lo + k as i32;
            let parity = if deg.rem_euclid(2) == 0 {
                spec.k_residual(c)?
            } else {
                spec.p_residual(c)?
            };
            worst = worst.max(parity).max(spec.space().membership_residual(c)?);
        }
        Ok(worst)
    }
}

/// Cauchy product of two matrix Laurent polynomials.
pub fn loop_mul(a: &Laurent, b: &Laurent) -> Result<Laurent> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let n = a.dim();
    let len = a.coeffs.len() + b.coeffs.len() - 1;
    let mut coeffs = vec![Mat::zeros(n, n); len];
    for (i, x) in a.coeffs.iter().enumerate() {
        for (j, y) in b.coeffs.iter().enumerate() {
            coeffs[i + j].gemm(1.0, x, y, 1.0);
        }
    }
    Ok(Laurent {
        lo: a.lo + b.lo,
        coeffs,
    })
}

/// Coefficientwise commutator `ξη − ηξ`.
pub fn loop_bracket(a: &Laurent, b: &Laurent) -> Result<Laurent> {
    loop_mul(a, b)?.sub(&loop_mul(b, a)?)
}

/// `π₊`: the polynomial part (degrees ≥ 0).
pub fn project_plus(x: &Laurent) -> Laurent {
    x.truncate(0, x.hi().max(0))
}

/// `π₋`: the part vanishing at infinity (degrees ≤ −1).
pub fn project_minus(x: &Laurent) -> Laurent {
    x.truncate(x.lo().min(-1), -1)
}

/// `R = (π₊ − π₋)/2`.
pub fn r_matrix(x: &Laurent) -> Laurent {
    Laurent {
        lo: x.lo,
        coeffs: x
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if x.lo + k as i32 >= 0 {
                    c * 0.5
                } else {
                    c * -0.5
                }
            })
            .collect(),
    }
}

/// A point of `Λ_d`: twisted polynomial loop with degrees `0..=d`, `d` odd.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxState {
    poly: Laurent,
}

impl LaxState {
    /// Coefficients `ξ₀, …, ξ_d`; checks shape and the parity of `d`.
    pub fn new(coeffs: Vec<Mat>) -> Result<Self> {
        if !coeffs.len().is_multiple_of(2) {
            return Err(Error::Structural(format!(
                "degree d = {} must be odd",
                coeffs.len() as i64 - 1
            )));
        }
        Ok(Self {
            poly: Laurent::new(0, coeffs)?,
        })
    }

    /// As [`LaxState::new`], additionally enforcing the twist condition.
    pub fn new_twisted(coeffs: Vec<Mat>, spec: &SymmetricSpaceSpec, tol: f64) -> Result<Self> {
        let s = Self::new(coeffs)?;
        if s.dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: s.dim(),
            });
        }
        let scale = s.poly.max_abs().max(1.0);
        let r = s.twist_residual(spec)?;
        if r > tol * scale {
            return Err(Error::Structural(format!(
                "coefficients violate the twist condition (residual {r:e})"
            )));
        }
        Ok(s)
    }

    pub fn degree(&self) -> usize {
        self.poly.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn coeffs(&self) -> &[Mat] {
        &self.poly.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Mat] {
        &mut self.poly.coeffs
    }

    pub fn as_laurent(&self) -> &Laurent {
        &self.poly
    }

    pub fn eval(&self, mu: f64) -> Mat {
        self.poly.eval(mu)
    }

    pub fn twist_residual(&self, spec: &SymmetricSpaceSpec) -> Result<f64> {
        self.poly.twist_residual(spec)
    }

    pub fn max_abs(&self) -> f64 {
        self.poly.max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.poly
            .coeffs
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// `self + s·other`, coefficientwise.
    pub fn axpy(&self, s: f64, other: &LaxState) -> LaxState {
        LaxState {
            poly: Laurent {
                lo: 0,
                coeffs: self
                    .poly
                    .coeffs
                    .iter()
                    .zip(&other.poly.coeffs)
                    .map(|(a, b)| a + b * s)
                    .collect(),
            },
        }
    }

    /// Largest coefficient difference.
    pub fn distance(&self, other: &LaxState) -> f64 {
        self.poly
            .coeffs
            .iter()
            .zip(&other.poly.coeffs)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }
}

/// Odd powers `r₁ < … < r_k` selecting the fields `V(X) = X^r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowFamily {
    powers: Vec<u32>,
}

impl FlowFamily {
    pub fn new(powers: Vec<u32>) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::Structural(
                "flow family needs at least one power".into(),
            ));
        }
        if let Some(r) = powers.iter().find(|r| *r % 2 == 0) {
            return Err(Error::Domain(format!(
                "power {r} is even; only odd powers are equivariant"
            )));
        }
        if powers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structural(
                "powers must be strictly increasing".into(),
            ));
        }
        Ok(Self { powers })
    }

    pub fn powers(&self) -> &[u32] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// `Ṽ(ξ)(μ) = μ^{1−dr} ξ(μ)^r` for odd `r`.
pub fn tilde_v(xi: &LaxState, r: u32) -> Result<Laurent> {
    if r == 0 || r.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "power {r} is not odd; X^r is not (−σ)-equivariant"
        )));
    }
    let d = xi.degree() as i32;
    let mut pow = xi.poly.clone();
    for _ in 1..r {
        pow = loop_mul(&pow, &xi.poly)?;
    }
    Ok(pow.shift(1 - d * r as i32))
}

/// `π₊Ṽ_r(ξ)`; its coefficients at degrees 0 and 1 are the connection
/// components.
pub fn positive_part(xi: &LaxState, r: u32) -> Result<Laurent> {
    Ok(project_plus(&tilde_v(xi, r)?))
}

/// The full Laurent bracket `[ξ, π₊Ṽ_r(ξ)]`, before truncation to `0..=d`.
pub fn flow_field_full(xi: &LaxState, r: u32) -> Result<Laurent> {
    loop_bracket(&xi.poly, &positive_part(xi, r)?)
}

/// `X_V(ξ) = [ξ, (R + ½)Ṽ(ξ)]` restricted to degrees `0..=d`.
pub fn flow_field(xi: &LaxState, r: u32) -> Result<LaxState> {
    let m = positive_part(xi, r)?;
    Ok(bracket_truncated(xi, &m))
}

/// Degrees `0..=d` of `[ξ, m]` for polynomial `m`.
pub(crate) fn bracket_truncated(xi: &LaxState, m: &Laurent) -> LaxState {
    let d = xi.degree();
    let n = xi.dim();
    let mut out = vec![Mat::zeros(n, n); d + 1];
    for (k, slot) in out.iter_mut().enumerate() {
        for (j, mj) in m.coeffs.iter().enumerate() {
            let deg = m.lo + j as i32;
            let i = k as i32 - deg;
            if i < 0 || i as usize > d {
                continue;
            }
            let x = &xi.poly.coeffs[i as usize];
            slot.gemm(1.0, x, mj, 1.0);
            slot.gemm(-1.0, mj, x, 1.0);
        }
    }
    LaxState {
        poly: Laurent { lo: 0, coeffs: out },
    }
}

/// `[tr ξ(μ₀)², tr ξ(μ₀)⁴, …, tr ξ(μ₀)^max_power]`. `μ₀ = 0` is a valid
/// evaluation point but only sees `ξ₀`.
pub fn spectral_invariants(xi: &LaxState, mu: f64, max_power: u32) -> Result<Vec<f64>> {
    if max_power < 2 || !max_power.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "max power {max_power} must be even and >= 2"
        )));
    }
    let x = xi.eval(mu);
    let x2 = &x * &x;
    let mut acc = x2.clone();
    let mut out = Vec::with_capacity(max_power as usize / 2);
    loop {
        out.push(acc.trace());
        if out.len() * 2 >= max_power as usize {
            break;
        }
        acc = &acc * &x2;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral_invariants"));
    }
    Ok(out)
}
