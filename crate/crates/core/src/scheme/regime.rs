//! Operating regimes and exact exponent arithmetic.

use std::fmt;

use num_rational::Rational64;

use crate::error::{Error, Result};

/// Operating regime of an `(n, A0)` network for an inner exponent `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    /// `A0 <= n`: the network is dense at wavelength scale.
    R1,
    /// `A0 > n^2`: cluster MIMO is DoF-unconstrained.
    R2,
    /// `n^{2(4-b)/(5-2b)} < A0 <= n^2`.
    R3a,
    /// `n < A0 <= n^{2(4-b)/(5-2b)}`.
    R3b,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::R1 => "R1",
            RegimeLabel::R2 => "R2",
            RegimeLabel::R3a => "R3a",
            RegimeLabel::R3b => "R3b",
        }
    }

    /// Whether the label is one of the two DoF-limited sub-cases.
    pub fn is_r3(&self) -> bool {
        matches!(self, RegimeLabel::R3a | RegimeLabel::R3b)
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A regime label with the quantities it was decided from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub label: RegimeLabel,
    pub n: f64,
    pub a0: f64,
    pub n_squared: f64,
    /// `n^{2(4-b)/(5-2b)}`, the boundary between the R3 sub-cases.
    pub r3_threshold: f64,
}

/// Exponent `2(4-b)/(5-2b)` of the R3a/R3b boundary.
pub fn r3_threshold_exponent(b: Rational64) -> Rational64 {
    let two = Rational64::from_integer(2);
    two * (Rational64::from_integer(4) - b) / (Rational64::from_integer(5) - two * b)
}

pub(crate) fn check_b(b: Rational64) -> Result<()> {
    if b < Rational64::from_integer(0) || b >= Rational64::from_integer(1) {
        return Err(Error::InvalidParameter(format!("inner exponent b must lie in [0, 1), got {b}")));
    }
    Ok(())
}

pub(crate) fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Classifies `(n, a0)` for inner exponent `b`.
pub fn classify_regime(n: usize, a0: f64, b: Rational64) -> Result<Regime> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("regime needs n >= 2, got {n}")));
    }
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidParameter(format!("a0 must be positive, got {a0}")));
    }
    check_b(b)?;
    let nf = n as f64;
    let n_squared = nf * nf;
    let r3_threshold = nf.powf(to_f64(r3_threshold_exponent(b)));
    let label = if a0 <= nf {
        RegimeLabel::R1
    } else if a0 > n_squared {
        RegimeLabel::R2
    } else if a0 > r3_threshold {
        RegimeLabel::R3a
    } else {
        RegimeLabel::R3b
    };
    Ok(Regime { label, n: nf, a0, n_squared, r3_threshold })
}

/// Next exponent of the recursion, `1 / (2 - b)`.
pub fn next_exponent(b: Rational64) -> Rational64 {
    (Rational64::from_integer(2) - b).recip()
}

/// Exponent reached after `h` recursion steps from TDMA.
pub fn exponent_after(h: usize) -> Rational64 {
    (0..h).fold(Rational64::from_integer(0), |b, _| next_exponent(b))
}

/// `n^{e_n} A0^{e_a}` with rational exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monomial {
    pub n_exp: Rational64,
    pub a0_exp: Rational64,
}

impl std::ops::Mul for Monomial {
    type Output = Monomial;
    fn mul(self, other: Monomial) -> Monomial {
        Monomial::new(self.n_exp + other.n_exp, self.a0_exp + other.a0_exp)
    }
}

impl std::ops::Div for Monomial {
    type Output = Monomial;
    fn div(self, other: Monomial) -> Monomial {
        Monomial::new(self.n_exp - other.n_exp, self.a0_exp - other.a0_exp)
    }
}

impl Monomial {
    pub fn new(n_exp: Rational64, a0_exp: Rational64) -> Self {
        Self { n_exp, a0_exp }
    }

    pub fn one() -> Self {
        Self::new(Rational64::from_integer(0), Rational64::from_integer(0))
    }

    pub fn n() -> Self {
        Self::new(Rational64::from_integer(1), Rational64::from_integer(0))
    }

    pub fn a0() -> Self {
        Self::new(Rational64::from_integer(0), Rational64::from_integer(1))
    }

    pub fn pow(self, e: Rational64) -> Self {
        Self::new(self.n_exp * e, self.a0_exp * e)
    }

    pub fn eval(&self, n: f64, a0: f64) -> f64 {
        n.powf(to_f64(self.n_exp)) * a0.powf(to_f64(self.a0_exp))
    }
}

/// Cluster size of the A0-limited sub-case as a monomial,
/// `n^{2/(2-b)} A0^{-1/(2(2-b))}`.
pub fn r3a_cluster_monomial(b: Rational64) -> Monomial {
    let inv = next_exponent(b);
    Monomial::new(Rational64::from_integer(2) * inv, -inv / 2)
}

/// Cluster area `M A0 / n` in units where the node density is `n / A0`.
pub fn cluster_area_monomial(m: Monomial) -> Monomial {
    m * Monomial::a0() / Monomial::n()
}
