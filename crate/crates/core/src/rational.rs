//! Exact rational arithmetic helpers and the extended value `[0, ∞]`.
//!
//! Every quantity in the logic core is an exact nonnegative rational; the
//! formal infinity shows up only for gauges of the ideal point and for
//! suprema of unbounded moduli.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

/// Shorthand for an integer rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for `p/q`.
pub fn ratio(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn is_nonneg(x: &Rat) -> bool {
    !x.is_negative()
}

/// Parses `p`, `-p`, or `p/q`.
pub fn parse_rat(text: &str) -> Result<Rat, String> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n, d),
        None => (text, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| format!("bad rational numerator in {text:?}"))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| format!("bad rational denominator in {text:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {text:?}"));
    }
    Ok(Rat::new(n, d))
}

/// Renders `p/q` (or plain `p` for integers), matching the structured
/// output convention used everywhere in this project.
pub fn rat_str(x: &Rat) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Least integer `>= x`, as a rational.
pub fn ceil_rat(x: &Rat) -> Rat {
    Rat::from_integer(x.ceil().to_integer())
}

/// `2^m` for `m >= 0`.
pub fn pow2(m: u32) -> Rat {
    Rat::from_integer(BigInt::one() << m)
}

/// Whether `x = k / 2^m` for naturals `k`, `m`; returns `(k, m)` reduced.
pub fn as_dyadic(x: &Rat) -> Option<(BigInt, u32)> {
    if x.is_negative() {
        return None;
    }
    let den = x.denom();
    let bits = den.bits();
    if den == &(BigInt::one() << (bits - 1)) {
        Some((x.numer().clone(), (bits - 1) as u32))
    } else {
        None
    }
}

pub fn rat_min(a: &Rat, b: &Rat) -> Rat {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn rat_max(a: &Rat, b: &Rat) -> Rat {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// Truncated subtraction `x ∸ y = max(x - y, 0)`.
pub fn monus(a: &Rat, b: &Rat) -> Rat {
    let d = a - b;
    if d.is_negative() {
        Rat::zero()
    } else {
        d
    }
}

/// Approximate float view, for report formatting only.
pub fn rat_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A nonnegative rational extended with a formal `∞`.
///
/// Ordered the obvious way; arithmetic is restricted to the total cases
/// used by the library (reciprocals and comparisons).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendedValue {
    Finite(Rat),
    Infinity,
}

impl ExtendedValue {
    pub fn finite(x: Rat) -> Self {
        ExtendedValue::Finite(x)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedValue::Infinity)
    }

    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            ExtendedValue::Finite(x) => Some(x),
            ExtendedValue::Infinity => None,
        }
    }

    /// `1/x` with `1/0 = ∞` and `1/∞ = 0`.
    pub fn recip_of(x: &Rat) -> ExtendedValue {
        if x.is_zero() {
            ExtendedValue::Infinity
        } else {
            ExtendedValue::Finite(x.recip())
        }
    }

    pub fn min(self, other: ExtendedValue) -> ExtendedValue {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: ExtendedValue) -> ExtendedValue {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Scales by a positive rational; `c · ∞ = ∞`.
    pub fn scale(&self, c: &Rat) -> ExtendedValue {
        match self {
            ExtendedValue::Finite(x) => ExtendedValue::Finite(c * x),
            ExtendedValue::Infinity => ExtendedValue::Infinity,
        }
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtendedValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.cmp(b),
            (Finite(_), Infinity) => Ordering::Less,
            (Infinity, Finite(_)) => Ordering::Greater,
            (Infinity, Infinity) => Ordering::Equal,
        }
    }
}

impl PartialEq<Rat> for ExtendedValue {
    fn eq(&self, other: &Rat) -> bool {
        matches!(self, ExtendedValue::Finite(x) if x == other)
    }
}

impl PartialOrd<Rat> for ExtendedValue {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        match self {
            ExtendedValue::Finite(x) => x.partial_cmp(other),
            ExtendedValue::Infinity => Some(Ordering::Greater),
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(x) => write!(f, "{}", rat_str(x)),
            ExtendedValue::Infinity => write!(f, "inf"),
        }
    }
}
