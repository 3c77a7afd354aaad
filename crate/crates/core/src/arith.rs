//! Arbitrary-precision real and complex arithmetic.
//!
//! Every computation in the crate runs against a [`PrecisionContext`]. The
//! context fixes the working precision once per run; values created through it
//! all share that precision, so mixed-precision arithmetic never happens by
//! accident.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::float::Round;
use rug::ops::Pow;
use rug::{Assign, Float};
use thiserror::Error;

/// Working real type.
pub type Real = Float;

/// Smallest accepted working precision, in decimal digits.
pub const MIN_DIGITS: u32 = 30;

/// Extra binary digits carried beyond the nominal decimal precision.
const GUARD_BITS: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("precision of {0} decimal digits is below the minimum of {MIN_DIGITS}")]
    PrecisionTooLow(u32),
    #[error("malformed decimal string {0:?}")]
    Malformed(String),
}

/// Working precision and the tolerances derived from it.
#[derive(Debug, Clone)]
pub struct PrecisionContext {
    digits: u32,
    bits: u32,
    unit_roundoff: Real,
    identity_tol: Real,
}

impl PrecisionContext {
    pub fn new(decimal_digits: u32) -> Result<Self, ArithError> {
        if decimal_digits < MIN_DIGITS {
            return Err(ArithError::PrecisionTooLow(decimal_digits));
        }
        let bits = (f64::from(decimal_digits) * std::f64::consts::LOG2_10).ceil() as u32 + GUARD_BITS;
        let unit_roundoff = pow10_with_bits(bits, -(decimal_digits as i32));
        let identity_tol = pow10_with_bits(bits, -(decimal_digits as i32) + 10);
        Ok(Self {
            digits: decimal_digits,
            bits,
            unit_roundoff,
            identity_tol,
        })
    }

    /// A context carrying `extra` more decimal digits, with the same
    /// tolerances. Used internally where intermediate cancellation is known.
    pub fn extended(&self, extra: u32) -> Self {
        let bits = self.bits + (f64::from(extra) * std::f64::consts::LOG2_10).ceil() as u32;
        Self {
            digits: self.digits + extra,
            bits,
            unit_roundoff: Float::with_val(bits, &self.unit_roundoff),
            identity_tol: Float::with_val(bits, &self.identity_tol),
        }
    }

    /// Replaces the identity tolerance; it must stay above the unit roundoff.
    pub fn with_identity_tol(mut self, tol: Real) -> Self {
        assert!(tol > self.unit_roundoff, "identity tolerance must exceed unit roundoff");
        self.identity_tol = Float::with_val(self.bits, tol);
        self
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// Binary precision of every value created through this context.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn unit_roundoff(&self) -> &Real {
        &self.unit_roundoff
    }

    pub fn identity_tol(&self) -> &Real {
        &self.identity_tol
    }

    pub fn real<T>(&self, value: T) -> Real
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits, value)
    }

    pub fn zero(&self) -> Real {
        Float::new(self.bits)
    }

    pub fn one(&self) -> Real {
        self.real(1)
    }

    /// Exact-as-possible `num / den`.
    pub fn ratio(&self, num: i64, den: i64) -> Real {
        self.real(num) / den
    }

    pub fn pow10(&self, exponent: i32) -> Real {
        pow10_with_bits(self.bits, exponent)
    }

    pub fn pi(&self) -> Real {
        self.real(rug::float::Constant::Pi)
    }

    /// Rounds `x` to this context's precision.
    pub fn round(&self, x: &Real) -> Real {
        Float::with_val(self.bits, x)
    }

    pub fn parse(&self, s: &str) -> Result<Real, ArithError> {
        parse_decimal(s, self)
    }

    pub fn format(&self, x: &Real) -> String {
        format_decimal(x, self)
    }
}

fn pow10_with_bits(bits: u32, exponent: i32) -> Real {
    Float::with_val(bits, 10).pow(exponent)
}

fn is_valid_decimal(s: &str) -> bool {
    let bytes = s.as_bytes();
    let mut i = 0;
    if matches!(bytes.first(), Some(b'+') | Some(b'-')) {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut mantissa_digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        mantissa_digits += i - frac_start;
    }
    if mantissa_digits == 0 {
        return false;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if matches!(bytes.get(i), Some(b'+') | Some(b'-')) {
            i += 1;
        }
        let exp_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == bytes.len()
}

/// Parses a signed decimal with optional fraction and exponent (`-1.25e-3`).
pub fn parse_decimal(s: &str, ctx: &PrecisionContext) -> Result<Real, ArithError> {
    let trimmed = s.trim();
    if !is_valid_decimal(trimmed) {
        return Err(ArithError::Malformed(s.to_string()));
    }
    let parsed = Float::parse(trimmed).map_err(|_| ArithError::Malformed(s.to_string()))?;
    Ok(Float::with_val(ctx.bits, parsed))
}

/// Formats `x` with exactly `ctx.digits()` significant digits.
///
/// Values with a decimal exponent in `[-5, digits]` are written positionally
/// (`0.333…`), everything else in scientific form (`1.234…e-120`).
pub fn format_decimal(x: &Real, ctx: &PrecisionContext) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf".into() } else { "inf".into() };
    }
    let digits = ctx.digits as usize;
    if x.is_zero() {
        return format!("0.{}", "0".repeat(digits));
    }
    let (negative, mantissa, exp) = x.to_sign_string_exp_round(10, Some(digits), Round::Nearest);
    // value = 0.mantissa × 10^exp
    let exp = exp.unwrap_or(0);
    let sign = if negative { "-" } else { "" };
    let digits_i = digits as i32;
    if (-5..=0).contains(&exp) {
        format!("{sign}0.{}{mantissa}", "0".repeat((-exp) as usize))
    } else if exp > 0 && exp <= digits_i {
        let (int_part, frac_part) = mantissa.split_at(exp as usize);
        if frac_part.is_empty() {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    } else {
        let (lead, rest) = mantissa.split_at(1);
        format!("{sign}{lead}.{rest}e{}", exp - 1)
    }
}

/// Complex number as a pair of reals at a shared precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        Self { re, im }
    }

    pub fn from_real(re: Real) -> Self {
        let im = Float::new(re.prec());
        Self { re, im }
    }

    pub fn zero(ctx: &PrecisionContext) -> Self {
        Self::new(ctx.zero(), ctx.zero())
    }

    pub fn one(ctx: &PrecisionContext) -> Self {
        Self::new(ctx.one(), ctx.zero())
    }

    /// |z|²
    pub fn norm_sqr(&self) -> Real {
        self.re.clone().square() + &self.im.clone().square()
    }

    pub fn abs(&self) -> Real {
        self.re.clone().hypot(&self.im)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn scale(&self, s: &Real) -> Self {
        Self::new(self.re.clone() * s, self.im.clone() * s)
    }

    /// Division; `None` when the divisor is exactly zero.
    pub fn checked_div(&self, rhs: &Complex) -> Option<Complex> {
        let den = rhs.norm_sqr();
        if den.is_zero() {
            return None;
        }
        let num = self * &rhs.conj();
        Some(Complex::new(num.re / &den, num.im / &den))
    }

    pub fn exp(&self) -> Complex {
        let modulus = self.re.clone().exp();
        let (s, c) = self.im.clone().sin_cos(Float::new(self.im.prec()));
        Complex::new(c * &modulus, s * &modulus)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let re = self.re.to_f64();
        let im = self.im.to_f64();
        if im < 0.0 {
            write!(f, "{re:e}-{:e}i", -im)
        } else {
            write!(f, "{re:e}+{im:e}i")
        }
    }
}

impl Add for &Complex {
    type Output = Complex;
    fn add(self, rhs: &Complex) -> Complex {
        Complex::new(self.re.clone() + &rhs.re, self.im.clone() + &rhs.im)
    }
}

impl Sub for &Complex {
    type Output = Complex;
    fn sub(self, rhs: &Complex) -> Complex {
        Complex::new(self.re.clone() - &rhs.re, self.im.clone() - &rhs.im)
    }
}

impl Mul for &Complex {
    type Output = Complex;
    fn mul(self, rhs: &Complex) -> Complex {
        let re = self.re.clone() * &rhs.re - self.im.clone() * &rhs.im;
        let im = self.re.clone() * &rhs.im + self.im.clone() * &rhs.re;
        Complex::new(re, im)
    }
}

impl Neg for Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex::new(-self.re, -self.im)
    }
}

/// Largest absolute entry of a slice (zero for an empty slice).
pub fn max_abs<'a, I>(values: I, ctx: &PrecisionContext) -> Real
where
    I: IntoIterator<Item = &'a Real>,
{
    let mut best = ctx.zero();
    for v in values {
        let a = v.clone().abs();
        if a > best {
            best = a;
        }
    }
    best
}
