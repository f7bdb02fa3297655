//! Scalar abstractions.
//!
//! Analytic quantities (moments, quadrature, tilt solving) are written against
//! [`Real`], implemented for `f32` and `f64`. Generating-function coefficients
//! are written against [`Coefficient`], which additionally admits exact
//! rationals so that partition numbers and similar tables can be produced
//! without rounding.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Floating point scalar used by all analytic routines.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every literal used by the crate is
    /// representable (possibly rounded) in both `f32` and `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float converts")
    }

    /// Machine epsilon scaled into a usable relative tolerance floor.
    fn tol_floor() -> Self {
        Self::epsilon() * Self::lit(8.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field-like scalar for Taylor coefficient tables.
pub trait Coefficient:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    /// Whether arithmetic in this type is exact.
    const EXACT: bool;

    /// Exact conversion from a double. Floats convert to themselves; rationals
    /// take the dyadic value of the double, so `0.1` becomes `3602879701896397/2^55`.
    fn from_f64_exact(x: f64) -> Option<Self>;

    fn from_u64(n: u64) -> Self;

    fn to_f64(&self) -> f64;

    /// Natural logarithm, valid for positive values whose magnitude exceeds
    /// the `f64` range.
    fn ln(&self) -> f64;

    /// Text form used by the coefficient CSV.
    fn render(&self) -> String;

    fn is_integer(&self) -> bool;
}

impl Coefficient for f64 {
    const EXACT: bool = false;

    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ln(&self) -> f64 {
        f64::ln(*self)
    }

    fn render(&self) -> String {
        format_float(*self)
    }

    fn is_integer(&self) -> bool {
        self.fract() == 0.0
    }
}

impl Coefficient for f32 {
    const EXACT: bool = false;

    fn from_f64_exact(x: f64) -> Option<Self> {
        let y = x as f32;
        (y.is_finite() && y as f64 == x).then_some(y)
    }

    fn from_u64(n: u64) -> Self {
        n as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn ln(&self) -> f64 {
        (*self as f64).ln()
    }

    fn render(&self) -> String {
        format_float(*self as f64)
    }

    fn is_integer(&self) -> bool {
        self.fract() == 0.0
    }
}

impl Coefficient for BigRational {
    const EXACT: bool = true;

    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        let v = ToPrimitive::to_f64(self).unwrap_or(f64::NAN);
        if v.is_finite() {
            v
        } else {
            let l = Coefficient::ln(self);
            if self.is_negative() {
                -l.exp()
            } else {
                l.exp()
            }
        }
    }

    fn ln(&self) -> f64 {
        if !self.is_positive() {
            return if self.is_zero() { f64::NEG_INFINITY } else { f64::NAN };
        }
        ln_bigint(self.numer()) - ln_bigint(self.denom())
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn is_integer(&self) -> bool {
        self.denom().is_one()
    }
}

/// Natural logarithm of a positive big integer.
pub fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().map(f64::ln).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top: BigInt = n >> (shift as usize);
    top.to_f64().expect("64-bit prefix").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Formats a double with 17 significant digits, positional where the decimal
/// exponent is moderate and scientific otherwise. Output is locale-free.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..=16).contains(&exp) {
        return sci;
    }
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let point = exp as usize + 1;
        out.push_str(&digits[..point]);
        out.push('.');
        out.push_str(&digits[point..]);
    }
    if out.contains('.') {
        let trimmed = out.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        out
    }
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}
