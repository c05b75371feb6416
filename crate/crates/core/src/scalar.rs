//! Numeric backends for worth, probabilities and budgets.
//!
//! Everything in the crate is generic over [`Scalar`]. `f64` is the usual
//! choice; [`BigRational`] gives exact arithmetic, which matters when
//! mathematically tied policies would otherwise be separated by rounding.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// A real-number type usable as worth and probability.
pub trait Scalar:
    Clone + Debug + PartialEq + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// False for NaN and infinities.
    fn is_finite_value(&self) -> bool;

    /// Parses a decimal literal (`-1.25`, `3e-4`) or a fraction (`7/3`).
    fn parse_decimal(text: &str) -> Option<Self>;

    /// Text that [`Scalar::parse_decimal`] maps back to exactly `self`.
    fn to_decimal(&self) -> String;

    /// Converts a small constant such as a default tolerance.
    fn constant(text: &str) -> Self {
        Self::parse_decimal(text).expect("valid scalar constant")
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn is_finite_value(&self) -> bool {
                self.is_finite()
            }

            fn parse_decimal(text: &str) -> Option<Self> {
                let text = text.trim();
                let value =
                    if text.contains('/') { parse_rational(text)?.to_f64()? as $t } else { text.parse::<$t>().ok()? };
                value.is_finite().then_some(value)
            }

            fn to_decimal(&self) -> String {
                // Display prints the shortest digits that round-trip.
                format!("{}", self)
            }
        }
    };
}

float_scalar!(f64);
float_scalar!(f32);

impl Scalar for BigRational {
    fn is_finite_value(&self) -> bool {
        true
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        parse_rational(text.trim())
    }

    fn to_decimal(&self) -> String {
        rational_to_decimal(self)
    }
}

/// Exact parse of a decimal literal or `p/q` fraction.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }

    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i64>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(all_digits.parse::<BigInt>().ok()?);
    let scale = exponent - frac_part.len() as i64;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale.unsigned_abs() > 4096 {
        return None;
    }
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Some(if negative { -value } else { value })
}

/// Terminating decimals print as decimals, everything else as `p/q`.
pub fn rational_to_decimal(value: &BigRational) -> String {
    let mut den = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    if places == 0 {
        return value.numer().to_string();
    }
    let scaled = value * BigRational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{:0>width$}", digits, width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}
