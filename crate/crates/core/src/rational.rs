//! Exact rational arithmetic helpers.
//!
//! All probabilities and semantic coefficients in this crate are
//! arbitrary-precision rationals; floating point never enters a result.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

pub fn is_probability(r: &Rat) -> bool {
    !r.is_negative() && *r <= Rat::one()
}

/// Parses `a/b` or a bare integer `a` into a normalized rational.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = n.parse().map_err(|_| format!("bad numerator `{n}`"))?;
    let den: BigInt = d.parse().map_err(|_| format!("bad denominator `{d}`"))?;
    if den.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(Rat::new(num, den))
}

/// Renders `r` as a decimal string with `digits` fractional digits,
/// truncated toward zero, using integer long division only.
pub fn decimal_string(r: &Rat, digits: u32) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let a = r.abs();
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = (a.numer() * &scale) / a.denom();
    let int_part = &scaled / &scale;
    let frac_part = &scaled % &scale;
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac:0>width$}", frac = frac_part, width = digits as usize)
    }
}

/// Fraction wrapper serializing as `{"num": .., "den": ..}` — result fields
/// in reports are never floats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frac(pub Rat);

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Frac", 3)?;
        st.serialize_field("num", &self.0.numer().to_string())?;
        st.serialize_field("den", &self.0.denom().to_string())?;
        st.serialize_field("decimal", &decimal_string(&self.0, 9))?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_normalize() {
        assert_eq!(parse_rat("2/4").unwrap(), rat(1, 2));
        assert_eq!(parse_rat("3").unwrap(), rat(3, 1));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn decimals_are_exact_prefixes() {
        assert_eq!(decimal_string(&rat(1, 3), 6), "0.333333");
        assert_eq!(decimal_string(&rat(1, 2), 3), "0.500");
        assert_eq!(decimal_string(&rat(-7, 4), 2), "-1.75");
        assert_eq!(decimal_string(&rat(5, 1), 0), "5");
    }

    #[test]
    fn probability_range() {
        assert!(is_probability(&rat(1, 1)));
        assert!(is_probability(&rat(0, 1)));
        assert!(!is_probability(&rat(3, 2)));
        assert!(!is_probability(&rat(-1, 2)));
    }
}
