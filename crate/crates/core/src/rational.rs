//! Exact rational numbers and their textual forms.

use alloc::string::String;
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

/// `num / den` as an exact rational. Panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational {text:?}: {reason}")]
pub struct ParseRationalError {
    pub text: String,
    pub reason: &'static str,
}

/// Parses `"a/b"` fractions and terminating decimals such as `"0.25"` or
/// `"-3"`. Decimals are converted exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let fail = |reason| ParseRationalError {
        text: text.into(),
        reason,
    };
    let s = text.trim();
    if s.is_empty() {
        return Err(fail("empty"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_integer(n.trim()).ok_or_else(|| fail("bad numerator"))?;
        let d = parse_integer(d.trim()).ok_or_else(|| fail("bad denominator"))?;
        if d.is_zero() {
            return Err(fail("zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(fail("no digits"));
    }
    let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(whole) || !digits_ok(frac) {
        return Err(fail("not a number"));
    }
    let mut numerator = BigInt::zero();
    for b in whole.bytes().chain(frac.bytes()) {
        numerator = numerator * 10u32 + u32::from(b - b'0');
    }
    let denominator = num_traits::pow(BigInt::from(10u32), frac.len());
    let value = Rational::new(numerator, denominator);
    Ok(if negative { -value } else { value })
}

fn parse_integer(s: &str) -> Option<BigInt> {
    if s.is_empty() {
        return None;
    }
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

/// Lossy conversion used for printing and simulation.
pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn is_probability(q: &Rational) -> bool {
    !q.is_negative() && *q <= Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn fractions_and_decimals() {
        assert_eq!(parse_rational("4/5").unwrap(), rat(4, 5));
        assert_eq!(parse_rational("2/4").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("0.75").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("1").unwrap(), one());
        assert_eq!(parse_rational("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("3/-6").unwrap(), rat(-1, 2));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["1/0", "", "abc", "1/2/3", "0.5.1", "1e-3", "/2", "-", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_is_lowest_terms() {
        assert_eq!(rat(18, 20).to_string(), "9/10");
        assert_eq!(rat(4, 4).to_string(), "1");
        assert_eq!(rat(0, 7).to_string(), "0");
    }
}
