//! Exact rational helpers shared by every module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `12`, `-3`, `7/2` or `3.25` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest.trim_start()),
        None => (false, text),
    };
    if body.is_empty() {
        return None;
    }
    let value = if let Some((n, d)) = body.split_once('/') {
        let n: BigInt = parse_digits(n)?;
        let d: BigInt = parse_digits(d)?;
        if d.is_zero() {
            return None;
        }
        Rational::new(n, d)
    } else if let Some((whole, fraction)) = body.split_once('.') {
        let whole: BigInt = parse_digits(whole)?;
        let digits: BigInt = parse_digits(fraction)?;
        let scale = num_traits::pow(BigInt::from(10), fraction.len());
        Rational::from_integer(whole) + Rational::new(digits, scale)
    } else {
        Rational::from_integer(parse_digits(body)?)
    };
    Some(if neg { -value } else { value })
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Largest integer strictly greater than `q`.
pub fn next_integer_after(q: &Rational) -> Rational {
    q.floor() + one()
}

pub fn is_integer(q: &Rational) -> bool {
    q.is_integer()
}

pub fn abs(q: &Rational) -> Rational {
    q.abs()
}

/// Serde helper writing a rational as its `p/q` text.
pub fn serialize<S: serde::Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(q)
}

pub fn serialize_opt<S: serde::Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match q {
        Some(q) => s.collect_str(q),
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("12"), Some(int(12)));
        assert_eq!(parse_rational("-3"), Some(int(-3)));
        assert_eq!(parse_rational("7/2"), Some(frac(7, 2)));
        assert_eq!(parse_rational("3.25"), Some(frac(13, 4)));
        assert_eq!(parse_rational("-0.5"), Some(frac(-1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn display_is_p_over_q() {
        assert_eq!(frac(6, 4).to_string(), "3/2");
        assert_eq!(int(-4).to_string(), "-4");
    }

    #[test]
    fn next_integer() {
        assert_eq!(next_integer_after(&frac(5, 2)), int(3));
        assert_eq!(next_integer_after(&int(2)), int(3));
    }
}
