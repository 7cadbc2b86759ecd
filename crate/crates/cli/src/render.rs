//! Deterministic text rendering for the emitted artifacts.
//!
//! Floats print as scientific notation with 17 significant digits (enough
//! to round-trip any f64), rationals as exact decimal strings. Byte-for-byte
//! reproducibility of the artifacts is part of the contract, so nothing
//! here consults locale, time, or iteration order of unordered maps.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

/// `17` significant digits: scientific, `.` decimal separator.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn yes_no(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Exact decimal expansion of a rational whose reduced denominator is of
/// the form `2^a 5^b`; other denominators fall back to the exact fraction
/// `p/q` (a terminating decimal does not exist for them).
pub fn exact_decimal(r: &BigRational) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut rest = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let k = twos.max(fives);
    let digits = (r.numer().abs() * BigInt::from(10u32).pow(k) / r.denom()).to_string();
    let sign = if r.numer().is_negative() { "-" } else { "" };
    if k == 0 {
        return format!("{sign}{digits}");
    }
    let k = k as usize;
    let (int_part, frac_part) = if digits.len() > k {
        (&digits[..digits.len() - k], digits[digits.len() - k..].to_string())
    } else {
        ("0", format!("{digits:0>k$}"))
    };
    let frac = frac_part.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

/// Parses a plain signed decimal (`-3`, `0.25`, `.5`) into an exact
/// rational. No exponents: configuration values are meant to be read
/// exactly as written.
pub fn parse_exact_decimal(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let (negative, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_digits, frac_digits) = match body.split_once('.') {
        Some((a, b)) => (a, b),
        None => (body, ""),
    };
    let all_digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if int_digits.is_empty() && frac_digits.is_empty()
        || !all_digits(int_digits)
        || !all_digits(frac_digits)
    {
        bail!("`{text}` is not a plain decimal number");
    }
    let joined = format!("{int_digits}{frac_digits}");
    let numer: BigInt = joined.parse().expect("digits only");
    let numer = if negative { -numer } else { numer };
    let denom = BigInt::from(10u32).pow(frac_digits.len() as u32);
    Ok(BigRational::new(numer, denom))
}

/// Writes a CSV with a header row, `\n` line endings, and a trailing
/// newline. Values never contain commas (numbers and booleans only).
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Pretty JSON, struct fields in declaration order, trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing summary")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn decimals_are_exact_and_canonical() {
        assert_eq!(exact_decimal(&rat(0, 1)), "0");
        assert_eq!(exact_decimal(&rat(5, 1)), "5");
        assert_eq!(exact_decimal(&rat(-1, 4)), "-0.25");
        assert_eq!(exact_decimal(&rat(1, 64)), "0.015625");
        assert_eq!(exact_decimal(&rat(3, 10)), "0.3");
        assert_eq!(exact_decimal(&rat(7, 50)), "0.14");
        // 1/3 has no terminating decimal: exact fraction instead.
        assert_eq!(exact_decimal(&rat(1, 3)), "1/3");
        assert_eq!(exact_decimal(&rat(-22, 7)), "-22/7");
    }

    #[test]
    fn decimal_parse_round_trips() {
        for text in ["0", "-3", "0.25", "12.0625", "-0.015625"] {
            let r = parse_exact_decimal(text).unwrap();
            assert_eq!(exact_decimal(&r), text.trim_end_matches(".0"), "{text}");
        }
        assert_eq!(parse_exact_decimal(".5").unwrap(), rat(1, 2));
        assert_eq!(parse_exact_decimal("+2").unwrap(), rat(2, 1));
        assert!(parse_exact_decimal("1e3").is_err());
        assert!(parse_exact_decimal("1/3").is_err());
        assert!(parse_exact_decimal(".").is_err());
    }

    #[test]
    fn float_format_is_seventeen_digit_scientific() {
        assert_eq!(sci(0.0), "0.0000000000000000e0");
        assert_eq!(sci(1.0), "1.0000000000000000e0");
        assert_eq!(sci(-0.5), "-5.0000000000000000e-1");
        let x = 0.1f64;
        assert_eq!(sci(x).parse::<f64>().unwrap(), x);
    }
}
