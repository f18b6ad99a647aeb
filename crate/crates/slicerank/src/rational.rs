//! Exact rational parsing/formatting used across the bound pipeline.

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

/// Parses "a/b", a plain integer, or a decimal like "0.15" into an exact
/// rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("cannot parse {s:?} as a rational"));
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let sign = if int.trim_start().starts_with('-') {
            -1
        } else {
            1
        };
        let i: i64 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        let f: i64 = frac.parse().map_err(|_| bad())?;
        return Ok(Ratio::new(i * scale + sign * f, scale));
    }
    let n: i64 = s.parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(n))
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_decimals_integers() {
        assert_eq!(parse_ratio("1/3").unwrap(), Ratio::new(1, 3));
        assert_eq!(parse_ratio("5/12").unwrap(), Ratio::new(5, 12));
        assert_eq!(parse_ratio("0.15").unwrap(), Ratio::new(3, 20));
        assert_eq!(parse_ratio("2").unwrap(), Ratio::from_integer(2));
        assert_eq!(parse_ratio("-4/6").unwrap(), Ratio::new(-2, 3));
        assert_eq!(parse_ratio("-0.5").unwrap(), Ratio::new(-1, 2));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }
}
