use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SCALE: i64 = 1_000_000;

/// Fixed-point decimal with exactly six fractional digits, stored as an
/// integer count of millionths. This is the only way non-integer numbers
/// appear in attested documents: canonical text is `-?D+.DDDDDD`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Decimal6(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecimalError {
    #[error("not a canonical 6-digit decimal: {0:?}")]
    Syntax(String),
    #[error("decimal out of range: {0:?}")]
    Range(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("zero denominator")]
    ZeroDenominator,
}

impl Decimal6 {
    pub const ZERO: Decimal6 = Decimal6(0);
    pub const ONE: Decimal6 = Decimal6(SCALE);

    pub const fn from_micros(m: i64) -> Self {
        Self(m)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Rounds `x` to six fractional digits, ties to even on the exact binary value.
    pub fn from_f64(x: f64) -> Result<Self, DecimalError> {
        if !x.is_finite() {
            return Err(DecimalError::NonFinite);
        }
        // std formatting is exact and rounds ties to even
        let s = format!("{x:.6}");
        Self::parse_any(&s)
    }

    /// `num / den` rounded half-to-even, computed exactly in integers.
    pub fn from_ratio(num: i128, den: i128) -> Result<Self, DecimalError> {
        if den == 0 {
            return Err(DecimalError::ZeroDenominator);
        }
        let negative = (num < 0) != (den < 0);
        let (n, d) = (num.unsigned_abs(), den.unsigned_abs());
        let scaled = n.checked_mul(SCALE as u128).ok_or_else(|| DecimalError::Range(format!("{num}/{den}")))?;
        let mut q = scaled / d;
        let r = scaled % d;
        if 2 * r > d || (2 * r == d && q % 2 == 1) {
            q += 1;
        }
        let q = i64::try_from(q).map_err(|_| DecimalError::Range(format!("{num}/{den}")))?;
        Ok(Self(if negative { -q } else { q }))
    }

    pub fn checked_add(self, other: Self) -> Option<Self> {
        self.0.checked_add(other.0).map(Self)
    }

    pub fn checked_sub(self, other: Self) -> Option<Self> {
        self.0.checked_sub(other.0).map(Self)
    }

    /// Strict parse: exactly six fractional digits, no superfluous sign or
    /// leading zeros.
    pub fn parse_canonical(s: &str) -> Result<Self, DecimalError> {
        let v = Self::parse_any(s)?;
        if v.to_string() != s {
            return Err(DecimalError::Syntax(s.to_string()));
        }
        Ok(v)
    }

    /// Lenient parse for operator input: integer or up to six fractional digits.
    pub fn parse_any(s: &str) -> Result<Self, DecimalError> {
        let err = || DecimalError::Syntax(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty()
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 6
            || (body.contains('.') && frac_part.is_empty())
        {
            return Err(err());
        }
        let range = || DecimalError::Range(s.to_string());
        let int: i64 = int_part.parse().map_err(|_| range())?;
        let mut frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| err())? };
        for _ in frac_part.len()..6 {
            frac *= 10;
        }
        let mag = int.checked_mul(SCALE).and_then(|v| v.checked_add(frac)).ok_or_else(range)?;
        Ok(Self(if negative { -mag } else { mag }))
    }
}

impl fmt::Display for Decimal6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let mag = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", mag / SCALE as u64, mag % SCALE as u64)
    }
}

impl fmt::Debug for Decimal6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Decimal6({self})")
    }
}

impl FromStr for Decimal6 {
    type Err = DecimalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_canonical(s)
    }
}

impl Serialize for Decimal6 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal6 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Decimal6::parse_canonical(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting() {
        assert_eq!(Decimal6::from_f64(0.8443).unwrap().to_string(), "0.844300");
        assert_eq!(Decimal6::from_micros(-1_500_000).to_string(), "-1.500000");
        assert_eq!(Decimal6::from_micros(-5).to_string(), "-0.000005");
        assert_eq!(Decimal6::ZERO.to_string(), "0.000000");
    }

    #[test]
    fn half_even_on_exact_ties() {
        // 1/128 and 3/128 are exact binary ties at the sixth digit
        assert_eq!(Decimal6::from_f64(0.0078125).unwrap().to_string(), "0.007812");
        assert_eq!(Decimal6::from_f64(0.0234375).unwrap().to_string(), "0.023438");
        assert_eq!(Decimal6::from_f64(-0.0078125).unwrap().to_string(), "-0.007812");
        assert_eq!(Decimal6::from_ratio(1, 128).unwrap().to_string(), "0.007812");
        assert_eq!(Decimal6::from_ratio(3, 128).unwrap().to_string(), "0.023438");
        assert_eq!(Decimal6::from_ratio(1, 2_000_000).unwrap(), Decimal6::ZERO);
        assert_eq!(Decimal6::from_ratio(3, 2_000_000).unwrap().micros(), 2);
    }

    #[test]
    fn ratios() {
        assert_eq!(Decimal6::from_ratio(4, 6).unwrap().to_string(), "0.666667");
        assert_eq!(Decimal6::from_ratio(1, 3).unwrap().to_string(), "0.333333");
        assert_eq!(Decimal6::from_ratio(-1, 3).unwrap().to_string(), "-0.333333");
        assert_eq!(Decimal6::from_ratio(6, 6).unwrap().to_string(), "1.000000");
        assert!(Decimal6::from_ratio(1, 0).is_err());
    }

    #[test]
    fn tiny_negatives_collapse_to_zero() {
        assert_eq!(Decimal6::from_f64(-1e-9).unwrap(), Decimal6::ZERO);
        assert_eq!(Decimal6::from_f64(-1e-9).unwrap().to_string(), "0.000000");
    }

    #[test]
    fn parsing() {
        assert_eq!(Decimal6::parse_canonical("0.100000").unwrap().micros(), 100_000);
        assert!(Decimal6::parse_canonical("0.1").is_err());
        assert!(Decimal6::parse_canonical("00.100000").is_err());
        assert!(Decimal6::parse_canonical("-0.000000").is_err());
        assert!(Decimal6::parse_canonical("1e3").is_err());
        assert_eq!(Decimal6::parse_any("0.1").unwrap().micros(), 100_000);
        assert_eq!(Decimal6::parse_any("2").unwrap().micros(), 2_000_000);
        assert!(Decimal6::parse_any("1.").is_err());
        assert!(Decimal6::parse_any(".5").is_err());
        assert!(Decimal6::parse_any("0.1234567").is_err());
        assert!(Decimal6::from_f64(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(m in -1_000_000_000_000i64..1_000_000_000_000) {
            let d = Decimal6::from_micros(m);
            prop_assert_eq!(Decimal6::parse_canonical(&d.to_string()).unwrap(), d);
            prop_assert_eq!(Decimal6::from_f64(d.to_f64()).unwrap(), d);
        }

        #[test]
        fn ratio_times_denominator_recovers_numerator(num in 0i128..100_000, den in 1i128..100_000) {
            prop_assume!(num <= den);
            let r = Decimal6::from_ratio(num, den).unwrap();
            let back = (r.micros() as i128 * den + 500_000) / 1_000_000;
            if den <= 1_000_000 {
                prop_assert_eq!(back, num);
            }
        }
    }
}
