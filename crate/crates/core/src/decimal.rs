//! Decimal-string encoding for floating point values in documents.
//!
//! `f64`'s `Display` prints the shortest string that parses back to the same
//! bits, so writing values as strings keeps documents bit-exact regardless of
//! the JSON library's float handling. Readers also accept plain JSON numbers.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;

/// An `f64` that serializes as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Decimal(pub f64);

impl From<f64> for Decimal {
    fn from(v: f64) -> Self {
        Decimal(v)
    }
}

impl From<Decimal> for f64 {
    fn from(v: Decimal) -> Self {
        v.0
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_f64(self.0))
    }
}

pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:?}")
    }
}

struct DecimalVisitor;

impl<'de> Visitor<'de> for DecimalVisitor {
    type Value = Decimal;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a decimal string or a number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
        v.trim()
            .parse::<f64>()
            .map(Decimal)
            .map_err(|_| E::custom(format!("invalid decimal string {v:?}")))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Decimal, E> {
        Ok(Decimal(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Decimal, E> {
        Ok(Decimal(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Decimal, E> {
        Ok(Decimal(v as f64))
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(DecimalVisitor)
    }
}

pub fn to_decimals(v: &[f64]) -> Vec<Decimal> {
    v.iter().copied().map(Decimal).collect()
}

pub fn from_decimals(v: &[Decimal]) -> Vec<f64> {
    v.iter().map(|d| d.0).collect()
}

pub fn matrix_to_decimals(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<Decimal>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Decimal(m[(i, j)])).collect())
        .collect()
}

/// Builds a matrix from row-major nested decimals; `cols` is used when there are no rows.
pub fn matrix_from_decimals(rows: &[Vec<Decimal>], cols: usize) -> Option<nalgebra::DMatrix<f64>> {
    let ncols = rows.first().map_or(cols, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(nalgebra::DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j].0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn decimal_strings_round_trip_bits(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let json = serde_json::to_string(&Decimal(v)).unwrap();
            let back: Decimal = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back.0.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn accepts_plain_numbers() {
        let d: Decimal = serde_json::from_str("2.5").unwrap();
        assert_eq!(d.0, 2.5);
        let d: Decimal = serde_json::from_str("3").unwrap();
        assert_eq!(d.0, 3.0);
    }
}
