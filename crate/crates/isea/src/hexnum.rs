//! Serde helpers for numeric fields that accept both JSON integers and hex
//! strings ("0x4002_0070", underscores allowed) on input, and serialize as
//! zero-padded hex strings. Used for addresses, masks, and data words so
//! configuration files and traces stay human-readable.

use serde::de::{self, Deserializer, Unexpected, Visitor};
use serde::Serializer;
use std::fmt;

pub fn parse_u64(s: &str) -> Option<u64> {
    let cleaned = s.trim().replace('_', "");
    if let Some(hex) = cleaned
        .strip_prefix("0x")
        .or_else(|| cleaned.strip_prefix("0X"))
    {
        u64::from_str_radix(hex, 16).ok()
    } else {
        cleaned.parse().ok()
    }
}

struct NumVisitor {
    bits: u32,
}

impl<'de> Visitor<'de> for NumVisitor {
    type Value = u64;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "an integer or a hex string of at most {} bits", self.bits)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
        if self.bits < 64 && v >= 1u64 << self.bits {
            return Err(E::invalid_value(Unexpected::Unsigned(v), &self));
        }
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
        if v < 0 {
            return Err(E::invalid_value(Unexpected::Signed(v), &self));
        }
        self.visit_u64(v as u64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
        let n = parse_u64(v).ok_or_else(|| E::invalid_value(Unexpected::Str(v), &self))?;
        self.visit_u64(n)
    }
}

pub fn de_width<'de, D: Deserializer<'de>>(d: D, bits: u32) -> Result<u64, D::Error> {
    d.deserialize_any(NumVisitor { bits })
}

/// 32-bit field, serialized as "0x%08x".
pub mod hex32 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#010x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        de_width(d, 32).map(|v| v as u32)
    }
}

/// Optional 32-bit field, serialized as "0x%08x" when present.
pub mod hex32_opt {
    use super::*;
    use serde::{Deserialize, Deserializer};

    pub fn serialize<S: Serializer>(v: &Option<u32>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::hex32::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super::hex32")] u32);
        Option::<W>::deserialize(d).map(|o| o.map(|w| w.0))
    }
}

/// Hex-or-int deserializers for fields that serialize as plain numbers.
pub fn de_u32<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
    de_width(d, 32).map(|v| v as u32)
}

pub fn de_usize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    de_width(d, 64).map(|v| v as usize)
}

pub fn de_vec_u32<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u32>, D::Error> {
    use serde::Deserialize;
    Vec::<HexWord>::deserialize(d).map(|v| v.into_iter().map(|w| w.0).collect())
}

/// A 32-bit word usable inside arrays and tuples, where `#[serde(with)]`
/// does not reach. Same wire format as [`hex32`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HexWord(pub u32);

impl serde::Serialize for HexWord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        hex32::serialize(&self.0, s)
    }
}

impl<'de> serde::Deserialize<'de> for HexWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        hex32::deserialize(d).map(HexWord)
    }
}
