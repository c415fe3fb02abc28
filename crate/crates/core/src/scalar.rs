// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Scalar traits that let collectives, range bounds and the cost model run
//! over several concrete numeric and key types.

use std::cmp::Ordering;
use std::fmt::Debug;

use num_traits::Num;

use crate::columnar::{Column, DataType, Value};
use crate::error::{Error, Result};

/// Fixed-width numeric element that can be reduced and moved over the wire.
pub trait Element: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    const WIDTH: usize;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one element from exactly `WIDTH` bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_element {
    ($($t:ty),*) => {$(
        impl Element for $t {
            const WIDTH: usize = std::mem::size_of::<$t>();

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
        }
    )*};
}

impl_element!(i64, u64, f64, f32);

pub(crate) fn encode_elements<T: Element>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * T::WIDTH);
    for &v in values {
        v.write_le(&mut out);
    }
    out
}

pub(crate) fn decode_elements<T: Element>(bytes: &[u8]) -> Result<Vec<T>> {
    if bytes.len() % T::WIDTH != 0 {
        return Err(Error::decode(format!(
            "{} bytes is not a multiple of element width {}",
            bytes.len(),
            T::WIDTH
        )));
    }
    Ok(bytes.chunks_exact(T::WIDTH).map(T::read_le).collect())
}

/// A single-column key type with a total order, usable for range bounds.
pub trait KeyScalar: Clone + Debug + Send + Sync + 'static {
    const DTYPE: DataType;

    fn key_cmp(&self, other: &Self) -> Ordering;

    /// `None` for null or for a value of another dtype.
    fn from_value(v: Value<'_>) -> Option<Self>;

    fn to_value(&self) -> Value<'_>;

    /// Extracts the column's values, `None` marking nulls.
    fn column_values(col: &Column) -> Result<Vec<Option<Self>>> {
        if col.dtype() != Self::DTYPE {
            return Err(Error::schema(format!(
                "expected a {} key column, found {}",
                Self::DTYPE,
                col.dtype()
            )));
        }
        Ok((0..col.len())
            .map(|i| Self::from_value(col.value(i)))
            .collect())
    }

    fn to_column(values: &[Self]) -> Column {
        Column::from_values(Self::DTYPE, values.iter().map(Self::to_value)).expect("dtype matches")
    }
}

impl KeyScalar for i64 {
    const DTYPE: DataType = DataType::Int64;

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn from_value(v: Value<'_>) -> Option<Self> {
        match v {
            Value::Int64(x) => Some(x),
            _ => None,
        }
    }

    fn to_value(&self) -> Value<'_> {
        Value::Int64(*self)
    }
}

impl KeyScalar for f64 {
    const DTYPE: DataType = DataType::Float64;

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn from_value(v: Value<'_>) -> Option<Self> {
        match v {
            Value::Float64(x) => Some(x),
            _ => None,
        }
    }

    fn to_value(&self) -> Value<'_> {
        Value::Float64(*self)
    }
}

impl KeyScalar for bool {
    const DTYPE: DataType = DataType::Bool;

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn from_value(v: Value<'_>) -> Option<Self> {
        match v {
            Value::Bool(x) => Some(x),
            _ => None,
        }
    }

    fn to_value(&self) -> Value<'_> {
        Value::Bool(*self)
    }
}

impl KeyScalar for String {
    const DTYPE: DataType = DataType::Utf8;

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }

    fn from_value(v: Value<'_>) -> Option<Self> {
        match v {
            Value::Utf8(x) => Some(x.to_string()),
            _ => None,
        }
    }

    fn to_value(&self) -> Value<'_> {
        Value::Utf8(self)
    }
}

/// Numeric key that can be binned by a histogram.
pub trait NumericKey: KeyScalar + Element {
    fn to_f64(self) -> f64;

    /// Smallest key value that is `>= edge`; used to turn a bin edge into a pivot.
    fn from_edge(edge: f64) -> Self;
}

impl NumericKey for i64 {
    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_edge(edge: f64) -> Self {
        edge.ceil() as i64
    }
}

impl NumericKey for f64 {
    fn to_f64(self) -> f64 {
        self
    }

    fn from_edge(edge: f64) -> Self {
        edge
    }
}

/// 64-bit FNV-1a over `bytes`, finished with the MurmurHash3 `fmix64`
/// avalanche so the low bits are usable for `hash % P`.
pub fn hash64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^= h >> 33;
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_round_trip() {
        let v = vec![1.5f64, -0.0, f64::INFINITY];
        let back: Vec<f64> = decode_elements(&encode_elements(&v)).unwrap();
        assert_eq!(
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(decode_elements::<i64>(&[0; 7]).is_err());
    }

    #[test]
    fn hash_is_pinned() {
        // values computed by an independent FNV-1a + fmix64 implementation
        assert_eq!(hash64(b""), 0xefd0_1f60_ba99_2926);
        // encoded non-null Int64 key 1
        assert_eq!(hash64(&[1, 1, 0, 0, 0, 0, 0, 0, 0]), 0xfead_53f7_dfca_be65);
        assert_ne!(hash64(b"a"), hash64(b"b"));
    }

    #[test]
    fn edge_rounding() {
        assert_eq!(i64::from_edge(24.75), 25);
        assert_eq!(i64::from_edge(25.0), 25);
        assert_eq!(f64::from_edge(24.75), 24.75);
    }
}
