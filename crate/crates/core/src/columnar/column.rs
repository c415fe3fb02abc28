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

use std::cmp::Ordering;
use std::fmt;

use super::bitmap::Bitmap;
use crate::error::{Error, Result};

/// Physical type tag of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Int64,
    Float64,
    Bool,
    Utf8,
}

impl DataType {
    /// Wire tag used in the serialized table header.
    pub fn tag(self) -> u8 {
        match self {
            DataType::Int64 => 0,
            DataType::Float64 => 1,
            DataType::Bool => 2,
            DataType::Utf8 => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(DataType::Int64),
            1 => Ok(DataType::Float64),
            2 => Ok(DataType::Bool),
            3 => Ok(DataType::Utf8),
            t => Err(Error::decode(format!("unknown dtype tag {t}"))),
        }
    }

    /// Bytes per row in the data buffer, `None` for variable width.
    pub fn fixed_width(self) -> Option<usize> {
        match self {
            DataType::Int64 | DataType::Float64 => Some(8),
            DataType::Bool => Some(1),
            DataType::Utf8 => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, DataType::Int64 | DataType::Float64)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataType::Int64 => "int64",
            DataType::Float64 => "float64",
            DataType::Bool => "bool",
            DataType::Utf8 => "utf8",
        };
        f.write_str(s)
    }
}

/// Typed value buffers of a column. Bool is stored one byte per row.
#[derive(Debug, Clone)]
pub enum ColumnData {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Bool(Vec<bool>),
    Utf8 { offsets: Vec<u64>, bytes: Vec<u8> },
}

impl ColumnData {
    pub fn dtype(&self) -> DataType {
        match self {
            ColumnData::Int64(_) => DataType::Int64,
            ColumnData::Float64(_) => DataType::Float64,
            ColumnData::Bool(_) => DataType::Bool,
            ColumnData::Utf8 { .. } => DataType::Utf8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int64(v) => v.len(),
            ColumnData::Float64(v) => v.len(),
            ColumnData::Bool(v) => v.len(),
            ColumnData::Utf8 { offsets, .. } => offsets.len().saturating_sub(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn empty(dtype: DataType) -> Self {
        match dtype {
            DataType::Int64 => ColumnData::Int64(Vec::new()),
            DataType::Float64 => ColumnData::Float64(Vec::new()),
            DataType::Bool => ColumnData::Bool(Vec::new()),
            DataType::Utf8 => ColumnData::Utf8 {
                offsets: vec![0],
                bytes: Vec::new(),
            },
        }
    }
}

/// A borrowed cell value.
#[derive(Debug, Clone, Copy)]
pub enum Value<'a> {
    Null,
    Int64(i64),
    Float64(f64),
    Bool(bool),
    Utf8(&'a str),
}

impl Value<'_> {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Total order: nulls first, floats by `total_cmp`. Values of different
    /// types order by dtype tag.
    pub fn total_cmp(&self, other: &Value<'_>) -> Ordering {
        use Value::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Null, _) => Ordering::Less,
            (_, Null) => Ordering::Greater,
            (Int64(a), Int64(b)) => a.cmp(b),
            (Float64(a), Float64(b)) => a.total_cmp(b),
            (Bool(a), Bool(b)) => a.cmp(b),
            (Utf8(a), Utf8(b)) => a.cmp(b),
            (a, b) => a.type_rank().cmp(&b.type_rank()),
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int64(_) => 1,
            Value::Float64(_) => 2,
            Value::Bool(_) => 3,
            Value::Utf8(_) => 4,
        }
    }
}

impl PartialEq for Value<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl fmt::Display for Value<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int64(v) => write!(f, "{v}"),
            Value::Float64(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Utf8(v) => write!(f, "{v:?}"),
        }
    }
}

/// One column of a table: typed data plus an optional validity bitmap.
///
/// Slots marked null by the bitmap still occupy space in the data buffer;
/// their contents carry no meaning and are ignored by equality.
#[derive(Debug, Clone)]
pub struct Column {
    data: ColumnData,
    validity: Option<Bitmap>,
}

impl Column {
    /// Builds a column, checking the buffer invariants.
    pub fn try_new(data: ColumnData, validity: Option<Bitmap>) -> Result<Self> {
        let len = data.len();
        if let ColumnData::Utf8 { offsets, bytes } = &data {
            check_offsets(offsets, bytes)?;
        }
        if let Some(v) = &validity {
            if v.len() != len {
                return Err(Error::decode(format!(
                    "validity bitmap covers {} rows, column has {}",
                    v.len(),
                    len
                )));
            }
        }
        Ok(Self { data, validity })
    }

    pub fn empty(dtype: DataType) -> Self {
        Self {
            data: ColumnData::empty(dtype),
            validity: None,
        }
    }

    pub fn from_i64(values: Vec<i64>) -> Self {
        Self {
            data: ColumnData::Int64(values),
            validity: None,
        }
    }

    pub fn from_f64(values: Vec<f64>) -> Self {
        Self {
            data: ColumnData::Float64(values),
            validity: None,
        }
    }

    pub fn from_bool(values: Vec<bool>) -> Self {
        Self {
            data: ColumnData::Bool(values),
            validity: None,
        }
    }

    pub fn from_strs<S: AsRef<str>>(values: impl IntoIterator<Item = S>) -> Self {
        let mut b = ColumnBuilder::new(DataType::Utf8);
        for s in values {
            b.push_str(s.as_ref());
        }
        b.finish()
    }

    pub fn from_opt_i64(values: impl IntoIterator<Item = Option<i64>>) -> Self {
        Self::from_values(
            DataType::Int64,
            values
                .into_iter()
                .map(|v| v.map_or(Value::Null, Value::Int64)),
        )
        .expect("int64 values")
    }

    pub fn from_opt_f64(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        Self::from_values(
            DataType::Float64,
            values
                .into_iter()
                .map(|v| v.map_or(Value::Null, Value::Float64)),
        )
        .expect("float64 values")
    }

    pub fn from_opt_strs<'a>(values: impl IntoIterator<Item = Option<&'a str>>) -> Self {
        Self::from_values(
            DataType::Utf8,
            values
                .into_iter()
                .map(|v| v.map_or(Value::Null, Value::Utf8)),
        )
        .expect("utf8 values")
    }

    pub fn from_values<'a>(
        dtype: DataType,
        values: impl IntoIterator<Item = Value<'a>>,
    ) -> Result<Self> {
        let mut b = ColumnBuilder::new(dtype);
        for v in values {
            b.push(v)?;
        }
        Ok(b.finish())
    }

    pub fn dtype(&self) -> DataType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn validity(&self) -> Option<&Bitmap> {
        self.validity.as_ref()
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.validity.as_ref().is_none_or(|v| v.get(i))
    }

    pub fn null_count(&self) -> usize {
        self.validity.as_ref().map_or(0, Bitmap::null_count)
    }

    pub fn value(&self, i: usize) -> Value<'_> {
        if !self.is_valid(i) {
            return Value::Null;
        }
        match &self.data {
            ColumnData::Int64(v) => Value::Int64(v[i]),
            ColumnData::Float64(v) => Value::Float64(v[i]),
            ColumnData::Bool(v) => Value::Bool(v[i]),
            ColumnData::Utf8 { .. } => Value::Utf8(self.str_at(i)),
        }
    }

    pub fn i64_values(&self) -> Option<&[i64]> {
        match &self.data {
            ColumnData::Int64(v) => Some(v),
            _ => None,
        }
    }

    pub fn f64_values(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Float64(v) => Some(v),
            _ => None,
        }
    }

    pub fn bool_values(&self) -> Option<&[bool]> {
        match &self.data {
            ColumnData::Bool(v) => Some(v),
            _ => None,
        }
    }

    fn str_at(&self, i: usize) -> &str {
        match &self.data {
            ColumnData::Utf8 { offsets, bytes } => {
                let s = &bytes[offsets[i] as usize..offsets[i + 1] as usize];
                // offsets are validated at construction to lie on char boundaries
                std::str::from_utf8(s).expect("validated utf8")
            }
            _ => unreachable!("str_at on non-utf8 column"),
        }
    }

    /// Average bytes per row of the data buffer (string bytes for Utf8).
    pub fn avg_value_bytes(&self) -> f64 {
        match (&self.data, self.dtype().fixed_width()) {
            (_, Some(w)) => w as f64,
            (ColumnData::Utf8 { bytes, .. }, None) if !self.is_empty() => {
                bytes.len() as f64 / self.len() as f64
            }
            _ => 0.0,
        }
    }

    /// Rows at `indices`, in that order. Indices must be in range.
    pub fn take(&self, indices: &[usize]) -> Column {
        let validity = self
            .validity
            .as_ref()
            .map(|v| Bitmap::from_bools(indices.iter().map(|&i| v.get(i))));
        let data = match &self.data {
            ColumnData::Int64(v) => ColumnData::Int64(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Float64(v) => ColumnData::Float64(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Bool(v) => ColumnData::Bool(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Utf8 { offsets, bytes } => {
                let mut out_off = Vec::with_capacity(indices.len() + 1);
                let mut out = Vec::new();
                out_off.push(0u64);
                for &i in indices {
                    out.extend_from_slice(&bytes[offsets[i] as usize..offsets[i + 1] as usize]);
                    out_off.push(out.len() as u64);
                }
                ColumnData::Utf8 {
                    offsets: out_off,
                    bytes: out,
                }
            }
        };
        Column { data, validity }.compact_validity()
    }

    /// Appends `parts` end to end. All parts must share `dtype`.
    pub fn concat(dtype: DataType, parts: &[&Column]) -> Result<Column> {
        if let Some(p) = parts.iter().find(|p| p.dtype() != dtype) {
            return Err(Error::schema(format!(
                "cannot concat {} column into {}",
                p.dtype(),
                dtype
            )));
        }
        let total: usize = parts.iter().map(|p| p.len()).sum();
        let validity = if parts.iter().any(|p| p.null_count() > 0) {
            let mut bm = Bitmap::from_bools(std::iter::empty());
            for p in parts {
                for i in 0..p.len() {
                    bm.push(p.is_valid(i));
                }
            }
            Some(bm)
        } else {
            None
        };
        let data = match dtype {
            DataType::Int64 => {
                let mut v = Vec::with_capacity(total);
                for p in parts {
                    v.extend_from_slice(p.i64_values().expect("dtype checked"));
                }
                ColumnData::Int64(v)
            }
            DataType::Float64 => {
                let mut v = Vec::with_capacity(total);
                for p in parts {
                    v.extend_from_slice(p.f64_values().expect("dtype checked"));
                }
                ColumnData::Float64(v)
            }
            DataType::Bool => {
                let mut v = Vec::with_capacity(total);
                for p in parts {
                    v.extend_from_slice(p.bool_values().expect("dtype checked"));
                }
                ColumnData::Bool(v)
            }
            DataType::Utf8 => {
                let mut offsets = Vec::with_capacity(total + 1);
                offsets.push(0u64);
                let mut bytes = Vec::new();
                for p in parts {
                    if let ColumnData::Utf8 {
                        offsets: po,
                        bytes: pb,
                    } = &p.data
                    {
                        let base = bytes.len() as u64;
                        offsets.extend(po[1..].iter().map(|o| o + base));
                        bytes.extend_from_slice(pb);
                    }
                }
                ColumnData::Utf8 { offsets, bytes }
            }
        };
        Ok(Column { data, validity })
    }

    /// Drops an all-valid bitmap.
    fn compact_validity(mut self) -> Self {
        if self.validity.as_ref().is_some_and(|v| v.null_count() == 0) {
            self.validity = None;
        }
        self
    }

    /// Appends a byte encoding of row `i` that is equal for equal values and
    /// distinct otherwise. Used for hashing and key equality.
    pub fn encode_value(&self, i: usize, out: &mut Vec<u8>) {
        if !self.is_valid(i) {
            out.push(0);
            return;
        }
        out.push(1);
        match &self.data {
            ColumnData::Int64(v) => out.extend_from_slice(&v[i].to_le_bytes()),
            ColumnData::Float64(v) => out.extend_from_slice(&v[i].to_bits().to_le_bytes()),
            ColumnData::Bool(v) => out.push(v[i] as u8),
            ColumnData::Utf8 { offsets, bytes } => {
                let s = &bytes[offsets[i] as usize..offsets[i + 1] as usize];
                out.extend_from_slice(&(s.len() as u64).to_le_bytes());
                out.extend_from_slice(s);
            }
        }
    }

    /// Compares row `i` of `self` with row `j` of `other` (same dtype).
    #[inline]
    pub fn cmp_rows(&self, i: usize, other: &Column, j: usize) -> Ordering {
        match (self.is_valid(i), other.is_valid(j)) {
            (false, false) => return Ordering::Equal,
            (false, true) => return Ordering::Less,
            (true, false) => return Ordering::Greater,
            _ => {}
        }
        match (&self.data, &other.data) {
            (ColumnData::Int64(a), ColumnData::Int64(b)) => a[i].cmp(&b[j]),
            (ColumnData::Float64(a), ColumnData::Float64(b)) => a[i].total_cmp(&b[j]),
            (ColumnData::Bool(a), ColumnData::Bool(b)) => a[i].cmp(&b[j]),
            _ => self.value(i).total_cmp(&other.value(j)),
        }
    }
}

impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.dtype() == other.dtype()
            && self.len() == other.len()
            && (0..self.len()).all(|i| self.cmp_rows(i, other, i) == Ordering::Equal)
    }
}

fn check_offsets(offsets: &[u64], bytes: &[u8]) -> Result<()> {
    if offsets.first() != Some(&0) {
        return Err(Error::decode("utf8 offsets must start at 0"));
    }
    if offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::decode("utf8 offsets must be non-decreasing"));
    }
    if *offsets.last().expect("non-empty") != bytes.len() as u64 {
        return Err(Error::decode(format!(
            "last utf8 offset {} does not match data length {}",
            offsets.last().expect("non-empty"),
            bytes.len()
        )));
    }
    let s = std::str::from_utf8(bytes).map_err(|e| Error::decode(format!("invalid utf8: {e}")))?;
    if let Some(o) = offsets.iter().find(|&&o| !s.is_char_boundary(o as usize)) {
        return Err(Error::decode(format!("utf8 offset {o} splits a character")));
    }
    Ok(())
}

/// Row-at-a-time column construction.
#[derive(Debug)]
pub struct ColumnBuilder {
    data: ColumnData,
    validity: Bitmap,
    nulls: usize,
}

impl ColumnBuilder {
    pub fn new(dtype: DataType) -> Self {
        Self {
            data: ColumnData::empty(dtype),
            validity: Bitmap::from_bools(std::iter::empty()),
            nulls: 0,
        }
    }

    pub fn dtype(&self) -> DataType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.validity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_null(&mut self) {
        match &mut self.data {
            ColumnData::Int64(v) => v.push(0),
            ColumnData::Float64(v) => v.push(0.0),
            ColumnData::Bool(v) => v.push(false),
            ColumnData::Utf8 { offsets, bytes } => offsets.push(bytes.len() as u64),
        }
        self.validity.push(false);
        self.nulls += 1;
    }

    pub fn push_i64(&mut self, x: i64) {
        self.push(Value::Int64(x)).expect("int64 builder");
    }

    pub fn push_f64(&mut self, x: f64) {
        self.push(Value::Float64(x)).expect("float64 builder");
    }

    pub fn push_str(&mut self, s: &str) {
        self.push(Value::Utf8(s)).expect("utf8 builder");
    }

    pub fn push(&mut self, value: Value<'_>) -> Result<()> {
        match (&mut self.data, value) {
            (_, Value::Null) => {
                self.push_null();
                return Ok(());
            }
            (ColumnData::Int64(v), Value::Int64(x)) => v.push(x),
            (ColumnData::Float64(v), Value::Float64(x)) => v.push(x),
            (ColumnData::Bool(v), Value::Bool(x)) => v.push(x),
            (ColumnData::Utf8 { offsets, bytes }, Value::Utf8(s)) => {
                bytes.extend_from_slice(s.as_bytes());
                offsets.push(bytes.len() as u64);
            }
            (d, v) => {
                return Err(Error::schema(format!(
                    "cannot push {v} into {} column",
                    d.dtype()
                )));
            }
        }
        self.validity.push(true);
        Ok(())
    }

    /// Copies row `i` of `col`, which must have this builder's dtype.
    pub fn push_from(&mut self, col: &Column, i: usize) {
        self.push(col.value(i)).expect("push_from dtype mismatch");
    }

    pub fn finish(self) -> Column {
        Column {
            data: self.data,
            validity: (self.nulls > 0).then_some(self.validity),
        }
    }
}
