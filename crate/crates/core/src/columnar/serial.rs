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

//! Flat buffer-list encoding of a table.
//!
//! Header layout (all integers little-endian):
//!
//! ```text
//! "DDF1" | u32 column count | u64 row count
//! per column: u8 dtype tag | u8 flags (bit0 = has validity) | u16 name length | name bytes
//! per buffer: u64 byte length
//! ```
//!
//! Buffers follow in column order; within a column: validity, offsets, data.

use super::bitmap::Bitmap;
use super::column::{Column, ColumnData, DataType};
use super::table::{Field, Schema, Table};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DDF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferRole {
    Validity,
    Offsets,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnHeader {
    pub name: String,
    pub dtype: DataType,
    pub has_validity: bool,
}

impl ColumnHeader {
    fn roles(&self) -> impl Iterator<Item = BufferRole> {
        [
            self.has_validity.then_some(BufferRole::Validity),
            (self.dtype == DataType::Utf8).then_some(BufferRole::Offsets),
            Some(BufferRole::Data),
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableHeader {
    pub rows: u64,
    pub columns: Vec<ColumnHeader>,
    pub buffer_sizes: Vec<u64>,
}

impl TableHeader {
    /// Role of every buffer, in wire order.
    pub fn buffer_roles(&self) -> Vec<(usize, BufferRole)> {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.roles().map(move |r| (i, r)))
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(16 + self.columns.len() * 16 + self.buffer_sizes.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.columns.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.rows.to_le_bytes());
        for c in &self.columns {
            out.push(c.dtype.tag());
            out.push(c.has_validity as u8);
            out.extend_from_slice(&(c.name.len() as u16).to_le_bytes());
            out.extend_from_slice(c.name.as_bytes());
        }
        for s in &self.buffer_sizes {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::decode("bad magic, expected DDF1"));
        }
        let ncols = r.u32()? as usize;
        let rows = r.u64()?;
        let mut columns = Vec::with_capacity(ncols.min(4096));
        for _ in 0..ncols {
            let dtype = DataType::from_tag(r.u8()?)?;
            let flags = r.u8()?;
            if flags & !1 != 0 {
                return Err(Error::decode(format!("unknown column flags {flags:#x}")));
            }
            let nlen = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(nlen)?)
                .map_err(|_| Error::decode("column name is not utf8"))?
                .to_string();
            columns.push(ColumnHeader {
                name,
                dtype,
                has_validity: flags & 1 == 1,
            });
        }
        let nbuf: usize = columns.iter().map(|c| c.roles().count()).sum();
        let mut buffer_sizes = Vec::with_capacity(nbuf);
        for _ in 0..nbuf {
            buffer_sizes.push(r.u64()?);
        }
        if r.pos != bytes.len() {
            return Err(Error::decode(format!(
                "{} trailing header bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            rows,
            columns,
            buffer_sizes,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::decode("truncated header"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Header plus ordered byte buffers; what actually crosses between workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedTable {
    pub header: TableHeader,
    pub buffers: Vec<Vec<u8>>,
}

impl SerializedTable {
    /// Encoded header length plus all buffer lengths.
    pub fn byte_size(&self) -> usize {
        self.header.encode().len() + self.buffers.iter().map(Vec::len).sum::<usize>()
    }

    /// `[header bytes, buffer 0, buffer 1, ...]`
    pub fn into_frames(self) -> Vec<Vec<u8>> {
        let mut frames = Vec::with_capacity(self.buffers.len() + 1);
        frames.push(self.header.encode());
        frames.extend(self.buffers);
        frames
    }

    pub fn from_frames(mut frames: Vec<Vec<u8>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::decode("no header frame"));
        }
        let header = TableHeader::decode(&frames[0])?;
        frames.remove(0);
        Ok(Self {
            header,
            buffers: frames,
        })
    }
}

pub fn serialize_table(t: &Table) -> SerializedTable {
    let mut columns = Vec::with_capacity(t.num_columns());
    let mut buffers = Vec::new();
    for (f, c) in t.schema().fields().iter().zip(t.columns()) {
        columns.push(ColumnHeader {
            name: f.name.clone(),
            dtype: f.dtype,
            has_validity: c.validity().is_some(),
        });
        if let Some(v) = c.validity() {
            buffers.push(v.as_bytes().to_vec());
        }
        match c.data() {
            ColumnData::Int64(v) => buffers.push(v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            ColumnData::Float64(v) => {
                buffers.push(v.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect())
            }
            ColumnData::Bool(v) => buffers.push(v.iter().map(|&b| b as u8).collect()),
            ColumnData::Utf8 { offsets, bytes } => {
                buffers.push(offsets.iter().flat_map(|o| o.to_le_bytes()).collect());
                buffers.push(bytes.clone());
            }
        }
    }
    let buffer_sizes = buffers.iter().map(|b| b.len() as u64).collect();
    SerializedTable {
        header: TableHeader {
            rows: t.num_rows() as u64,
            columns,
            buffer_sizes,
        },
        buffers,
    }
}

pub fn deserialize_table(s: SerializedTable) -> Result<Table> {
    let SerializedTable { header, buffers } = s;
    let roles = header.buffer_roles();
    if roles.len() != buffers.len() || header.buffer_sizes.len() != buffers.len() {
        return Err(Error::decode(format!(
            "header declares {} buffers, {} present",
            roles.len(),
            buffers.len()
        )));
    }
    for (i, (declared, b)) in header.buffer_sizes.iter().zip(&buffers).enumerate() {
        if *declared != b.len() as u64 {
            return Err(Error::decode(format!(
                "buffer {i}: header claims {declared} bytes, buffer has {}",
                b.len()
            )));
        }
    }
    let rows = usize::try_from(header.rows).map_err(|_| Error::decode("row count overflow"))?;
    let mut bufs = buffers.into_iter();
    let mut fields = Vec::with_capacity(header.columns.len());
    let mut columns = Vec::with_capacity(header.columns.len());
    for ch in header.columns {
        let validity = if ch.has_validity {
            Some(Bitmap::from_bytes(bufs.next().expect("counted"), rows)?)
        } else {
            None
        };
        let data = match ch.dtype {
            DataType::Utf8 => {
                let off = bufs.next().expect("counted");
                expect_len(&ch.name, "offsets", off.len(), (rows + 1) * 8)?;
                let offsets = off
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().expect("8")))
                    .collect();
                ColumnData::Utf8 {
                    offsets,
                    bytes: bufs.next().expect("counted"),
                }
            }
            dt => {
                let raw = bufs.next().expect("counted");
                let width = dt.fixed_width().expect("fixed width");
                expect_len(&ch.name, "data", raw.len(), rows * width)?;
                match dt {
                    DataType::Int64 => ColumnData::Int64(
                        raw.chunks_exact(8)
                            .map(|c| i64::from_le_bytes(c.try_into().expect("8")))
                            .collect(),
                    ),
                    DataType::Float64 => ColumnData::Float64(
                        raw.chunks_exact(8)
                            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8"))))
                            .collect(),
                    ),
                    DataType::Bool => {
                        if let Some(b) = raw.iter().find(|&&b| b > 1) {
                            return Err(Error::decode(format!(
                                "bool byte {b} in column '{}'",
                                ch.name
                            )));
                        }
                        ColumnData::Bool(raw.iter().map(|&b| b == 1).collect())
                    }
                    DataType::Utf8 => unreachable!(),
                }
            }
        };
        columns.push(Column::try_new(data, validity)?);
        fields.push(Field::new(ch.name, ch.dtype));
    }
    Table::try_new(Schema::new(fields)?, columns)
}

fn expect_len(col: &str, what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::decode(format!(
            "column '{col}' {what} buffer has {got} bytes, expected {want}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_has_one_zero_byte_buffer() {
        let t = Table::empty(Schema::of(&[("k", DataType::Int64)]).unwrap());
        let s = serialize_table(&t);
        assert_eq!(s.header.rows, 0);
        assert_eq!(s.buffers, vec![Vec::<u8>::new()]);
        assert_eq!(deserialize_table(s).unwrap(), t);
    }

    #[test]
    fn int_column_is_one_24_byte_buffer() {
        let t = Table::from_columns(vec![("k", Column::from_i64(vec![1, 2, 3]))]).unwrap();
        let s = serialize_table(&t);
        assert_eq!(s.buffers.len(), 1);
        assert_eq!(s.buffers[0].len(), 24);
        assert_eq!(s.header.buffer_roles(), vec![(0, BufferRole::Data)]);
    }

    #[test]
    fn header_layout_is_bit_exact() {
        let t =
            Table::from_columns(vec![("ab", Column::from_opt_strs([Some("x"), None]))]).unwrap();
        let h = serialize_table(&t).header.encode();
        let mut want = b"DDF1".to_vec();
        want.extend_from_slice(&1u32.to_le_bytes());
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&[3, 1, 2, 0, b'a', b'b']);
        for size in [1u64, 24, 1] {
            want.extend_from_slice(&size.to_le_bytes());
        }
        assert_eq!(h, want);
    }

    #[test]
    fn size_mismatch_is_decode_error() {
        let t = Table::from_columns(vec![("k", Column::from_i64(vec![1, 2, 3]))]).unwrap();
        let mut s = serialize_table(&t);
        s.buffers[0].truncate(16);
        assert!(matches!(deserialize_table(s), Err(Error::Decode(_))));
    }

    #[test]
    fn consistent_header_with_wrong_row_count_is_rejected() {
        let t = Table::from_columns(vec![("k", Column::from_i64(vec![1, 2, 3]))]).unwrap();
        let mut s = serialize_table(&t);
        s.header.rows = 2;
        assert!(deserialize_table(s).is_err());
    }

    #[test]
    fn unknown_dtype_tag_rejected() {
        let t = Table::from_columns(vec![("k", Column::from_i64(vec![1]))]).unwrap();
        let mut h = serialize_table(&t).header.encode();
        h[16] = 9;
        assert!(TableHeader::decode(&h).is_err());
        assert!(TableHeader::decode(&h[..10]).is_err());
    }

    #[test]
    fn frames_round_trip() {
        let t = Table::from_columns(vec![
            (
                "a",
                Column::from_opt_f64([Some(f64::NAN), None, Some(-0.0)]),
            ),
            ("b", Column::from_bool(vec![true, false, true])),
        ])
        .unwrap();
        let s = serialize_table(&t);
        let frames = s.clone().into_frames();
        assert_eq!(frames.iter().map(Vec::len).sum::<usize>(), s.byte_size());
        let back = SerializedTable::from_frames(frames).unwrap();
        assert_eq!(back, s);
        assert_eq!(deserialize_table(back).unwrap(), t);
    }
}
