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

//! Partitioned CSV input and output.
//!
//! Format: comma separated, header row first, RFC 4180 quoting, `\n` or
//! `\r\n` line ends. An empty unquoted field is null; a quoted field is
//! always text. Column types are inferred over all files: `true`/`false`
//! make Bool, integers Int64, other numbers Float64, anything else Utf8.
//! A column with no values at all is read as Utf8.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::columnar::{Column, ColumnBuilder, DataType, Field, Schema, Table, Value};
use crate::comm::{ReduceOp, WorkerContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    text: String,
    quoted: bool,
}

#[derive(Debug)]
struct RawCsv {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

const SAW_BOOL: u64 = 1;
const SAW_INT: u64 = 2;
const SAW_FLOAT: u64 = 4;
const SAW_TEXT: u64 = 8;

fn parse_records(text: &str) -> std::result::Result<Vec<Vec<Cell>>, String> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    loop {
        // at the start of a field
        let Some(&c) = chars.peek() else {
            if !record.is_empty() {
                return Err(format!("line {line}: record ends after a separator"));
            }
            break;
        };
        let mut cell = Cell {
            text: String::new(),
            quoted: false,
        };
        if c == '"' {
            cell.quoted = true;
            chars.next();
            loop {
                match chars.next() {
                    None => return Err(format!("line {line}: unterminated quoted field")),
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        cell.text.push('"');
                    }
                    Some('"') => break,
                    Some(ch) => {
                        if ch == '\n' {
                            line += 1;
                        }
                        cell.text.push(ch);
                    }
                }
            }
        } else {
            while let Some(&ch) = chars.peek() {
                if ch == ',' || ch == '\n' || ch == '\r' {
                    break;
                }
                if ch == '"' {
                    return Err(format!("line {line}: quote inside an unquoted field"));
                }
                cell.text.push(ch);
                chars.next();
            }
        }
        record.push(cell);
        match chars.next() {
            Some(',') => {
                if chars.peek().is_none() {
                    return Err(format!("line {line}: record ends after a separator"));
                }
            }
            Some('\r') if chars.peek() == Some(&'\n') => {
                chars.next();
                records.push(std::mem::take(&mut record));
                line += 1;
            }
            Some('\n') | None => {
                records.push(std::mem::take(&mut record));
                line += 1;
            }
            Some(ch) => {
                return Err(format!(
                    "line {line}: unexpected {ch:?} after a quoted field"
                ))
            }
        }
        if chars.peek().is_none() {
            break;
        }
    }
    Ok(records)
}

fn read_raw(text: &str) -> std::result::Result<RawCsv, String> {
    let mut records = parse_records(text)?.into_iter();
    let header: Vec<String> = records
        .next()
        .ok_or("missing header row")?
        .into_iter()
        .map(|c| c.text)
        .collect();
    let rows: Vec<Vec<Cell>> = records.collect();
    if let Some((i, r)) = rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != header.len())
    {
        return Err(format!(
            "row {} has {} fields, header has {}",
            i + 1,
            r.len(),
            header.len()
        ));
    }
    Ok(RawCsv { header, rows })
}

fn classify(cell: &Cell) -> u64 {
    if cell.quoted {
        return SAW_TEXT;
    }
    let s = cell.text.as_str();
    if s.is_empty() {
        0
    } else if s == "true" || s == "false" {
        SAW_BOOL
    } else if s.parse::<i64>().is_ok() {
        SAW_INT
    } else if s.parse::<f64>().is_ok() {
        SAW_FLOAT
    } else {
        SAW_TEXT
    }
}

fn column_flags(raw: &[RawCsv], ncols: usize) -> Vec<u64> {
    let mut flags = vec![0u64; ncols];
    for r in raw {
        for row in &r.rows {
            for (f, cell) in flags.iter_mut().zip(row) {
                *f |= classify(cell);
            }
        }
    }
    flags
}

fn resolve_dtype(flags: u64) -> DataType {
    let numeric = flags & (SAW_INT | SAW_FLOAT) != 0;
    if flags & SAW_TEXT != 0 || (flags & SAW_BOOL != 0 && numeric) || flags == 0 {
        DataType::Utf8
    } else if flags & SAW_BOOL != 0 {
        DataType::Bool
    } else if flags & SAW_FLOAT != 0 {
        DataType::Float64
    } else {
        DataType::Int64
    }
}

fn build_table(
    header: &[String],
    dtypes: &[DataType],
    raw: &[RawCsv],
) -> std::result::Result<Table, String> {
    let mut builders: Vec<ColumnBuilder> = dtypes.iter().map(|&d| ColumnBuilder::new(d)).collect();
    for r in raw {
        for row in &r.rows {
            for (b, cell) in builders.iter_mut().zip(row) {
                if !cell.quoted && cell.text.is_empty() {
                    b.push_null();
                    continue;
                }
                let s = cell.text.as_str();
                let dtype = b.dtype();
                let bad = || format!("cannot read {s:?} as {dtype}");
                match dtype {
                    DataType::Utf8 => b.push_str(s),
                    DataType::Int64 => b.push_i64(s.parse().map_err(|_| bad())?),
                    DataType::Float64 => b.push_f64(s.parse().map_err(|_| bad())?),
                    DataType::Bool => b
                        .push(Value::Bool(s == "true"))
                        .map_err(|e| e.to_string())?,
                }
            }
        }
    }
    let fields = header
        .iter()
        .zip(dtypes)
        .map(|(n, &d)| Field::new(n.clone(), d))
        .collect();
    let schema = Schema::new(fields).map_err(|e| e.to_string())?;
    Table::try_new(
        schema,
        builders.into_iter().map(ColumnBuilder::finish).collect(),
    )
    .map_err(|e| e.to_string())
}

/// Parses one CSV document into a table.
pub fn parse_csv(text: &str) -> Result<Table> {
    let raw = read_raw(text).map_err(Error::invalid)?;
    let flags = column_flags(std::slice::from_ref(&raw), raw.header.len());
    let dtypes: Vec<DataType> = flags.into_iter().map(resolve_dtype).collect();
    build_table(&raw.header, &dtypes, std::slice::from_ref(&raw)).map_err(Error::invalid)
}

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        if ch == '"' {
            out.push('"');
        }
        out.push(ch);
    }
    out.push('"');
}

/// Writes `t` as CSV. Strings and header names are always quoted, floats
/// use the shortest round-trip form, nulls are empty fields.
pub fn write_csv(t: &Table, mut out: impl Write) -> Result<()> {
    let mut line = String::new();
    for (i, f) in t.schema().fields().iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        quote(&f.name, &mut line);
    }
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for r in 0..t.num_rows() {
        line.clear();
        for (i, c) in t.columns().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            match c.value(r) {
                Value::Null => {}
                Value::Int64(x) => write!(line, "{x}").expect("string write"),
                Value::Float64(x) => write!(line, "{x:?}").expect("string write"),
                Value::Bool(x) => write!(line, "{x}").expect("string write"),
                Value::Utf8(s) => quote(s, &mut line),
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Each rank writes its partition to `out_dir/part-{rank:05}.csv`
/// (collective: returns once every rank has written).
pub fn write_csv_partitioned(
    ctx: &mut WorkerContext,
    t: &Table,
    out_dir: &Path,
) -> Result<PathBuf> {
    let rank = ctx.rank();
    let path = out_dir.join(format!("part-{rank:05}.csv"));
    let written = ctx.stage("write", |_| {
        fs::create_dir_all(out_dir)?;
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        write_csv(t, &mut f)?;
        f.flush()?;
        Ok(())
    });
    let ok = ctx.allreduce(&[written.is_ok() as u64], ReduceOp::Min)?;
    written?;
    if ok[0] == 0 {
        return Err(Error::Collective {
            rank,
            message: "csv write failed on another rank".into(),
        });
    }
    Ok(path)
}

/// Reads files round-robin: rank `r` takes `paths[r]`, `paths[r + P]`, ...
/// (collective). The header comes from the lowest rank holding a file;
/// ranks without files return an empty table of the agreed schema.
pub fn read_csv_partitioned<P: AsRef<Path>>(ctx: &mut WorkerContext, paths: &[P]) -> Result<Table> {
    ctx.stage("read", |c| read_impl(c, paths))
}

fn read_impl<P: AsRef<Path>>(ctx: &mut WorkerContext, paths: &[P]) -> Result<Table> {
    let (rank, world) = (ctx.rank(), ctx.world_size());
    let mine: Vec<&Path> = paths
        .iter()
        .skip(rank)
        .step_by(world)
        .map(AsRef::as_ref)
        .collect();
    let csv_err = |path: &Path, message: String| Error::Csv {
        rank,
        path: path.display().to_string(),
        message,
    };
    let local: Result<Vec<RawCsv>> = mine
        .iter()
        .map(|&p| {
            let text = fs::read_to_string(p).map_err(|e| csv_err(p, e.to_string()))?;
            read_raw(&text).map_err(|m| csv_err(p, m))
        })
        .collect();
    let local = local.and_then(|raw| {
        if let Some((i, r)) = raw
            .iter()
            .enumerate()
            .find(|(_, r)| r.header != raw[0].header)
        {
            return Err(csv_err(
                mine[i],
                format!("header {:?} differs from {:?}", r.header, raw[0].header),
            ));
        }
        Ok(raw)
    });

    let holder = if mine.is_empty() { world } else { rank } as u64;
    let agreed = ctx.allreduce(&[holder, local.is_ok() as u64], ReduceOp::Min)?;
    let raw = match local {
        Err(e) => return Err(e),
        Ok(_) if agreed[1] == 0 => {
            return Err(Error::Collective {
                rank,
                message: "csv read failed on another rank".into(),
            })
        }
        Ok(raw) => raw,
    };
    let root = agreed[0] as usize;
    if root == world {
        return Err(Error::invalid("no input files"));
    }
    let names = (rank == root)
        .then(|| Table::from_columns(vec![("name", Column::from_strs(&raw[0].header))]))
        .transpose()?;
    let names = ctx.broadcast_table(names.as_ref(), root)?;
    let header: Vec<String> = (0..names.num_rows())
        .map(|i| match names.column(0).value(i) {
            Value::Utf8(s) => s.to_string(),
            other => other.to_string(),
        })
        .collect();

    let mismatch = raw.first().is_some_and(|r| r.header != header);
    let mut flags = vec![mismatch as u64];
    flags.extend(column_flags(&raw, header.len()));
    let flags = ctx.allreduce(&flags, ReduceOp::Max)?;
    if mismatch {
        return Err(csv_err(
            mine[0],
            format!("header differs from the agreed {header:?}"),
        ));
    }
    if flags[0] != 0 {
        return Err(Error::Collective {
            rank,
            message: "csv header mismatch on another rank".into(),
        });
    }
    let dtypes: Vec<DataType> = flags[1..].iter().map(|&f| resolve_dtype(f)).collect();
    build_table(&header, &dtypes, &raw).map_err(|m| Error::Collective { rank, message: m })
}
