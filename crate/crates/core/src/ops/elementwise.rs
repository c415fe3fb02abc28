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

//! Embarrassingly parallel operators: purely local, no communication.

use crate::columnar::{ColumnBuilder, DataType, Schema, Table, Value};
use crate::error::Result;

use super::index_of;

/// Keeps rows whose value in `column` satisfies `pred`.
pub fn select(t: &Table, column: &str, pred: impl Fn(Value<'_>) -> bool) -> Result<Table> {
    let c = t.column(index_of(t, column)?);
    let keep: Vec<usize> = (0..t.num_rows()).filter(|&i| pred(c.value(i))).collect();
    t.take_rows(&keep)
}

/// Keeps rows for which `pred` holds over the whole row.
pub fn filter(t: &Table, pred: impl Fn(&[Value<'_>]) -> bool) -> Table {
    let keep: Vec<usize> = (0..t.num_rows()).filter(|&i| pred(&t.row(i))).collect();
    t.take_rows(&keep).expect("indices in range")
}

pub fn project<S: AsRef<str>>(t: &Table, columns: &[S]) -> Result<Table> {
    let idx = t.schema().indices_of(columns)?;
    t.select_columns(&idx)
}

/// Replaces `column` with `f` applied to each value; the result has `dtype`.
pub fn map_column(
    t: &Table,
    column: &str,
    dtype: DataType,
    f: impl for<'a> Fn(Value<'a>) -> Value<'a>,
) -> Result<Table> {
    let ci = index_of(t, column)?;
    let src = t.column(ci);
    let mut b = ColumnBuilder::new(dtype);
    for i in 0..t.num_rows() {
        b.push(f(src.value(i)))?;
    }
    let (schema, mut columns) = t.clone().into_parts();
    let mut fields = schema.fields().to_vec();
    fields[ci].dtype = dtype;
    columns[ci] = b.finish();
    Table::try_new(Schema::new(fields)?, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::columnar::Column;

    fn t() -> Table {
        Table::from_columns(vec![
            ("k", Column::from_i64(vec![1, 2, 3])),
            ("s", Column::from_strs(["a", "b", "c"])),
        ])
        .unwrap()
    }

    #[test]
    fn select_greater_than_two() {
        let out = select(&t(), "k", |v| matches!(v, Value::Int64(x) if x > 2)).unwrap();
        assert_eq!(out.column(0).i64_values().unwrap(), &[3]);
        assert!(select(&t(), "nope", |_| true).is_err());
    }

    #[test]
    fn project_drops_columns() {
        let out = project(&t(), &["k"]).unwrap();
        assert_eq!(out.num_columns(), 1);
        assert_eq!(out.schema().field(0).name, "k");
    }

    #[test]
    fn map_changes_type() {
        let out = map_column(&t(), "k", DataType::Float64, |v| match v {
            Value::Int64(x) => Value::Float64(x as f64 / 2.0),
            other => other,
        })
        .unwrap();
        assert_eq!(out.column(0).f64_values().unwrap(), &[0.5, 1.0, 1.5]);
        assert_eq!(out.schema().field(0).dtype, DataType::Float64);
    }

    #[test]
    fn filter_rows() {
        let out = filter(&t(), |r| r[1] != Value::Utf8("b"));
        assert_eq!(out.num_rows(), 2);
    }
}
