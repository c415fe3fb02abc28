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
use std::collections::HashSet;

use super::column::{Column, DataType, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub dtype: DataType,
}

impl Field {
    pub fn new(name: impl Into<String>, dtype: DataType) -> Self {
        Self {
            name: name.into(),
            dtype,
        }
    }
}

/// Ordered, uniquely named fields plus optional key designation.
///
/// Key positions are local metadata: they are not carried on the wire and do
/// not take part in equality.
#[derive(Debug, Clone)]
pub struct Schema {
    fields: Vec<Field>,
    key_indices: Option<Vec<usize>>,
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.fields == other.fields
    }
}

impl Eq for Schema {}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::schema(format!("duplicate column name '{}'", f.name)));
            }
        }
        Ok(Self {
            fields,
            key_indices: None,
        })
    }

    /// Convenience constructor from `(name, dtype)` pairs.
    pub fn of(fields: &[(&str, DataType)]) -> Result<Self> {
        Self::new(fields.iter().map(|(n, d)| Field::new(*n, *d)).collect())
    }

    pub fn with_keys(mut self, keys: Vec<usize>) -> Result<Self> {
        if let Some(k) = keys.iter().find(|&&k| k >= self.fields.len()) {
            return Err(Error::schema(format!(
                "key index {k} out of bounds for {} columns",
                self.fields.len()
            )));
        }
        self.key_indices = Some(keys);
        Ok(self)
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn key_indices(&self) -> Option<&[usize]> {
        self.key_indices.as_deref()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }
}

/// A row-partition of a dataframe: columns of equal length under a schema.
/// Immutable once built; every operation returns a new table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    columns: Vec<Column>,
    rows: usize,
}

impl Table {
    pub fn try_new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::schema(format!(
                "schema has {} fields but {} columns were given",
                schema.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Column::len);
        for (f, c) in schema.fields().iter().zip(&columns) {
            if f.dtype != c.dtype() {
                return Err(Error::schema(format!(
                    "column '{}' declared {} but holds {}",
                    f.name,
                    f.dtype,
                    c.dtype()
                )));
            }
            if c.len() != rows {
                return Err(Error::schema(format!(
                    "column '{}' has {} rows, expected {}",
                    f.name,
                    c.len(),
                    rows
                )));
            }
        }
        Ok(Self {
            schema,
            columns,
            rows,
        })
    }

    /// Builds a table from `(name, column)` pairs.
    pub fn from_columns<S: Into<String>>(cols: Vec<(S, Column)>) -> Result<Self> {
        let mut fields = Vec::with_capacity(cols.len());
        let mut columns = Vec::with_capacity(cols.len());
        for (n, c) in cols {
            fields.push(Field::new(n, c.dtype()));
            columns.push(c);
        }
        Self::try_new(Schema::new(fields)?, columns)
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = schema
            .fields()
            .iter()
            .map(|f| Column::empty(f.dtype))
            .collect();
        Self {
            schema,
            columns,
            rows: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.schema.index_of(name)?])
    }

    pub fn into_parts(self) -> (Schema, Vec<Column>) {
        (self.schema, self.columns)
    }

    pub fn row(&self, i: usize) -> Vec<Value<'_>> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    /// Bytes per row for cost accounting: fixed widths plus average string bytes.
    pub fn row_width(&self) -> f64 {
        self.columns.iter().map(Column::avg_value_bytes).sum()
    }

    /// Output row `k` is input row `indices[k]`.
    pub fn take_rows(&self, indices: &[usize]) -> Result<Table> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows) {
            return Err(Error::invalid(format!(
                "row index {bad} out of range for table of {} rows",
                self.rows
            )));
        }
        Ok(self.take_unchecked(indices))
    }

    pub(crate) fn take_unchecked(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(indices)).collect(),
            rows: indices.len(),
        }
    }

    /// Keeps the columns at `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Table> {
        let mut fields = Vec::with_capacity(indices.len());
        let mut columns = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.columns.len() {
                return Err(Error::invalid(format!("column index {i} out of range")));
            }
            fields.push(self.schema.field(i).clone());
            columns.push(self.columns[i].clone());
        }
        Table::try_new(Schema::new(fields)?, columns)
    }

    /// Appends a byte encoding of the tuple at row `i` over `cols`.
    pub fn encode_key(&self, i: usize, cols: &[usize], out: &mut Vec<u8>) {
        for &c in cols {
            self.columns[c].encode_value(i, out);
        }
    }

    /// Lexicographic comparison of rows over `cols` (nulls first).
    pub fn cmp_rows_on(
        &self,
        i: usize,
        other: &Table,
        j: usize,
        cols: &[usize],
        other_cols: &[usize],
    ) -> Ordering {
        for (&a, &b) in cols.iter().zip(other_cols) {
            let o = self.columns[a].cmp_rows(i, &other.columns[b], j);
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    }

    /// Stable permutation ordering rows by `cols`.
    pub fn sort_indices(&self, cols: &[usize]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows).collect();
        idx.sort_by(|&a, &b| self.cmp_rows_on(a, self, b, cols, cols));
        idx
    }
}

/// Concatenates tables with identical schemas; with no parts, returns an
/// empty table of `schema`.
pub fn concat_tables(schema: &Schema, parts: &[Table]) -> Result<Table> {
    for p in parts {
        if p.schema() != schema {
            return Err(Error::schema(format!(
                "concat schema mismatch: {:?} vs {:?}",
                p.schema().fields(),
                schema.fields()
            )));
        }
    }
    match parts {
        [] => return Ok(Table::empty(schema.clone())),
        [one] => return Ok(one.clone()),
        _ => {}
    }
    let mut columns = Vec::with_capacity(schema.len());
    for (ci, f) in schema.fields().iter().enumerate() {
        let cols: Vec<&Column> = parts.iter().map(|p| p.column(ci)).collect();
        columns.push(Column::concat(f.dtype, &cols)?);
    }
    Table::try_new(schema.clone(), columns)
}

pub fn take_rows(t: &Table, indices: &[usize]) -> Result<Table> {
    t.take_rows(indices)
}

/// Orders rows by every column lexicographically, nulls first. Two tables
/// holding the same multiset of rows canonicalize to equal tables.
pub fn canonical_sort(t: &Table) -> Table {
    let cols: Vec<usize> = (0..t.num_columns()).collect();
    t.take_unchecked(&t.sort_indices(&cols))
}
