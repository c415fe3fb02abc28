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

//! Single-worker kernels shared by the distributed operators.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::columnar::{Column, ColumnBuilder, ColumnData, DataType, Field, Schema, Table};
use crate::error::{Error, Result};

use super::{take_opt, JoinKind, LocalJoinMethod};

/// Groups rows by the encoded key over `cols`. Returns the group id of each
/// row and the first row of each group, in order of first appearance.
pub(crate) fn group_rows(t: &Table, cols: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut ids: HashMap<Vec<u8>, usize> = HashMap::with_capacity(t.num_rows());
    let mut gid = Vec::with_capacity(t.num_rows());
    let mut first = Vec::new();
    let mut buf = Vec::new();
    for i in 0..t.num_rows() {
        buf.clear();
        t.encode_key(i, cols, &mut buf);
        let next = first.len();
        let g = *ids.entry(buf.clone()).or_insert(next);
        if g == next {
            first.push(i);
        }
        gid.push(g);
    }
    (gid, first)
}

/// First occurrence of each distinct key over `cols`, in row order.
pub(crate) fn distinct(t: &Table, cols: &[usize]) -> Table {
    let (_, first) = group_rows(t, cols);
    if first.len() == t.num_rows() {
        return t.clone();
    }
    t.take_rows(&first).expect("indices in range")
}

/// Distinct rows of `a` whose full row does not occur in `b`.
pub(crate) fn set_difference(a: &Table, b: &Table) -> Table {
    let all: Vec<usize> = (0..b.num_columns()).collect();
    let mut buf = Vec::new();
    let mut seen: std::collections::HashSet<Vec<u8>> = (0..b.num_rows())
        .map(|i| {
            buf.clear();
            b.encode_key(i, &all, &mut buf);
            buf.clone()
        })
        .collect();
    let keep: Vec<usize> = (0..a.num_rows())
        .filter(|&i| {
            buf.clear();
            a.encode_key(i, &all, &mut buf);
            seen.insert(buf.clone())
        })
        .collect();
    a.take_rows(&keep).expect("indices in range")
}

/// Matching row pairs of an equi-join plus, for each side, whether a row
/// found any partner.
pub(crate) struct Matches {
    pub pairs: Vec<(usize, usize)>,
    pub left_matched: Vec<bool>,
    pub right_matched: Vec<bool>,
}

pub(crate) fn match_rows(
    l: &Table,
    r: &Table,
    lk: &[usize],
    rk: &[usize],
    method: LocalJoinMethod,
) -> Matches {
    let mut m = Matches {
        pairs: Vec::new(),
        left_matched: vec![false; l.num_rows()],
        right_matched: vec![false; r.num_rows()],
    };
    match method {
        LocalJoinMethod::Hash => hash_match(l, r, lk, rk, &mut m),
        LocalJoinMethod::SortMerge => merge_match(l, r, lk, rk, &mut m),
    }
    for &(i, j) in &m.pairs {
        m.left_matched[i] = true;
        m.right_matched[j] = true;
    }
    m
}

fn hash_match(l: &Table, r: &Table, lk: &[usize], rk: &[usize], m: &mut Matches) {
    let build_left = l.num_rows() < r.num_rows();
    let (build, bk, probe, pk) = if build_left {
        (l, lk, r, rk)
    } else {
        (r, rk, l, lk)
    };
    let mut table: HashMap<Vec<u8>, Vec<usize>> = HashMap::with_capacity(build.num_rows());
    let mut buf = Vec::new();
    for i in 0..build.num_rows() {
        buf.clear();
        build.encode_key(i, bk, &mut buf);
        table.entry(buf.clone()).or_default().push(i);
    }
    for j in 0..probe.num_rows() {
        buf.clear();
        probe.encode_key(j, pk, &mut buf);
        if let Some(rows) = table.get(&buf) {
            for &i in rows {
                m.pairs.push(if build_left { (i, j) } else { (j, i) });
            }
        }
    }
}

fn merge_match(l: &Table, r: &Table, lk: &[usize], rk: &[usize], m: &mut Matches) {
    let li = l.sort_indices(lk);
    let ri = r.sort_indices(rk);
    let (mut a, mut b) = (0, 0);
    while a < li.len() && b < ri.len() {
        match l.cmp_rows_on(li[a], r, ri[b], lk, rk) {
            Ordering::Less => a += 1,
            Ordering::Greater => b += 1,
            Ordering::Equal => {
                let a_end = a + li[a..]
                    .iter()
                    .take_while(|&&x| l.cmp_rows_on(x, l, li[a], lk, lk).is_eq())
                    .count();
                let b_end = b + ri[b..]
                    .iter()
                    .take_while(|&&y| r.cmp_rows_on(y, r, ri[b], rk, rk).is_eq())
                    .count();
                for &x in &li[a..a_end] {
                    for &y in &ri[b..b_end] {
                        m.pairs.push((x, y));
                    }
                }
                a = a_end;
                b = b_end;
            }
        }
    }
}

/// Output layout of a join: every left column, then the right non-key
/// columns. Right names that clash get a `_right` suffix.
pub(crate) fn join_schema(
    l: &Table,
    r: &Table,
    lk: &[usize],
    rk: &[usize],
) -> Result<(Schema, Vec<usize>)> {
    if lk.len() != rk.len() || lk.is_empty() {
        return Err(Error::invalid(
            "join needs the same non-zero number of keys on both sides",
        ));
    }
    for (&a, &b) in lk.iter().zip(rk) {
        let (fa, fb) = (l.schema().field(a), r.schema().field(b));
        if fa.dtype != fb.dtype {
            return Err(Error::schema(format!(
                "join key dtype mismatch: {} is {}, {} is {}",
                fa.name, fa.dtype, fb.name, fb.dtype
            )));
        }
    }
    let mut fields: Vec<Field> = l.schema().fields().to_vec();
    let right_cols: Vec<usize> = (0..r.num_columns()).filter(|c| !rk.contains(c)).collect();
    for &c in &right_cols {
        let f = r.schema().field(c);
        let mut name = f.name.clone();
        while fields.iter().any(|g| g.name == name) {
            name.push_str("_right");
        }
        fields.push(Field::new(name, f.dtype));
    }
    Ok((Schema::new(fields)?, right_cols))
}

/// Materializes matched pairs plus the unmatched rows `kind` keeps.
/// `emit_right_unmatched` lets a caller suppress right-side leftovers.
pub(crate) fn assemble_join(
    l: &Table,
    r: &Table,
    lk: &[usize],
    rk: &[usize],
    kind: JoinKind,
    m: &Matches,
    right_unmatched: Option<&[bool]>,
) -> Result<Table> {
    let (schema, right_cols) = join_schema(l, r, lk, rk)?;
    let mut rows: Vec<(Option<usize>, Option<usize>)> =
        m.pairs.iter().map(|&(i, j)| (Some(i), Some(j))).collect();
    if kind.keeps_left() {
        rows.extend(
            m.left_matched
                .iter()
                .enumerate()
                .filter(|(_, &hit)| !hit)
                .map(|(i, _)| (Some(i), None)),
        );
    }
    if kind.keeps_right() {
        let matched = right_unmatched.unwrap_or(&m.right_matched);
        rows.extend(
            matched
                .iter()
                .enumerate()
                .filter(|(_, &hit)| !hit)
                .map(|(j, _)| (None, Some(j))),
        );
    }
    let li: Vec<Option<usize>> = rows.iter().map(|p| p.0).collect();
    let ri: Vec<Option<usize>> = rows.iter().map(|p| p.1).collect();
    let mut columns = Vec::with_capacity(schema.len());
    for c in 0..l.num_columns() {
        match lk.iter().position(|&k| k == c) {
            Some(pos) if kind.keeps_right() => {
                // coalesce: right-only rows take the key from the right
                let (lc, rc) = (l.column(c), r.column(rk[pos]));
                let mut b = ColumnBuilder::new(lc.dtype());
                for (a, b_) in li.iter().zip(&ri) {
                    match (a, b_) {
                        (Some(i), _) => b.push_from(lc, *i),
                        (None, Some(j)) => b.push_from(rc, *j),
                        (None, None) => unreachable!("every output row has a side"),
                    }
                }
                columns.push(b.finish());
            }
            _ => columns.push(take_opt(l.column(c), &li)),
        }
    }
    for &c in &right_cols {
        columns.push(take_opt(r.column(c), &ri));
    }
    Table::try_new(schema, columns)
}

/// Per-group reduction kernels used by groupby.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kernel {
    /// Sum in the input dtype.
    Sum,
    /// Sum accumulated as Float64.
    SumF64,
    Min,
    Max,
    /// Count of non-null values.
    Count,
}

/// Groups `t` by `keys` and reduces each `(column, kernel, name)`.
/// Output: key columns (first row of each group), then one column per item.
pub(crate) fn aggregate_groups(
    t: &Table,
    keys: &[usize],
    plan: &[(usize, Kernel, String)],
) -> Result<Table> {
    let (gid, first) = group_rows(t, keys);
    let groups = first.len();
    let mut fields: Vec<Field> = keys.iter().map(|&k| t.schema().field(k).clone()).collect();
    let mut columns: Vec<Column> = keys.iter().map(|&k| t.column(k).take(&first)).collect();
    for (c, kernel, name) in plan {
        let col = t.column(*c);
        let out = reduce_column(col, &gid, groups, *kernel)?;
        fields.push(Field::new(name.clone(), out.dtype()));
        columns.push(out);
    }
    Table::try_new(Schema::new(fields)?, columns)
}

fn reduce_column(col: &Column, gid: &[usize], groups: usize, kernel: Kernel) -> Result<Column> {
    let valid = |i: usize| col.is_valid(i);
    Ok(match kernel {
        Kernel::Count => {
            let mut n = vec![0i64; groups];
            for (i, &g) in gid.iter().enumerate() {
                n[g] += valid(i) as i64;
            }
            Column::from_i64(n)
        }
        Kernel::Sum => match col.data() {
            ColumnData::Int64(v) => {
                let mut s = vec![0i64; groups];
                for (i, &g) in gid.iter().enumerate() {
                    if valid(i) {
                        s[g] = s[g].wrapping_add(v[i]);
                    }
                }
                Column::from_i64(s)
            }
            ColumnData::Float64(v) => {
                let mut s = vec![0f64; groups];
                for (i, &g) in gid.iter().enumerate() {
                    if valid(i) {
                        s[g] += v[i];
                    }
                }
                Column::from_f64(s)
            }
            _ => {
                return Err(Error::invalid(format!(
                    "cannot sum a {} column",
                    col.dtype()
                )))
            }
        },
        Kernel::SumF64 => {
            let mut s = vec![0f64; groups];
            match col.data() {
                ColumnData::Int64(v) => {
                    for (i, &g) in gid.iter().enumerate() {
                        if valid(i) {
                            s[g] += v[i] as f64;
                        }
                    }
                }
                ColumnData::Float64(v) => {
                    for (i, &g) in gid.iter().enumerate() {
                        if valid(i) {
                            s[g] += v[i];
                        }
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "cannot sum a {} column",
                        col.dtype()
                    )))
                }
            }
            Column::from_f64(s)
        }
        Kernel::Min | Kernel::Max => {
            let want = if kernel == Kernel::Min {
                Ordering::Less
            } else {
                Ordering::Greater
            };
            let mut best: Vec<Option<usize>> = vec![None; groups];
            for (i, &g) in gid.iter().enumerate() {
                if !valid(i) {
                    continue;
                }
                match best[g] {
                    Some(b) if col.cmp_rows(i, col, b) != want => {}
                    _ => best[g] = Some(i),
                }
            }
            take_opt(col, &best)
        }
    })
}

/// `sum / count` per row, null where the count is zero.
pub(crate) fn finalize_mean(sum: &Column, count: &Column) -> Column {
    let s = sum.f64_values().expect("float sums");
    let n = count.i64_values().expect("integer counts");
    Column::from_opt_f64(
        s.iter()
            .zip(n)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64)),
    )
}

pub(crate) fn check_same_fields(a: &Table, b: &Table) -> Result<()> {
    if a.schema() != b.schema() {
        return Err(Error::schema(format!(
            "schemas differ: {:?} vs {:?}",
            a.schema().fields(),
            b.schema().fields()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_dtype(col: &Column, dtypes: &[DataType], what: &str) -> Result<()> {
    if dtypes.contains(&col.dtype()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} does not support a {} column",
            col.dtype()
        )))
    }
}
