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

//! Serial reference implementations and random inputs for the acceptance
//! suite. Nothing here calls the library's local kernels: rows are owned
//! vectors and every operator is a straightforward loop or ordered map.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use ddf_core::columnar::{Column, DataType, Table, Value};
use ddf_core::ops::{AggFn, JoinKind};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// An owned cell.
#[derive(Debug, Clone)]
pub enum O {
    Null,
    I(i64),
    F(f64),
    B(bool),
    S(String),
}

impl O {
    fn tag(&self) -> u8 {
        match self {
            O::Null => 0,
            O::I(_) => 1,
            O::F(_) => 2,
            O::B(_) => 3,
            O::S(_) => 4,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, O::Null)
    }
}

impl Ord for O {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (O::I(a), O::I(b)) => a.cmp(b),
            (O::F(a), O::F(b)) => a.total_cmp(b),
            (O::B(a), O::B(b)) => a.cmp(b),
            (O::S(a), O::S(b)) => a.cmp(b),
            _ => self.tag().cmp(&other.tag()),
        }
    }
}

impl PartialOrd for O {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for O {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for O {}

pub type Row = Vec<O>;

pub fn cell(v: Value<'_>) -> O {
    match v {
        Value::Null => O::Null,
        Value::Int64(x) => O::I(x),
        Value::Float64(x) => O::F(x),
        Value::Bool(x) => O::B(x),
        Value::Utf8(s) => O::S(s.to_string()),
    }
}

pub fn rows_of(t: &Table) -> Vec<Row> {
    (0..t.num_rows())
        .map(|i| {
            (0..t.num_columns())
                .map(|c| cell(t.column(c).value(i)))
                .collect()
        })
        .collect()
}

pub fn names_of(t: &Table) -> Vec<String> {
    t.schema().fields().iter().map(|f| f.name.clone()).collect()
}

fn close(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn cells_match(a: &O, b: &O) -> bool {
    match (a, b) {
        (O::F(x), O::F(y)) => close(*x, *y),
        _ => a == b,
    }
}

/// Exact equality except Float64 cells, which may differ by 1e-9 relative.
pub fn same_sequence(got: &[Row], want: &[Row]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} rows, expected {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.len() != w.len() || !g.iter().zip(w).all(|(a, b)| cells_match(a, b)) {
            return Err(format!("row {i}: got {g:?}, expected {w:?}"));
        }
    }
    Ok(())
}

pub fn same_multiset(mut got: Vec<Row>, mut want: Vec<Row>) -> Result<(), String> {
    got.sort();
    want.sort();
    same_sequence(&got, &want)
}

// ---------------------------------------------------------------- inputs

const TRICKY: [&str; 8] = [
    "a",
    "b,c",
    "q\"uote",
    "",
    "line\nbreak",
    "\u{fc}n\u{ef}",
    "  sp ",
    "x\r\ny",
];

fn maybe<T>(rng: &mut ChaCha8Rng, null_p: f64, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    if rng.random_bool(null_p) {
        None
    } else {
        Some(f(rng))
    }
}

fn string(rng: &mut ChaCha8Rng, dom: i64) -> String {
    if rng.random_bool(0.4) {
        TRICKY.choose(rng).unwrap().to_string()
    } else {
        format!("s{}", rng.random_range(0..dom.max(1)))
    }
}

fn float(rng: &mut ChaCha8Rng) -> f64 {
    const SMALL: [f64; 6] = [0.5, -1.25, 3.0, 1e-3, 0.0, 1e6];
    if rng.random_bool(0.5) {
        *SMALL.choose(rng).unwrap()
    } else {
        rng.random_range(-1e3..1e3)
    }
}

fn opt_bools(v: Vec<Option<bool>>) -> Column {
    Column::from_values(
        DataType::Bool,
        v.into_iter().map(|b| b.map_or(Value::Null, Value::Bool)),
    )
    .unwrap()
}

/// Left table: `k` Int64, `s` Utf8, `f` Float64, `v` Int64, `b` Bool, all
/// with about 5% nulls; keys drawn from `0..kdom`.
pub fn left_table(rng: &mut ChaCha8Rng, rows: usize, kdom: i64) -> Table {
    let p = 0.05;
    let k: Vec<Option<i64>> = (0..rows)
        .map(|_| maybe(rng, p, |r| r.random_range(0..kdom)))
        .collect();
    let s: Vec<Option<String>> = (0..rows)
        .map(|_| maybe(rng, p, |r| string(r, kdom)))
        .collect();
    let f: Vec<Option<f64>> = (0..rows).map(|_| maybe(rng, p, float)).collect();
    let v: Vec<Option<i64>> = (0..rows)
        .map(|_| maybe(rng, p, |r| r.random_range(-1_000_000..1_000_000)))
        .collect();
    let b: Vec<Option<bool>> = (0..rows)
        .map(|_| maybe(rng, p, |r| r.random_bool(0.5)))
        .collect();
    Table::from_columns(vec![
        ("k", Column::from_opt_i64(k)),
        ("s", Column::from_opt_strs(s.iter().map(|x| x.as_deref()))),
        ("f", Column::from_opt_f64(f)),
        ("v", Column::from_opt_i64(v)),
        ("b", opt_bools(b)),
    ])
    .unwrap()
}

/// Right table: `k` Int64, `s` Utf8, `w` Int64.
pub fn right_table(rng: &mut ChaCha8Rng, rows: usize, kdom: i64) -> Table {
    let p = 0.05;
    let k: Vec<Option<i64>> = (0..rows)
        .map(|_| maybe(rng, p, |r| r.random_range(0..kdom)))
        .collect();
    let s: Vec<Option<String>> = (0..rows)
        .map(|_| maybe(rng, p, |r| string(r, kdom)))
        .collect();
    let w: Vec<Option<i64>> = (0..rows)
        .map(|_| maybe(rng, p, |r| r.random_range(0..1000)))
        .collect();
    Table::from_columns(vec![
        ("k", Column::from_opt_i64(k)),
        ("s", Column::from_opt_strs(s.iter().map(|x| x.as_deref()))),
        ("w", Column::from_opt_i64(w)),
    ])
    .unwrap()
}

/// Two tables with schema `k, s, f` over small domains, so both hold
/// duplicates and `b` shares about half its rows with `a`.
pub fn set_pair(rng: &mut ChaCha8Rng, rows: usize) -> (Table, Table) {
    let gen = |rng: &mut ChaCha8Rng| -> Row {
        vec![
            maybe(rng, 0.1, |r| r.random_range(0..6)).map_or(O::Null, O::I),
            maybe(rng, 0.1, |r| TRICKY[r.random_range(0..3)].to_string()).map_or(O::Null, O::S),
            maybe(rng, 0.1, |r| [0.5, -2.0][r.random_range(0..2)]).map_or(O::Null, O::F),
        ]
    };
    let a: Vec<Row> = (0..rows).map(|_| gen(rng)).collect();
    let b: Vec<Row> = (0..rows)
        .map(|_| {
            if !a.is_empty() && rng.random_bool(0.5) {
                a[rng.random_range(0..a.len())].clone()
            } else {
                gen(rng)
            }
        })
        .collect();
    let schema = [
        ("k", DataType::Int64),
        ("s", DataType::Utf8),
        ("f", DataType::Float64),
    ];
    (table_of(&schema, &a), table_of(&schema, &b))
}

/// Builds a table from owned rows.
pub fn table_of(schema: &[(&str, DataType)], rows: &[Row]) -> Table {
    let cols = schema
        .iter()
        .enumerate()
        .map(|(c, &(name, dtype))| {
            let vals = rows.iter().map(|r| match &r[c] {
                O::Null => Value::Null,
                O::I(x) => Value::Int64(*x),
                O::F(x) => Value::Float64(*x),
                O::B(x) => Value::Bool(*x),
                O::S(s) => Value::Utf8(s.as_str()),
            });
            (name, Column::from_values(dtype, vals).unwrap())
        })
        .collect();
    Table::from_columns(cols).unwrap()
}

/// Rows `[r * n / p, (r + 1) * n / p)`.
pub fn slice_for(t: &Table, rank: usize, p: usize) -> Table {
    let n = t.num_rows();
    let idx: Vec<usize> = (rank * n / p..(rank + 1) * n / p).collect();
    t.take_rows(&idx).unwrap()
}

// --------------------------------------------------------------- oracles

fn key_of(r: &Row, cols: &[usize]) -> Vec<O> {
    cols.iter().map(|&c| r[c].clone()).collect()
}

/// Nested-loop-equivalent join through an ordered index. Null keys match.
/// Output: every left column, then right non-key columns; right-only rows
/// carry the right key in the left key positions.
pub fn join(
    l: &[Row],
    r: &[Row],
    lk: &[usize],
    rk: &[usize],
    kind: JoinKind,
    lw: usize,
    rw: usize,
) -> Vec<Row> {
    let r_rest: Vec<usize> = (0..rw).filter(|c| !rk.contains(c)).collect();
    let mut index: BTreeMap<Vec<O>, Vec<usize>> = BTreeMap::new();
    for (j, row) in r.iter().enumerate() {
        index.entry(key_of(row, rk)).or_default().push(j);
    }
    let keep_left = matches!(kind, JoinKind::LeftOuter | JoinKind::FullOuter);
    let keep_right = matches!(kind, JoinKind::RightOuter | JoinKind::FullOuter);
    let mut right_hit = vec![false; r.len()];
    let mut out = Vec::new();
    for lrow in l {
        match index.get(&key_of(lrow, lk)) {
            Some(js) => {
                for &j in js {
                    right_hit[j] = true;
                    let mut row = lrow.clone();
                    row.extend(r_rest.iter().map(|&c| r[j][c].clone()));
                    out.push(row);
                }
            }
            None if keep_left => {
                let mut row = lrow.clone();
                row.extend(r_rest.iter().map(|_| O::Null));
                out.push(row);
            }
            None => {}
        }
    }
    if keep_right {
        for (rrow, _) in r.iter().zip(&right_hit).filter(|(_, hit)| !**hit) {
            let mut row = vec![O::Null; lw];
            for (&lc, &rc) in lk.iter().zip(rk) {
                row[lc] = rrow[rc].clone();
            }
            row.extend(r_rest.iter().map(|&c| rrow[c].clone()));
            out.push(row);
        }
    }
    out
}

/// One aggregate over the non-null values of a column.
pub fn aggregate(values: &[&O], f: AggFn) -> O {
    let vals: Vec<&O> = values.iter().copied().filter(|v| !v.is_null()).collect();
    let is_float = vals.iter().any(|v| matches!(v, O::F(_)));
    match f {
        AggFn::Count => O::I(vals.len() as i64),
        AggFn::Sum if is_float => O::F(vals.iter().map(|v| as_f64(v)).sum()),
        AggFn::Sum => O::I(vals.iter().fold(0i64, |acc, v| match v {
            O::I(x) => acc.wrapping_add(*x),
            _ => acc,
        })),
        AggFn::Min => vals.iter().min().map_or(O::Null, |v| (*v).clone()),
        AggFn::Max => vals.iter().max().map_or(O::Null, |v| (*v).clone()),
        AggFn::Mean if vals.is_empty() => O::Null,
        AggFn::Mean => O::F(vals.iter().map(|v| as_f64(v)).sum::<f64>() / vals.len() as f64),
    }
}

/// `Sum` of an all-null Float64 column is 0.0, not integer zero.
pub fn aggregate_typed(values: &[&O], f: AggFn, dtype: DataType) -> O {
    match (aggregate(values, f), f, dtype) {
        (O::I(0), AggFn::Sum, DataType::Float64) => O::F(0.0),
        (x, _, _) => x,
    }
}

fn as_f64(v: &O) -> f64 {
    match v {
        O::I(x) => *x as f64,
        O::F(x) => *x,
        _ => unreachable!("numeric"),
    }
}

/// Group rows by `keys` (nulls form their own group); output keys then one
/// column per `(column, fn)`.
pub fn groupby(rows: &[Row], keys: &[usize], aggs: &[(usize, AggFn, DataType)]) -> Vec<Row> {
    let mut groups: BTreeMap<Vec<O>, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry(key_of(r, keys)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, members)| {
            let mut out = k;
            for &(c, f, dt) in aggs {
                let vals: Vec<&O> = members.iter().map(|r| &r[c]).collect();
                out.push(aggregate_typed(&vals, f, dt));
            }
            out
        })
        .collect()
}

/// Stable sort by one column, nulls first.
pub fn sort_by(rows: &[Row], key: usize) -> Vec<Row> {
    let mut out = rows.to_vec();
    out.sort_by(|a, b| a[key].cmp(&b[key]));
    out
}

pub fn distinct(rows: &[Row]) -> Vec<Row> {
    rows.iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn union(a: &[Row], b: &[Row]) -> Vec<Row> {
    distinct(&[a, b].concat())
}

pub fn difference(a: &[Row], b: &[Row]) -> Vec<Row> {
    let drop: BTreeSet<&Row> = b.iter().collect();
    distinct(
        &a.iter()
            .filter(|r| !drop.contains(r))
            .cloned()
            .collect::<Vec<_>>(),
    )
}

/// First row for each distinct key, in input order.
pub fn unique_first(rows: &[Row], keys: &[usize]) -> Vec<Row> {
    let mut seen = BTreeSet::new();
    rows.iter()
        .filter(|r| seen.insert(key_of(r, keys)))
        .cloned()
        .collect()
}

/// Sum of the `w` rows ending at each row; null for the first `w - 1` rows
/// and wherever the window holds a null.
pub fn rolling_sum(col: &[O], w: usize) -> Vec<O> {
    (0..col.len())
        .map(|i| {
            if i + 1 < w {
                return O::Null;
            }
            let win = &col[i + 1 - w..=i];
            if win.iter().any(O::is_null) {
                return O::Null;
            }
            match win[0] {
                O::F(_) => O::F(win.iter().map(as_f64).sum()),
                _ => O::I(win.iter().fold(0i64, |a, v| match v {
                    O::I(x) => a.wrapping_add(*x),
                    _ => a,
                })),
            }
        })
        .collect()
}
