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

//! Auxiliary sub-operators that decide where rows go before a shuffle:
//! hash and range partitioning, regular-sampling pivot selection, split and
//! rebalance.

use std::cmp::Ordering;

use crate::columnar::{Column, Table};
use crate::comm::{ReduceOp, WorkerContext};
use crate::error::{Error, Result};
use crate::scalar::{hash64, KeyScalar, NumericKey};

pub const DEFAULT_HISTOGRAM_BINS: usize = 256;

/// Destination rank of every row of a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    dest: Vec<usize>,
    parts: usize,
}

impl PartitionAssignment {
    pub fn new(dest: Vec<usize>, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::invalid("partition count must be at least 1"));
        }
        if let Some(d) = dest.iter().find(|&&d| d >= parts) {
            return Err(Error::invalid(format!(
                "destination {d} out of range for {parts} parts"
            )));
        }
        Ok(Self { dest, parts })
    }

    pub fn dest(&self) -> &[usize] {
        &self.dest
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn len(&self) -> usize {
        self.dest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dest.is_empty()
    }
}

/// `hash64(encoded key tuple) mod parts`. Equal key tuples, nulls included,
/// always map to the same rank on every platform.
pub fn hash_partition(t: &Table, key_cols: &[usize], parts: usize) -> Result<PartitionAssignment> {
    if key_cols.is_empty() {
        return Err(Error::invalid(
            "hash partition needs at least one key column",
        ));
    }
    if let Some(&c) = key_cols.iter().find(|&&c| c >= t.num_columns()) {
        return Err(Error::invalid(format!("key column {c} out of range")));
    }
    if parts == 0 {
        return Err(Error::invalid("partition count must be at least 1"));
    }
    let mut buf = Vec::with_capacity(16 * key_cols.len());
    let dest = (0..t.num_rows())
        .map(|i| {
            buf.clear();
            t.encode_key(i, key_cols, &mut buf);
            (hash64(&buf) % parts as u64) as usize
        })
        .collect();
    Ok(PartitionAssignment { dest, parts })
}

/// Splits `t` into `a.parts()` tables; part `r` holds the rows assigned to
/// `r` in their original relative order.
pub fn split(t: &Table, a: &PartitionAssignment) -> Result<Vec<Table>> {
    if a.len() != t.num_rows() {
        return Err(Error::invalid(format!(
            "assignment covers {} rows, table has {}",
            a.len(),
            t.num_rows()
        )));
    }
    if a.parts == 1 {
        return Ok(vec![t.clone()]);
    }
    let mut idx: Vec<Vec<usize>> = (0..a.parts).map(|_| Vec::new()).collect();
    for (row, &d) in a.dest.iter().enumerate() {
        idx[d].push(row);
    }
    Ok(idx.iter().map(|ix| t.take_unchecked(ix)).collect())
}

pub(crate) fn split_by_dest(t: &Table, dest: &[usize], parts: usize) -> Result<Vec<Table>> {
    let a = PartitionAssignment::new(dest.to_vec(), parts)?;
    split(t, &a)
}

/// Ascending pivots splitting a key domain into `pivots.len() + 1` ranges,
/// with the observed global extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeBounds<K> {
    pub pivots: Vec<K>,
    pub min: Option<K>,
    pub max: Option<K>,
}

impl<K: KeyScalar> RangeBounds<K> {
    /// Rank of a key: the smallest `r` with `key <= pivots[r]`, the last rank
    /// for keys above every pivot. Nulls go to rank 0.
    pub fn rank_of(&self, key: Option<&K>) -> usize {
        match key {
            None => 0,
            Some(k) => self
                .pivots
                .partition_point(|p| p.key_cmp(k) == Ordering::Less),
        }
    }

    fn check(&self) -> Result<()> {
        if self
            .pivots
            .windows(2)
            .any(|w| w[0].key_cmp(&w[1]) == Ordering::Greater)
        {
            return Err(Error::invalid("range pivots must be non-decreasing"));
        }
        Ok(())
    }
}

/// Maps each row to its range; monotone non-decreasing in the key.
pub fn assign_by_range<K: KeyScalar>(
    key: &Column,
    bounds: &RangeBounds<K>,
) -> Result<PartitionAssignment> {
    bounds.check()?;
    let parts = bounds.pivots.len() + 1;
    let dest = K::column_values(key)?
        .iter()
        .map(|k| bounds.rank_of(k.as_ref()))
        .collect();
    Ok(PartitionAssignment { dest, parts })
}

/// Histogram-based range bounds for a numeric key (collective).
///
/// One allreduce finds the global range, a second sums per-bin counts; the
/// pivot for rank boundary `r` is placed where the cumulative count reaches
/// `r * N / P`, interpolating linearly inside the bin. Every rank returns
/// the same bounds.
pub fn range_partition_bounds<K: NumericKey>(
    ctx: &mut WorkerContext,
    key: &Column,
    bins: usize,
) -> Result<RangeBounds<K>> {
    let (lo, hi) = global_range::<K>(ctx, key)?;
    histogram_bounds(ctx, key, lo, hi, bins)
}

/// Global (min, max) of the finite non-null keys, via one allreduce.
pub(crate) fn global_range<K: NumericKey>(
    ctx: &mut WorkerContext,
    key: &Column,
) -> Result<(f64, f64)> {
    let local = local_range::<K>(key)?;
    let (lo, hi) = allreduce_range(ctx, local)?;
    if lo > hi {
        return Err(Error::invalid(
            "range partition key has no non-null finite values",
        ));
    }
    Ok((lo, hi))
}

/// Local (min, max) of the finite non-null keys; `(inf, -inf)` when none.
pub(crate) fn local_range<K: NumericKey>(key: &Column) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in K::column_values(key)?.into_iter().flatten() {
        let x = v.to_f64();
        if x.is_finite() {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    Ok((lo, hi))
}

pub(crate) fn allreduce_range(ctx: &mut WorkerContext, (lo, hi): (f64, f64)) -> Result<(f64, f64)> {
    // min of (lo, -hi) gives both extremes in one reduction
    let r = ctx.allreduce(&[lo, -hi], ReduceOp::Min)?;
    Ok((r[0], -r[1]))
}

pub(crate) fn histogram_bounds<K: NumericKey>(
    ctx: &mut WorkerContext,
    key: &Column,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<RangeBounds<K>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let p = ctx.world_size();
    let width = (hi - lo) / bins as f64;
    let bin_of = |x: f64| -> usize {
        if width <= 0.0 {
            0
        } else {
            (((x - lo) / width) as usize).min(bins - 1)
        }
    };
    let mut counts = vec![0u64; bins];
    for v in K::column_values(key)?.into_iter().flatten() {
        let x = v.to_f64();
        if x.is_finite() {
            counts[bin_of(x)] += 1;
        }
    }
    let counts = ctx.allreduce(&counts, ReduceOp::Sum)?;
    let total: u64 = counts.iter().sum();
    let mut pivots: Vec<K> = Vec::with_capacity(p.saturating_sub(1));
    let mut bin = 0usize;
    let mut before = 0u64;
    for r in 1..p {
        let target = r as f64 * total as f64 / p as f64;
        while bin + 1 < bins && (before + counts[bin]) as f64 <= target {
            before += counts[bin];
            bin += 1;
        }
        let frac = if counts[bin] == 0 {
            0.0
        } else {
            ((target - before as f64) / counts[bin] as f64).clamp(0.0, 1.0)
        };
        let edge = (lo + (bin as f64 + frac) * width).clamp(lo, hi);
        let mut pivot = K::from_edge(edge);
        if let Some(prev) = pivots.last() {
            if pivot.key_cmp(prev) == Ordering::Less {
                pivot = prev.clone();
            }
        }
        pivots.push(pivot);
    }
    Ok(RangeBounds {
        pivots,
        min: Some(K::from_edge(lo)),
        max: Some(K::from_edge(hi)),
    })
}

/// Every `ceil(n / sample_size)`-th non-null key of a locally sorted column,
/// starting with the first.
pub fn regular_samples<K: KeyScalar>(sorted_key: &Column, sample_size: usize) -> Result<Vec<K>> {
    let values: Vec<K> = K::column_values(sorted_key)?
        .into_iter()
        .flatten()
        .collect();
    if sample_size == 0 || values.is_empty() {
        return Ok(Vec::new());
    }
    let step = values.len().div_ceil(sample_size);
    Ok(values.into_iter().step_by(step).collect())
}

/// Sorts the gathered samples and picks `parts - 1` pivots at regular
/// positions `r * m / parts`.
pub fn pivots_from_samples<K: KeyScalar>(mut samples: Vec<K>, parts: usize) -> RangeBounds<K> {
    samples.sort_by(|a, b| a.key_cmp(b));
    let m = samples.len();
    let pivots = if m == 0 {
        Vec::new()
    } else {
        (1..parts)
            .map(|r| samples[(r * m / parts).min(m - 1)].clone())
            .collect()
    };
    RangeBounds {
        pivots,
        min: samples.first().cloned(),
        max: samples.last().cloned(),
    }
}

/// Regular-sampling pivot selection (collective): local samples are gathered
/// at rank 0, which computes the pivots and broadcasts them.
pub fn sample_pivots<K: KeyScalar>(
    ctx: &mut WorkerContext,
    sorted_key: &Column,
    sample_size: usize,
) -> Result<RangeBounds<K>> {
    let p = ctx.world_size();
    if sample_size + 1 < p {
        return Err(Error::invalid(format!(
            "sample size {sample_size} is below the {} pivots needed",
            p - 1
        )));
    }
    if p == 1 {
        return Ok(RangeBounds {
            pivots: Vec::new(),
            min: None,
            max: None,
        });
    }
    let samples = regular_samples::<K>(sorted_key, sample_size)?;
    let gathered = gather_keys(ctx, &samples)?;
    let computed = gathered.map(|s| pivots_from_samples(s, p));
    broadcast_bounds(ctx, computed)
}

pub(crate) fn gather_keys<K: KeyScalar>(
    ctx: &mut WorkerContext,
    keys: &[K],
) -> Result<Option<Vec<K>>> {
    let t = Table::from_columns(vec![("key", K::to_column(keys))])?;
    let g = ctx.gather_table(&t, 0)?;
    g.map(|g| {
        Ok(K::column_values(g.column(0))?
            .into_iter()
            .flatten()
            .collect())
    })
    .transpose()
}

/// Broadcasts bounds computed on rank 0 as a one-column table whose last two
/// rows are the extremes (or absent when unknown).
pub(crate) fn broadcast_bounds<K: KeyScalar>(
    ctx: &mut WorkerContext,
    bounds: Option<RangeBounds<K>>,
) -> Result<RangeBounds<K>> {
    let table = match &bounds {
        Some(b) => {
            let mut vals: Vec<Option<&K>> = b.pivots.iter().map(Some).collect();
            vals.push(b.min.as_ref());
            vals.push(b.max.as_ref());
            let col = Column::from_values(
                K::DTYPE,
                vals.iter()
                    .map(|v| v.map_or(crate::columnar::Value::Null, |k| k.to_value())),
            )?;
            Some(Table::from_columns(vec![("pivot", col)])?)
        }
        None => None,
    };
    let t = ctx.broadcast_table(table.as_ref(), 0)?;
    let mut vals = K::column_values(t.column(0))?;
    let max = vals.pop().flatten();
    let min = vals.pop().flatten();
    let pivots = vals
        .into_iter()
        .map(|v| v.ok_or_else(|| Error::decode("null pivot")))
        .collect::<Result<_>>()?;
    Ok(RangeBounds { pivots, min, max })
}

/// Redistributes rows so every rank holds `floor(N/P)` or `ceil(N/P)` of
/// them, keeping the global rank-major row order.
pub fn rebalance(ctx: &mut WorkerContext, t: &Table) -> Result<Table> {
    let p = ctx.world_size();
    let me = ctx.rank();
    let mut mine = vec![0u64; p];
    mine[me] = t.num_rows() as u64;
    let counts = ctx.allreduce(&mine, ReduceOp::Sum)?;
    let dest = rebalance_dest(&counts, me);
    ctx.shuffle_table(t, &dest)
}

pub(crate) fn rebalance_dest(counts: &[u64], rank: usize) -> Vec<usize> {
    let p = counts.len() as u64;
    let total: u64 = counts.iter().sum();
    let (base, extra) = (total / p, total % p);
    // first `extra` ranks hold base + 1 rows
    let owner = |g: u64| -> usize {
        let big = extra * (base + 1);
        if g < big {
            (g / (base + 1)) as usize
        } else {
            (extra + (g - big) / base.max(1)) as usize
        }
    };
    let start: u64 = counts[..rank].iter().sum();
    (0..counts[rank]).map(|i| owner(start + i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::columnar::DataType;
    use crate::comm::{run_cluster, TransportKind};

    fn keys(v: Vec<i64>) -> Table {
        Table::from_columns(vec![("k", Column::from_i64(v))]).unwrap()
    }

    #[test]
    fn hash_partition_single_part_is_zero() {
        let t = keys(vec![5, 9, -1]);
        assert_eq!(hash_partition(&t, &[0], 1).unwrap().dest(), &[0, 0, 0]);
    }

    #[test]
    fn hash_partition_identical_keys_single_destination() {
        let t = keys(vec![42; 50]);
        let a = hash_partition(&t, &[0], 7).unwrap();
        assert!(a.dest().iter().all(|&d| d == a.dest()[0]));
    }

    #[test]
    fn hash_partition_requires_keys() {
        assert!(hash_partition(&keys(vec![1]), &[], 2).is_err());
    }

    #[test]
    fn hash_partition_is_pinned() {
        // key 1 encodes to [1, 1, 0 x7]; its hash is pinned in scalar tests
        let a = hash_partition(&keys(vec![1]), &[0], 1 << 20).unwrap();
        assert_eq!(a.dest()[0] as u64, 0xfead_53f7_dfca_be65 % (1 << 20));
    }

    #[test]
    fn split_alternating() {
        let t = keys(vec![1, 2, 3, 4]);
        let a = PartitionAssignment::new(vec![0, 1, 0, 1], 2).unwrap();
        let parts = split(&t, &a).unwrap();
        assert_eq!(parts[0], keys(vec![1, 3]));
        assert_eq!(parts[1], keys(vec![2, 4]));
        let one = split(&t, &PartitionAssignment::new(vec![0; 4], 1).unwrap()).unwrap();
        assert_eq!(one, vec![t]);
    }

    #[test]
    fn assignment_rejects_out_of_range() {
        assert!(PartitionAssignment::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn range_assignment_tie_rule() {
        let b = RangeBounds {
            pivots: vec![10i64, 20],
            min: Some(0),
            max: Some(30),
        };
        let col = Column::from_opt_i64([Some(-5), Some(10), Some(11), Some(20), Some(21), None]);
        assert_eq!(
            assign_by_range(&col, &b).unwrap().dest(),
            &[0, 0, 1, 1, 2, 0]
        );
    }

    #[test]
    fn uniform_histogram_pivots_are_exact_quantiles() {
        let out = run_cluster(TransportKind::Local, 4, |ctx| {
            let r = ctx.rank() as i64;
            let col = Column::from_i64((r * 25..(r + 1) * 25).collect());
            range_partition_bounds::<i64>(ctx, &col, DEFAULT_HISTOGRAM_BINS).unwrap()
        })
        .unwrap();
        for b in &out {
            assert_eq!(b.pivots, vec![25, 50, 75]);
            assert_eq!((b.min, b.max), (Some(0), Some(99)));
        }
    }

    #[test]
    fn constant_column_sends_everything_to_rank_zero() {
        let out = run_cluster(TransportKind::Local, 3, |ctx| {
            let col = Column::from_i64(vec![7; 10]);
            let b = range_partition_bounds::<i64>(ctx, &col, 16).unwrap();
            assign_by_range(&col, &b).unwrap()
        })
        .unwrap();
        assert!(out.iter().all(|a| a.dest().iter().all(|&d| d == 0)));
    }

    #[test]
    fn all_null_key_is_an_error_everywhere() {
        let out = run_cluster(TransportKind::Local, 2, |ctx| {
            let col = Column::from_opt_f64([None, None]);
            range_partition_bounds::<f64>(ctx, &col, 8).is_err()
        })
        .unwrap();
        assert_eq!(out, vec![true, true]);
    }

    #[test]
    fn sample_pivots_single_rank_is_empty() {
        let out = run_cluster(TransportKind::Local, 1, |ctx| {
            sample_pivots::<i64>(ctx, &Column::from_i64(vec![1, 2]), 1).unwrap()
        })
        .unwrap();
        assert!(out[0].pivots.is_empty());
    }

    #[test]
    fn sample_pivots_two_ranks_upper_median() {
        let out = run_cluster(TransportKind::Local, 2, |ctx| {
            let base = ctx.rank() as i64 * 4;
            let col = Column::from_i64((base + 1..=base + 4).collect());
            sample_pivots::<i64>(ctx, &col, 2).unwrap()
        })
        .unwrap();
        // gathered samples [1, 3, 5, 7]; upper median is 5
        assert_eq!(out[0].pivots, vec![5]);
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn sample_size_too_small() {
        let out = run_cluster(TransportKind::Local, 4, |ctx| {
            sample_pivots::<i64>(ctx, &Column::from_i64(vec![1]), 2).is_err()
        })
        .unwrap();
        assert!(out.into_iter().all(|e| e));
    }

    #[test]
    fn all_equal_keys_give_equal_pivots() {
        let out = run_cluster(TransportKind::Local, 3, |ctx| {
            sample_pivots::<String>(ctx, &Column::from_strs(["x"; 6]), 3).unwrap()
        })
        .unwrap();
        assert_eq!(out[0].pivots, vec!["x".to_string(), "x".to_string()]);
    }

    #[test]
    fn rebalance_four_zero() {
        let out = run_cluster(TransportKind::Local, 2, |ctx| {
            let t = if ctx.rank() == 0 {
                keys(vec![1, 2, 3, 4])
            } else {
                Table::empty(keys(vec![]).schema().clone())
            };
            rebalance(ctx, &t).unwrap()
        })
        .unwrap();
        assert_eq!(out[0], keys(vec![1, 2]));
        assert_eq!(out[1], keys(vec![3, 4]));
    }

    #[test]
    fn rebalance_balanced_sends_nothing() {
        let out = run_cluster(TransportKind::Local, 3, |ctx| {
            let t = keys(vec![ctx.rank() as i64; 5]);
            ctx.reset_counters();
            let r = rebalance(ctx, &t).unwrap();
            (
                r.num_rows(),
                ctx.bytes_sent().bytes(crate::comm::CollectiveKind::Shuffle),
            )
        })
        .unwrap();
        assert!(out.iter().all(|&(n, b)| n == 5 && b == 0));
    }

    #[test]
    fn rebalance_dest_sizes() {
        let counts = [7u64, 0, 1, 2];
        let mut sizes = [0usize; 4];
        for r in 0..4 {
            for d in rebalance_dest(&counts, r) {
                sizes[d] += 1;
            }
        }
        assert_eq!(sizes, [3, 3, 2, 2]);
        let _ = DataType::Int64;
    }
}
