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

//! Distributed sort on one key column. Afterwards every rank is locally
//! sorted and all keys on rank `r` are <= all keys on rank `r + 1`.

use std::cmp::Ordering;

use crate::columnar::{concat_tables, DataType, Table};
use crate::comm::WorkerContext;
use crate::error::{Error, Result};
use crate::partition::{
    allreduce_range, assign_by_range, broadcast_bounds, gather_keys, histogram_bounds, local_range,
    pivots_from_samples, regular_samples, split, PartitionAssignment, DEFAULT_HISTOGRAM_BINS,
};
use crate::scalar::{KeyScalar, NumericKey};

use super::{index_of, SortStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortOptions {
    pub strategy: SortStrategy,
    /// Samples per rank for `SampleSort`; defaults to the world size.
    pub sample_size: Option<usize>,
    /// Histogram resolution for `HistogramRange`.
    pub bins: usize,
}

impl Default for SortOptions {
    fn default() -> Self {
        Self {
            strategy: SortStrategy::SampleSort,
            sample_size: None,
            bins: DEFAULT_HISTOGRAM_BINS,
        }
    }
}

pub fn sort(
    ctx: &mut WorkerContext,
    t: &Table,
    key: &str,
    strategy: SortStrategy,
) -> Result<Table> {
    sort_with(
        ctx,
        t,
        key,
        &SortOptions {
            strategy,
            ..SortOptions::default()
        },
    )
}

/// Sorts by `key` ascending, nulls first (collective). Equal keys keep
/// their rank-major input order under `SampleSort`.
pub fn sort_with(
    ctx: &mut WorkerContext,
    t: &Table,
    key: &str,
    opts: &SortOptions,
) -> Result<Table> {
    let ki = index_of(t, key)?;
    let dtype = t.column(ki).dtype();
    match opts.strategy {
        SortStrategy::SampleSort => {
            let s = opts.sample_size.unwrap_or(ctx.world_size());
            match dtype {
                DataType::Int64 => sample_sort::<i64>(ctx, t, ki, s),
                DataType::Float64 => sample_sort::<f64>(ctx, t, ki, s),
                DataType::Bool => sample_sort::<bool>(ctx, t, ki, s),
                DataType::Utf8 => sample_sort::<String>(ctx, t, ki, s),
            }
        }
        SortStrategy::HistogramRange => match dtype {
            DataType::Int64 => histogram_sort::<i64>(ctx, t, ki, opts.bins),
            DataType::Float64 => histogram_sort::<f64>(ctx, t, ki, opts.bins),
            other => Err(Error::invalid(format!(
                "histogram sort needs a numeric key, found {other}"
            ))),
        },
    }
}

fn local_sort(t: &Table, ki: usize) -> Table {
    t.take_rows(&t.sort_indices(&[ki])).expect("permutation")
}

fn sample_sort<K: KeyScalar>(
    ctx: &mut WorkerContext,
    t: &Table,
    ki: usize,
    s: usize,
) -> Result<Table> {
    let p = ctx.world_size();
    if s + 1 < p {
        return Err(Error::invalid(format!(
            "sample size {s} is below the {} pivots needed",
            p - 1
        )));
    }
    let sorted = ctx.stage("local-sort", |_| Ok(local_sort(t, ki)))?;
    let samples = ctx.stage("sample", |_| regular_samples::<K>(sorted.column(ki), s))?;
    let gathered = ctx.stage("gather-samples", |c| gather_keys(c, &samples))?;
    let computed = ctx.stage("calc-pivots", |_| {
        Ok(gathered.map(|g| pivots_from_samples(g, p)))
    })?;
    let bounds = ctx.stage("bcast-pivots", |c| broadcast_bounds(c, computed))?;
    let parts = ctx.stage("split", |_| {
        // no non-null samples anywhere leaves no pivots; keep P parts anyway
        let a = assign_by_range(sorted.column(ki), &bounds)?;
        split(&sorted, &PartitionAssignment::new(a.dest().to_vec(), p)?)
    })?;
    let runs = ctx.stage("shuffle", |c| c.shuffle_runs(parts))?;
    ctx.stage("local-merge", |_| merge_runs(&runs, ki))
}

/// Merges sorted runs; equal keys are taken from the lower run first.
fn merge_runs(runs: &[Table], ki: usize) -> Result<Table> {
    let schema = runs
        .first()
        .map(|r| r.schema().clone())
        .ok_or_else(|| Error::invalid("no runs"))?;
    let all = concat_tables(&schema, runs)?;
    let col = all.column(ki);
    let mut heads = Vec::with_capacity(runs.len());
    let mut start = 0;
    for r in runs {
        heads.push((start, start + r.num_rows()));
        start += r.num_rows();
    }
    let mut order = Vec::with_capacity(all.num_rows());
    loop {
        let mut best: Option<usize> = None;
        for (h, &(pos, end)) in heads.iter().enumerate() {
            if pos == end {
                continue;
            }
            match best {
                Some(b) if col.cmp_rows(pos, col, heads[b].0) != Ordering::Less => {}
                _ => best = Some(h),
            }
        }
        let Some(b) = best else { break };
        order.push(heads[b].0);
        heads[b].0 += 1;
    }
    all.take_rows(&order)
}

fn histogram_sort<K: NumericKey>(
    ctx: &mut WorkerContext,
    t: &Table,
    ki: usize,
    bins: usize,
) -> Result<Table> {
    let col = t.column(ki);
    let local = ctx.stage("sample", |_| local_range::<K>(col))?;
    let (lo, hi) = ctx.stage("allreduce-range", |c| allreduce_range(c, local))?;
    let parts = ctx.stage("binning", |c| {
        let a = if lo > hi {
            // no finite keys anywhere: everything meets on rank 0
            PartitionAssignment::new(vec![0; t.num_rows()], c.world_size())?
        } else {
            let bounds = histogram_bounds::<K>(c, col, lo, hi, bins)?;
            assign_by_range(col, &bounds)?
        };
        split(t, &a)
    })?;
    let shuffled = ctx.stage("shuffle", |c| c.shuffle_parts(parts))?;
    ctx.stage("local-sort", |_| Ok(local_sort(&shuffled, ki)))
}
