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

//! Keyed aggregation and distinct, in shuffle-compute and
//! combine-shuffle-reduce form.

use crate::columnar::{Field, Schema, Table};
use crate::comm::WorkerContext;
use crate::error::{Error, Result};
use crate::partition::{hash_partition, split};

use super::local::{aggregate_groups, distinct, finalize_mean, Kernel};
use super::{indices_of, AggFn, AggSpec, GroupByStrategy};

/// One output row per distinct key tuple (collective). Output columns are
/// the keys followed by `{column}_{fn}` for each aggregation.
pub fn groupby<S: AsRef<str>>(
    ctx: &mut WorkerContext,
    t: &Table,
    keys: &[S],
    aggs: &AggSpec,
    strategy: GroupByStrategy,
) -> Result<Table> {
    if keys.is_empty() {
        return Err(Error::invalid("groupby needs at least one key"));
    }
    let key_idx = indices_of(t, keys)?;
    let items = aggs.resolve(t)?;
    let raw = raw_plan(t, &items);
    let p = ctx.world_size();
    match strategy {
        GroupByStrategy::ShuffleCompute => {
            let a = ctx.stage("partition", |_| hash_partition(t, &key_idx, p))?;
            let parts = ctx.stage("split", |_| split(t, &a))?;
            let shuffled = ctx.stage("shuffle", |c| c.shuffle_parts(parts))?;
            ctx.stage("local-groupby", |_| {
                let partial = aggregate_groups(&shuffled, &key_idx, &raw)?;
                finalize(&partial, key_idx.len(), &items, t)
            })
        }
        GroupByStrategy::CombineShuffleReduce => {
            let partial = ctx.stage("local-combine", |_| aggregate_groups(t, &key_idx, &raw))?;
            let k: Vec<usize> = (0..key_idx.len()).collect();
            let a = ctx.stage("partition", |_| hash_partition(&partial, &k, p))?;
            let parts = ctx.stage("split", |_| split(&partial, &a))?;
            let shuffled = ctx.stage("shuffle", |c| c.shuffle_parts(parts))?;
            ctx.stage("local-reduce", |_| {
                let merge: Vec<(usize, Kernel, String)> = raw
                    .iter()
                    .enumerate()
                    .map(|(j, (_, kernel, name))| {
                        (k.len() + j, merge_kernel(*kernel), name.clone())
                    })
                    .collect();
                let merged = aggregate_groups(&shuffled, &k, &merge)?;
                finalize(&merged, k.len(), &items, t)
            })
        }
    }
}

/// Kernels over raw rows; `Mean` becomes a float sum and a count.
fn raw_plan(t: &Table, items: &[(usize, AggFn)]) -> Vec<(usize, Kernel, String)> {
    let mut plan = Vec::new();
    for &(c, f) in items {
        let name = AggSpec::output_name(&t.schema().field(c).name, f);
        match f {
            AggFn::Sum => plan.push((c, Kernel::Sum, name)),
            AggFn::Min => plan.push((c, Kernel::Min, name)),
            AggFn::Max => plan.push((c, Kernel::Max, name)),
            AggFn::Count => plan.push((c, Kernel::Count, name)),
            AggFn::Mean => {
                plan.push((c, Kernel::SumF64, format!("{name}.sum")));
                plan.push((c, Kernel::Count, format!("{name}.count")));
            }
        }
    }
    plan
}

/// Kernel that merges partial results produced by `k`.
fn merge_kernel(k: Kernel) -> Kernel {
    match k {
        Kernel::Count => Kernel::Sum,
        other => other,
    }
}

/// Turns keys + partial columns (in `raw_plan` order) into the final table.
fn finalize(
    partial: &Table,
    nkeys: usize,
    items: &[(usize, AggFn)],
    input: &Table,
) -> Result<Table> {
    let (schema, cols) = partial.clone().into_parts();
    let mut fields: Vec<Field> = schema.fields()[..nkeys].to_vec();
    let mut columns = cols[..nkeys].to_vec();
    let mut j = nkeys;
    for &(c, f) in items {
        let name = AggSpec::output_name(&input.schema().field(c).name, f);
        let col = if f == AggFn::Mean {
            j += 2;
            finalize_mean(&cols[j - 2], &cols[j - 1])
        } else {
            j += 1;
            cols[j - 1].clone()
        };
        fields.push(Field::new(name, col.dtype()));
        columns.push(col);
    }
    Table::try_new(Schema::new(fields)?, columns)
}

/// First row (in rank-major order) of each distinct key tuple
/// (collective). With no keys, whole rows are compared.
pub fn unique<S: AsRef<str>>(ctx: &mut WorkerContext, t: &Table, keys: &[S]) -> Result<Table> {
    let cols = if keys.is_empty() {
        (0..t.num_columns()).collect()
    } else {
        indices_of(t, keys)?
    };
    if cols.is_empty() {
        return Err(Error::invalid("unique over a table with no columns"));
    }
    let p = ctx.world_size();
    let local = ctx.stage("local-combine", |_| Ok(distinct(t, &cols)))?;
    let a = ctx.stage("partition", |_| hash_partition(&local, &cols, p))?;
    let parts = ctx.stage("split", |_| split(&local, &a))?;
    let shuffled = ctx.stage("shuffle", |c| c.shuffle_parts(parts))?;
    ctx.stage("local-unique", |_| Ok(distinct(&shuffled, &cols)))
}
