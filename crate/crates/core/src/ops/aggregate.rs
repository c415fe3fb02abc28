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

//! Whole-column reductions with a replicated one-row result.

use crate::columnar::{Column, ColumnData, Field, Schema, Table};
use crate::comm::{ReduceOp, WorkerContext};
use crate::error::{Error, Result};

use super::{AggFn, AggSpec};

/// Where one aggregation's partial lives in the reduction vectors.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Int(usize),
    Float(usize),
}

#[derive(Default)]
struct Partials {
    int_sum: Vec<i64>,
    int_min: Vec<i64>,
    int_max: Vec<i64>,
    float_sum: Vec<f64>,
    float_min: Vec<f64>,
    float_max: Vec<f64>,
    counts: Vec<i64>,
}

/// Reduces whole columns across all ranks (collective); every rank gets the
/// same one-row table with columns `{column}_{fn}`.
///
/// `Sum` of no values is zero, `Min`/`Max` of no values is null, and `Mean`
/// of no values is an error. Min/Max ignore NaN and only accept numeric
/// columns.
pub fn column_aggregate(ctx: &mut WorkerContext, t: &Table, aggs: &AggSpec) -> Result<Table> {
    let items = aggs.resolve(t)?;
    for &(c, f) in &items {
        if matches!(f, AggFn::Min | AggFn::Max) && !t.column(c).dtype().is_numeric() {
            return Err(Error::invalid(format!(
                "column aggregate {} needs a numeric column, {} is {}",
                f,
                t.schema().field(c).name,
                t.column(c).dtype()
            )));
        }
    }
    let (mut parts, slots) = ctx.stage("local-op", |_| Ok(local_partials(t, &items)))?;
    ctx.stage("allreduce", |c| {
        let mut ints = parts.int_sum.clone();
        ints.extend(&parts.counts);
        let ints = c.allreduce(&ints, ReduceOp::Sum)?;
        let n = parts.int_sum.len();
        parts.int_sum = ints[..n].to_vec();
        parts.counts = ints[n..].to_vec();
        parts.float_sum = c.allreduce(&parts.float_sum, ReduceOp::Sum)?;
        if !parts.int_min.is_empty() {
            parts.int_min = c.allreduce(&parts.int_min, ReduceOp::Min)?;
        }
        if !parts.int_max.is_empty() {
            parts.int_max = c.allreduce(&parts.int_max, ReduceOp::Max)?;
        }
        if !parts.float_min.is_empty() {
            parts.float_min = c.allreduce(&parts.float_min, ReduceOp::Min)?;
        }
        if !parts.float_max.is_empty() {
            parts.float_max = c.allreduce(&parts.float_max, ReduceOp::Max)?;
        }
        Ok(())
    })?;
    ctx.stage("finalize", |_| finalize(t, &items, &slots, &parts))
}

fn local_partials(t: &Table, items: &[(usize, AggFn)]) -> (Partials, Vec<Slot>) {
    let mut p = Partials::default();
    let mut slots = Vec::with_capacity(items.len());
    for &(c, f) in items {
        let col = t.column(c);
        let valid: Vec<usize> = (0..col.len()).filter(|&i| col.is_valid(i)).collect();
        p.counts.push(valid.len() as i64);
        let slot = match (f, col.data()) {
            (AggFn::Count, _) => Slot::Int(usize::MAX),
            (AggFn::Sum, ColumnData::Int64(v)) => {
                p.int_sum
                    .push(valid.iter().fold(0i64, |a, &i| a.wrapping_add(v[i])));
                Slot::Int(p.int_sum.len() - 1)
            }
            (AggFn::Min, ColumnData::Int64(v)) => {
                p.int_min
                    .push(valid.iter().map(|&i| v[i]).min().unwrap_or(i64::MAX));
                Slot::Int(p.int_min.len() - 1)
            }
            (AggFn::Max, ColumnData::Int64(v)) => {
                p.int_max
                    .push(valid.iter().map(|&i| v[i]).max().unwrap_or(i64::MIN));
                Slot::Int(p.int_max.len() - 1)
            }
            (AggFn::Sum | AggFn::Mean, data) => {
                let s = match data {
                    ColumnData::Int64(v) => valid.iter().map(|&i| v[i] as f64).sum(),
                    ColumnData::Float64(v) => valid.iter().map(|&i| v[i]).sum(),
                    _ => unreachable!("checked numeric"),
                };
                p.float_sum.push(s);
                Slot::Float(p.float_sum.len() - 1)
            }
            (AggFn::Min, ColumnData::Float64(v)) => {
                p.float_min.push(
                    valid
                        .iter()
                        .fold(f64::INFINITY, |a, &i| if v[i] < a { v[i] } else { a }),
                );
                Slot::Float(p.float_min.len() - 1)
            }
            (AggFn::Max, ColumnData::Float64(v)) => {
                p.float_max
                    .push(
                        valid
                            .iter()
                            .fold(f64::NEG_INFINITY, |a, &i| if v[i] > a { v[i] } else { a }),
                    );
                Slot::Float(p.float_max.len() - 1)
            }
            _ => unreachable!("checked numeric"),
        };
        slots.push(slot);
    }
    (p, slots)
}

fn finalize(t: &Table, items: &[(usize, AggFn)], slots: &[Slot], p: &Partials) -> Result<Table> {
    let mut fields = Vec::with_capacity(items.len());
    let mut columns = Vec::with_capacity(items.len());
    for (k, (&(c, f), &slot)) in items.iter().zip(slots).enumerate() {
        let n = p.counts[k];
        let col = match (f, slot) {
            (AggFn::Count, _) => Column::from_i64(vec![n]),
            (AggFn::Sum, Slot::Int(i)) => Column::from_i64(vec![p.int_sum[i]]),
            (AggFn::Sum, Slot::Float(i)) => Column::from_f64(vec![p.float_sum[i]]),
            (AggFn::Min, Slot::Int(i)) => Column::from_opt_i64([(n > 0).then_some(p.int_min[i])]),
            (AggFn::Max, Slot::Int(i)) => Column::from_opt_i64([(n > 0).then_some(p.int_max[i])]),
            (AggFn::Min, Slot::Float(i)) => {
                Column::from_opt_f64([(n > 0).then_some(p.float_min[i])])
            }
            (AggFn::Max, Slot::Float(i)) => {
                Column::from_opt_f64([(n > 0).then_some(p.float_max[i])])
            }
            (AggFn::Mean, Slot::Float(i)) => {
                if n == 0 {
                    return Err(Error::invalid(format!(
                        "mean of column {} has no values",
                        t.schema().field(c).name
                    )));
                }
                Column::from_f64(vec![p.float_sum[i] / n as f64])
            }
            _ => unreachable!("slot matches function"),
        };
        fields.push(Field::new(
            AggSpec::output_name(&t.schema().field(c).name, f),
            col.dtype(),
        ));
        columns.push(col);
    }
    Table::try_new(Schema::new(fields)?, columns)
}
