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

//! Rolling window sums with a halo exchange between neighbouring ranks.

use crate::columnar::{concat_tables, Column, ColumnData, DataType, Field, Schema, Table};
use crate::comm::WorkerContext;
use crate::error::{Error, Result};

use super::index_of;
use super::local::ensure_dtype;

/// Appends `{column}_rolling_sum`: the sum of the `window` global rows
/// ending at each row (rank-major order). Rows with fewer than `window`
/// predecessors-inclusive, or with a null in the window, get null.
///
/// Halo rows travel rank to rank: rank `r` receives the last `window - 1`
/// rows preceding it (fewer near the start) from `r - 1`, and forwards the
/// last `window - 1` of halo + own rows to `r + 1`. This stays correct when
/// a rank holds fewer rows than the window.
pub fn rolling_window(
    ctx: &mut WorkerContext,
    t: &Table,
    column: &str,
    window: usize,
) -> Result<Table> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let ci = index_of(t, column)?;
    ensure_dtype(
        t.column(ci),
        &[DataType::Int64, DataType::Float64],
        "rolling sum",
    )?;
    let values = t.select_columns(&[ci])?;
    let halo = ctx.stage("halo-exchange", |c| exchange_halo(c, &values, window - 1))?;
    ctx.stage("local-op", |_| {
        let ext = concat_tables(values.schema(), &[halo.clone(), values.clone()])?;
        let col = rolling_sum(ext.column(0), window, halo.num_rows());
        let (schema, mut columns) = t.clone().into_parts();
        let mut fields = schema.fields().to_vec();
        fields.push(Field::new(format!("{column}_rolling_sum"), col.dtype()));
        columns.push(col);
        Table::try_new(Schema::new(fields)?, columns)
    })
}

fn exchange_halo(ctx: &mut WorkerContext, values: &Table, need: usize) -> Result<Table> {
    let (rank, p) = (ctx.rank(), ctx.world_size());
    if need == 0 || p == 1 {
        return Ok(Table::empty(values.schema().clone()));
    }
    let halo = if rank > 0 {
        ctx.recv_table(rank - 1)?
    } else {
        Table::empty(values.schema().clone())
    };
    if rank + 1 < p {
        let ext = concat_tables(values.schema(), &[halo.clone(), values.clone()])?;
        let from = ext.num_rows().saturating_sub(need);
        let tail: Vec<usize> = (from..ext.num_rows()).collect();
        ctx.send_table(rank + 1, &ext.take_rows(&tail)?)?;
    }
    Ok(halo)
}

/// Sums over `ext[i - w + 1 ..= i]` for the rows after the first `skip`.
fn rolling_sum(ext: &Column, w: usize, skip: usize) -> Column {
    let n = ext.len();
    let full = |i: usize| i + 1 >= w && (i + 1 - w..=i).all(|j| ext.is_valid(j));
    match ext.data() {
        ColumnData::Int64(v) => Column::from_opt_i64((skip..n).map(|i| {
            full(i).then(|| {
                v[i + 1 - w..=i]
                    .iter()
                    .fold(0i64, |a, &x| a.wrapping_add(x))
            })
        })),
        ColumnData::Float64(v) => {
            Column::from_opt_f64((skip..n).map(|i| full(i).then(|| v[i + 1 - w..=i].iter().sum())))
        }
        _ => unreachable!("checked numeric"),
    }
}
