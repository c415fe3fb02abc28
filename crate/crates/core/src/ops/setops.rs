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

//! Set union and difference over whole rows.

use crate::columnar::{concat_tables, Table};
use crate::comm::WorkerContext;
use crate::error::{Error, Result};
use crate::partition::{hash_partition, split};

use super::local::{check_same_fields, distinct, set_difference};

/// Distinct rows present in `a` or `b` (collective).
pub fn union_distinct(ctx: &mut WorkerContext, a: &Table, b: &Table) -> Result<Table> {
    let (l, r) = shuffle_pair(ctx, a, b)?;
    ctx.stage("local-union", |_| {
        let all: Vec<usize> = (0..l.num_columns()).collect();
        Ok(distinct(
            &concat_tables(l.schema(), &[l.clone(), r.clone()])?,
            &all,
        ))
    })
}

/// Distinct rows of `a` that do not occur in `b` (collective).
pub fn difference(ctx: &mut WorkerContext, a: &Table, b: &Table) -> Result<Table> {
    let (l, r) = shuffle_pair(ctx, a, b)?;
    ctx.stage("local-difference", |_| Ok(set_difference(&l, &r)))
}

/// Co-locates equal rows of both inputs by a full-row hash.
fn shuffle_pair(ctx: &mut WorkerContext, a: &Table, b: &Table) -> Result<(Table, Table)> {
    check_same_fields(a, b)?;
    if a.num_columns() == 0 {
        return Err(Error::invalid("set operation over a table with no columns"));
    }
    let all: Vec<usize> = (0..a.num_columns()).collect();
    let p = ctx.world_size();
    let (pa, pb) = ctx.stage("partition", |_| {
        Ok((hash_partition(a, &all, p)?, hash_partition(b, &all, p)?))
    })?;
    let (sa, sb) = ctx.stage("split", |_| Ok((split(a, &pa)?, split(b, &pb)?)))?;
    let l = ctx.stage("shuffle-left", |c| c.shuffle_parts(sa))?;
    let r = ctx.stage("shuffle-right", |c| c.shuffle_parts(sb))?;
    Ok((l, r))
}
