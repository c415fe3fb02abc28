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

//! Equi-joins: hash- or sort-based after a key shuffle, or by replicating
//! the small side.

use crate::columnar::Table;
use crate::comm::{ReduceOp, WorkerContext};
use crate::error::Result;
use crate::partition::{hash_partition, split};

use super::local::{assemble_join, join_schema, match_rows};
use super::{indices_of, JoinAlgorithm, JoinKind, LocalJoinMethod};

/// Joins two tables on one machine. Null keys match each other.
pub fn local_join<S: AsRef<str>>(
    left: &Table,
    right: &Table,
    left_on: &[S],
    right_on: &[S],
    kind: JoinKind,
    method: LocalJoinMethod,
) -> Result<Table> {
    let (lk, rk) = (indices_of(left, left_on)?, indices_of(right, right_on)?);
    join_schema(left, right, &lk, &rk)?;
    let m = match_rows(left, right, &lk, &rk, method);
    assemble_join(left, right, &lk, &rk, kind, &m, None)
}

/// Distributed join (collective). Output columns are every left column
/// followed by the right non-key columns; outer joins coalesce the keys.
pub fn join<S: AsRef<str>>(
    ctx: &mut WorkerContext,
    left: &Table,
    right: &Table,
    left_on: &[S],
    right_on: &[S],
    kind: JoinKind,
    algorithm: JoinAlgorithm,
) -> Result<Table> {
    let method = match algorithm {
        JoinAlgorithm::Broadcast => {
            return broadcast_join(ctx, left, right, left_on, right_on, kind)
        }
        JoinAlgorithm::HashShuffle => LocalJoinMethod::Hash,
        JoinAlgorithm::SortShuffle => LocalJoinMethod::SortMerge,
    };
    let (lk, rk) = (indices_of(left, left_on)?, indices_of(right, right_on)?);
    join_schema(left, right, &lk, &rk)?;
    let p = ctx.world_size();
    let (la, ra) = ctx.stage("partition", |_| {
        Ok((
            hash_partition(left, &lk, p)?,
            hash_partition(right, &rk, p)?,
        ))
    })?;
    let (lp, rp) = ctx.stage("split", |_| Ok((split(left, &la)?, split(right, &ra)?)))?;
    let l = ctx.stage("shuffle-left", |c| c.shuffle_parts(lp))?;
    let r = ctx.stage("shuffle-right", |c| c.shuffle_parts(rp))?;
    ctx.stage("local-join", |_| {
        let m = match_rows(&l, &r, &lk, &rk, method);
        assemble_join(&l, &r, &lk, &rk, kind, &m, None)
    })
}

/// Join that replicates `small` on every rank and leaves `large` in place.
/// Right-side leftovers of outer joins are emitted once, by rank 0, after
/// an allreduce of the per-row match flags.
pub fn broadcast_join<S: AsRef<str>>(
    ctx: &mut WorkerContext,
    large: &Table,
    small: &Table,
    large_on: &[S],
    small_on: &[S],
    kind: JoinKind,
) -> Result<Table> {
    let (lk, rk) = (indices_of(large, large_on)?, indices_of(small, small_on)?);
    join_schema(large, small, &lk, &rk)?;
    let all_small = ctx.stage("broadcast", |c| c.allgather_table(small))?;
    ctx.stage("local-join", |c| {
        let m = match_rows(large, &all_small, &lk, &rk, LocalJoinMethod::Hash);
        if !matches!(kind, JoinKind::RightOuter | JoinKind::FullOuter) {
            return assemble_join(large, &all_small, &lk, &rk, kind, &m, None);
        }
        let flags: Vec<u64> = m.right_matched.iter().map(|&b| b as u64).collect();
        let global = c.allreduce(&flags, ReduceOp::Max)?;
        let suppress = vec![true; global.len()];
        let matched: Vec<bool> = global.iter().map(|&f| f > 0).collect();
        let view = if c.rank() == 0 { &matched } else { &suppress };
        assemble_join(large, &all_small, &lk, &rk, kind, &m, Some(view))
    })
}
