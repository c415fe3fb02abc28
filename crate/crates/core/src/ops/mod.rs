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

//! Distributed dataframe operators. Each one is a local kernel wrapped in
//! auxiliary sub-operators (partition, split, pivots) and communication.
//!
//! Operators that take a [`WorkerContext`](crate::comm::WorkerContext) are
//! collective. When stage recording is on, every operator reports its stages
//! under fixed names (see [`stage_names`]).

mod aggregate;
mod csv;
mod elementwise;
mod groupby;
mod join;
mod local;
mod setops;
mod sort;
mod window;

pub use aggregate::column_aggregate;
pub use csv::{parse_csv, read_csv_partitioned, write_csv, write_csv_partitioned};
pub use elementwise::{filter, map_column, project, select};
pub use groupby::{groupby, unique};
pub use join::{broadcast_join, join, local_join};
pub use setops::{difference, union_distinct};
pub use sort::{sort, sort_with, SortOptions};
pub use window::rolling_window;

use std::fmt;
use std::str::FromStr;

use crate::columnar::{Column, ColumnBuilder, DataType, Table};
use crate::comm::ReduceOp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinKind {
    Inner,
    LeftOuter,
    RightOuter,
    FullOuter,
}

impl JoinKind {
    pub const ALL: [JoinKind; 4] = [
        JoinKind::Inner,
        JoinKind::LeftOuter,
        JoinKind::RightOuter,
        JoinKind::FullOuter,
    ];

    fn keeps_left(self) -> bool {
        matches!(self, JoinKind::LeftOuter | JoinKind::FullOuter)
    }

    fn keeps_right(self) -> bool {
        matches!(self, JoinKind::RightOuter | JoinKind::FullOuter)
    }
}

/// How a distributed join moves data. `Broadcast` replicates the right
/// input, which should be the small side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinAlgorithm {
    HashShuffle,
    SortShuffle,
    Broadcast,
}

impl JoinAlgorithm {
    pub const ALL: [JoinAlgorithm; 3] = [
        JoinAlgorithm::HashShuffle,
        JoinAlgorithm::SortShuffle,
        JoinAlgorithm::Broadcast,
    ];
}

/// Local join kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalJoinMethod {
    /// Builds a hash table on the smaller input and probes with the other.
    Hash,
    SortMerge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GroupByStrategy {
    /// Shuffle raw rows, aggregate once.
    ShuffleCompute,
    /// Pre-aggregate locally, shuffle partial results, merge them.
    #[default]
    CombineShuffleReduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SortStrategy {
    /// Regular sampling with pivots chosen at rank 0; any key type.
    #[default]
    SampleSort,
    /// Global histogram of a numeric key.
    HistogramRange,
}

/// Aggregation function. Nulls are skipped; `Count` counts non-null values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFn {
    Sum,
    Min,
    Max,
    Count,
    /// Carried as a sum and a count, divided after the global reduction.
    Mean,
}

impl AggFn {
    pub const ALL: [AggFn; 5] = [
        AggFn::Sum,
        AggFn::Min,
        AggFn::Max,
        AggFn::Count,
        AggFn::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Sum => "sum",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Count => "count",
            AggFn::Mean => "mean",
        }
    }

    /// Output dtype for an input column of `dtype`.
    pub fn output_dtype(self, dtype: DataType) -> Result<DataType> {
        match self {
            AggFn::Count => Ok(DataType::Int64),
            AggFn::Min | AggFn::Max => Ok(dtype),
            AggFn::Sum if dtype.is_numeric() => Ok(dtype),
            AggFn::Mean if dtype.is_numeric() => Ok(DataType::Float64),
            _ => Err(Error::invalid(format!(
                "cannot take {} of a {dtype} column",
                self.name()
            ))),
        }
    }
}

impl From<ReduceOp> for AggFn {
    fn from(op: ReduceOp) -> Self {
        match op {
            ReduceOp::Sum => AggFn::Sum,
            ReduceOp::Min => AggFn::Min,
            ReduceOp::Max => AggFn::Max,
            ReduceOp::Count => AggFn::Count,
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Columns to aggregate. Output column `i` is named `{column}_{fn}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AggSpec {
    pub items: Vec<(String, AggFn)>,
}

impl AggSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: impl Into<String>, f: impl Into<AggFn>) -> Self {
        self.items.push((column.into(), f.into()));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub(crate) fn output_name(column: &str, f: AggFn) -> String {
        format!("{column}_{}", f.name())
    }

    /// Resolves column indices and checks dtypes against `t`.
    pub(crate) fn resolve(&self, t: &Table) -> Result<Vec<(usize, AggFn)>> {
        self.items
            .iter()
            .map(|(name, f)| {
                let i = index_of(t, name)?;
                f.output_dtype(t.column(i).dtype())?;
                Ok((i, *f))
            })
            .collect()
    }
}

macro_rules! impl_from_str {
    ($t:ty, $($($s:literal)|+ => $v:expr),+ $(,)?) => {
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($($s)|+ => Ok($v),)+
                    _ => Err(Error::invalid(format!(concat!("unknown ", stringify!($t), " '{}'"), s))),
                }
            }
        }
    };
}

impl_from_str!(JoinKind, "inner" => JoinKind::Inner, "left" => JoinKind::LeftOuter, "right" => JoinKind::RightOuter, "full" | "outer" => JoinKind::FullOuter);
impl_from_str!(JoinAlgorithm, "hash" => JoinAlgorithm::HashShuffle, "sort" => JoinAlgorithm::SortShuffle, "broadcast" => JoinAlgorithm::Broadcast);
impl_from_str!(GroupByStrategy, "shuffle-compute" | "shuffle" => GroupByStrategy::ShuffleCompute, "combine-shuffle-reduce" | "combine" => GroupByStrategy::CombineShuffleReduce);
impl_from_str!(SortStrategy, "sample" | "samplesort" => SortStrategy::SampleSort, "histogram" | "range" => SortStrategy::HistogramRange);
impl_from_str!(AggFn, "sum" => AggFn::Sum, "min" => AggFn::Min, "max" => AggFn::Max, "count" => AggFn::Count, "mean" => AggFn::Mean);

/// Stage names an operator reports, in execution order.
pub mod stage_names {
    pub const SHUFFLE_JOIN: [&str; 5] = [
        "partition",
        "split",
        "shuffle-left",
        "shuffle-right",
        "local-join",
    ];
    pub const BROADCAST_JOIN: [&str; 2] = ["broadcast", "local-join"];
    pub const GROUPBY_COMBINE: [&str; 5] = [
        "local-combine",
        "partition",
        "split",
        "shuffle",
        "local-reduce",
    ];
    pub const GROUPBY_SHUFFLE: [&str; 4] = ["partition", "split", "shuffle", "local-groupby"];
    pub const UNIQUE: [&str; 5] = [
        "local-combine",
        "partition",
        "split",
        "shuffle",
        "local-unique",
    ];
    pub const UNION: [&str; 5] = [
        "partition",
        "split",
        "shuffle-left",
        "shuffle-right",
        "local-union",
    ];
    pub const DIFFERENCE: [&str; 5] = [
        "partition",
        "split",
        "shuffle-left",
        "shuffle-right",
        "local-difference",
    ];
    pub const SAMPLE_SORT: [&str; 8] = [
        "local-sort",
        "sample",
        "gather-samples",
        "calc-pivots",
        "bcast-pivots",
        "split",
        "shuffle",
        "local-merge",
    ];
    pub const HISTOGRAM_SORT: [&str; 5] = [
        "sample",
        "allreduce-range",
        "binning",
        "shuffle",
        "local-sort",
    ];
    pub const ELEMENTWISE: [&str; 1] = ["local-op"];
    pub const AGGREGATE: [&str; 3] = ["local-op", "allreduce", "finalize"];
    pub const WINDOW: [&str; 2] = ["halo-exchange", "local-op"];
    pub const CSV_WRITE: [&str; 1] = ["write"];
    pub const CSV_READ: [&str; 1] = ["read"];
}

pub(crate) fn index_of(t: &Table, name: &str) -> Result<usize> {
    t.schema().index_of(name)
}

pub(crate) fn indices_of<S: AsRef<str>>(t: &Table, names: &[S]) -> Result<Vec<usize>> {
    t.schema().indices_of(names)
}

/// Row `k` of the result is `col[idx[k]]`, or null where `idx[k]` is `None`.
pub(crate) fn take_opt(col: &Column, idx: &[Option<usize>]) -> Column {
    if idx.iter().all(Option::is_some) {
        let plain: Vec<usize> = idx.iter().map(|i| i.expect("checked")).collect();
        return col.take(&plain);
    }
    let mut b = ColumnBuilder::new(col.dtype());
    for i in idx {
        match i {
            Some(i) => b.push_from(col, *i),
            None => b.push_null(),
        }
    }
    b.finish()
}
