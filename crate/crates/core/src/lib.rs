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

//! Distributed-memory dataframe engine: columnar tables, a BSP communicator
//! with local and TCP transports, partitioning sub-operators, distributed
//! operators and an analytic communication cost model.

pub mod columnar;
pub mod comm;
pub mod costmodel;
pub mod error;
pub mod ops;
pub mod partition;
pub mod scalar;

pub use columnar::{
    canonical_sort, concat_tables, take_rows, Column, DataType, Schema, Table, Value,
};
pub use comm::{run_cluster, CollectiveKind, ReduceOp, TransportKind, WorkerContext};
pub use error::{Error, Result};
pub use scalar::{hash64, Element, KeyScalar, NumericKey};

pub type CostParams64 = costmodel::CostParams<f64>;
pub type CostParams32 = costmodel::CostParams<f32>;
pub type CostBreakdown64 = costmodel::CostBreakdown<f64>;
pub type RangeBoundsI64 = partition::RangeBounds<i64>;
pub type RangeBoundsF64 = partition::RangeBounds<f64>;
