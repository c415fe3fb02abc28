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

//! BSP communicator: a transport-agnostic [`WorkerContext`] offering buffer
//! channels and table, array and scalar collectives.
//!
//! Two transports implement the same contract: [`LocalTransport`] (threads
//! with private state, frames over in-process queues) and [`TcpTransport`]
//! (separate processes over TCP).

mod cluster;
mod context;
mod frame;
mod tcp;
mod transport;

pub use cluster::{run_cluster, run_cluster_with_timeout, TransportKind};
pub use context::{
    broadcast_rounds, thread_cpu_time, BufferRequest, ByteCounters, CollectiveKind, ReduceOp,
    StageRecord, WorkerContext,
};
pub use frame::{Frame, FrameTag, MAX_BUFFER_INDEX, MAX_RANKS};
pub use tcp::{TcpConfig, TcpTransport, ENV_COORD, ENV_RANK, ENV_TIMEOUT, ENV_WORLD};
pub use transport::{LocalTransport, Transport, DEFAULT_TIMEOUT};
