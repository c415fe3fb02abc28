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

//! Benchmark harness for the ddf-core operators: cardinality-controlled data
//! generation, timed multi-rank runs, scaling suites, network calibration
//! and cost-model comparison.

pub mod calibrate;
pub mod config;
pub mod datagen;
pub mod predict;
pub mod runner;

pub use config::{BenchConfig, KeyScope, OpKind, Transport};
pub use runner::{run_benchmark, run_processes, scaling_suite, ScalingMode, TimingReport};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ddf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker failed: {0}")]
    Worker(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
}
