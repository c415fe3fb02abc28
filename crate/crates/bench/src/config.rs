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

//! Benchmark configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ddf_core::comm::TransportKind;
use ddf_core::ops::{GroupByStrategy, JoinAlgorithm, SortStrategy};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Operator under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Join,
    Groupby,
    Sort,
    Union,
    Difference,
    Unique,
    Select,
    Project,
    Aggregate,
    Window,
    Csv,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Join => "join",
            OpKind::Groupby => "groupby",
            OpKind::Sort => "sort",
            OpKind::Union => "union",
            OpKind::Difference => "difference",
            OpKind::Unique => "unique",
            OpKind::Select => "select",
            OpKind::Project => "project",
            OpKind::Aggregate => "aggregate",
            OpKind::Window => "window",
            OpKind::Csv => "csv",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, OpKind::Join | OpKind::Union | OpKind::Difference)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Transport as named on the command line and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Local,
    Tcp,
}

impl From<Transport> for TransportKind {
    fn from(t: Transport) -> Self {
        match t {
            Transport::Local => TransportKind::Local,
            Transport::Tcp => TransportKind::Tcp,
        }
    }
}

/// Where the distinct-key pool lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KeyScope {
    /// One pool of `ceil(N * C)` keys shared by all workers; each worker
    /// also holds its slice of the pool once, so the global cardinality is C.
    #[default]
    Global,
    /// Each worker draws from its own pool of `ceil(n * C)` keys (the same
    /// values on every worker), so every partition has cardinality C.
    PerWorker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub op: OpKind,
    /// Total rows per input table.
    pub rows: usize,
    pub workers: usize,
    pub cardinality: f64,
    pub transport: Transport,
    pub seed: u64,
    /// Operator-specific selector: join algorithm, groupby strategy or
    /// sort strategy.
    pub strategy: Option<String>,
    pub reps: usize,
    /// Run one extra untimed repetition first.
    pub warmup: bool,
    pub key_scope: KeyScope,
    pub window: usize,
    pub csv_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            op: OpKind::Join,
            rows: 1_000_000,
            workers: 4,
            cardinality: 0.9,
            transport: Transport::Local,
            seed: 1,
            strategy: None,
            reps: 5,
            warmup: true,
            key_scope: KeyScope::Global,
            window: 8,
            csv_dir: None,
        }
    }
}

impl BenchConfig {
    pub fn new(op: OpKind, rows: usize, workers: usize) -> Self {
        Self {
            op,
            rows,
            workers,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.workers == 0 {
            return Err(BenchError::Config("workers must be at least 1".into()));
        }
        if self.rows < self.workers {
            return Err(BenchError::Config(format!(
                "rows ({}) must be at least the number of workers ({})",
                self.rows, self.workers
            )));
        }
        if !(self.cardinality > 0.0 && self.cardinality <= 1.0) {
            return Err(BenchError::Config(format!(
                "cardinality {} not in (0, 1]",
                self.cardinality
            )));
        }
        let pool_rows = match self.key_scope {
            KeyScope::Global => self.rows,
            KeyScope::PerWorker => self.rows / self.workers,
        };
        if (pool_rows as f64) * self.cardinality < 1.0 {
            return Err(BenchError::Config(format!(
                "{pool_rows} rows at cardinality {} give fewer than one distinct key",
                self.cardinality
            )));
        }
        if self.reps == 0 {
            return Err(BenchError::Config("reps must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(BenchError::Config("window must be at least 1".into()));
        }
        self.join_algorithm()?;
        self.groupby_strategy()?;
        self.sort_strategy()?;
        Ok(())
    }

    /// Rows held by `rank`; the first `rows % P` ranks get one extra.
    pub fn rows_on(&self, rank: usize) -> usize {
        self.rows / self.workers + usize::from(rank < self.rows % self.workers)
    }

    fn parse_strategy<T: FromStr<Err = ddf_core::Error> + Default>(
        &self,
        applies: bool,
    ) -> Result<T, BenchError> {
        match (&self.strategy, applies) {
            (Some(s), true) => s
                .parse()
                .map_err(|e: ddf_core::Error| BenchError::Config(e.to_string())),
            _ => Ok(T::default()),
        }
    }

    pub fn join_algorithm(&self) -> Result<JoinAlgorithm, BenchError> {
        match (&self.strategy, self.op) {
            (Some(s), OpKind::Join) => s
                .parse()
                .map_err(|e: ddf_core::Error| BenchError::Config(e.to_string())),
            _ => Ok(JoinAlgorithm::HashShuffle),
        }
    }

    pub fn groupby_strategy(&self) -> Result<GroupByStrategy, BenchError> {
        self.parse_strategy(self.op == OpKind::Groupby)
    }

    pub fn sort_strategy(&self) -> Result<SortStrategy, BenchError> {
        self.parse_strategy(self.op == OpKind::Sort)
    }
}
