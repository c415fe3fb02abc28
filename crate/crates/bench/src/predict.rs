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

//! Pairs measured stage timings with the analytic cost model.

use ddf_core::costmodel::{pattern_cost, CostBreakdown, CostParams, LocalOpKind, Pattern};
use ddf_core::ops::{GroupByStrategy, JoinAlgorithm, SortStrategy};
use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationResult;
use crate::config::{BenchConfig, OpKind};
use crate::runner::{run_benchmark, TimingReport};
use crate::BenchError;

/// Bytes per generated row: two Int64 columns.
pub const ROW_BYTES: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl From<&CalibrationResult> for ModelConstants {
    fn from(c: &CalibrationResult) -> Self {
        Self {
            alpha: c.alpha,
            beta: c.beta,
            kappa: c.kappa,
        }
    }
}

/// The pattern and local core that model `cfg`'s operator.
pub fn pattern_for(cfg: &BenchConfig) -> Result<(Pattern, LocalOpKind), BenchError> {
    use LocalOpKind as L;
    Ok(match cfg.op {
        OpKind::Join => match cfg.join_algorithm()? {
            JoinAlgorithm::HashShuffle => (Pattern::ShuffleComputeHash, L::HashJoin),
            JoinAlgorithm::SortShuffle => (Pattern::ShuffleComputeHash, L::SortJoin),
            JoinAlgorithm::Broadcast => (Pattern::BroadcastCompute, L::HashJoin),
        },
        OpKind::Groupby => match cfg.groupby_strategy()? {
            GroupByStrategy::CombineShuffleReduce => (Pattern::CombineShuffleReduce, L::GroupBy),
            GroupByStrategy::ShuffleCompute => (Pattern::ShuffleComputeHash, L::GroupBy),
        },
        OpKind::Sort => match cfg.sort_strategy()? {
            SortStrategy::SampleSort => (Pattern::SampleShuffleCompute, L::Sort),
            SortStrategy::HistogramRange => (Pattern::ShuffleComputeRange, L::Sort),
        },
        OpKind::Union => (Pattern::ShuffleComputeHash, L::Union),
        OpKind::Difference => (Pattern::ShuffleComputeHash, L::SetDifference),
        OpKind::Unique => (Pattern::CombineShuffleReduce, L::Unique),
        OpKind::Select | OpKind::Csv => (Pattern::EmbarrassinglyParallel, L::SelectionMap),
        OpKind::Project => (Pattern::EmbarrassinglyParallel, L::Projection),
        OpKind::Aggregate => (Pattern::GloballyReduce, L::ColumnAggregation),
        OpKind::Window => (
            Pattern::HaloExchange { window: cfg.window },
            L::RowAggregation,
        ),
    })
}

pub fn cost_params(cfg: &BenchConfig, k: ModelConstants) -> CostParams<f64> {
    CostParams::new(
        k.alpha,
        k.beta,
        k.kappa,
        cfg.workers,
        cfg.rows as f64,
        ROW_BYTES,
    )
    .with_cardinality(cfg.cardinality)
    .with_columns(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedStage {
    pub name: String,
    pub seconds: f64,
    pub bytes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pattern: String,
    pub core: String,
    pub startup_s: f64,
    pub transfer_s: f64,
    pub reduce_s: f64,
    pub compute_s: f64,
    pub total_s: f64,
    pub predicted_bytes: f64,
    /// The `(P - 1) * alpha` message startup cost of one shuffle.
    pub shuffle_startup_term_s: f64,
    pub stages: Vec<PredictedStage>,
}

impl Prediction {
    fn from_breakdown(
        pattern: Pattern,
        core: LocalOpKind,
        b: &CostBreakdown<f64>,
        params: &CostParams<f64>,
    ) -> Self {
        Self {
            pattern: format!("{pattern:?}"),
            core: format!("{core:?}"),
            startup_s: b.startup,
            transfer_s: b.transfer,
            reduce_s: b.reduce,
            compute_s: b.compute,
            total_s: b.total(),
            predicted_bytes: b.predicted_bytes,
            shuffle_startup_term_s: (params.workers as f64 - 1.0) * params.alpha,
            stages: b
                .stages
                .iter()
                .map(|s| PredictedStage {
                    name: s.name.clone(),
                    seconds: s.seconds,
                    bytes: s.bytes,
                })
                .collect(),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&PredictedStage> {
        self.stages.iter().find(|s| s.name == name)
    }
}

/// Model-only prediction for `cfg`.
pub fn predict(cfg: &BenchConfig, k: ModelConstants) -> Result<Prediction, BenchError> {
    cfg.validate()?;
    let (pattern, core) = pattern_for(cfg)?;
    let params = cost_params(cfg, k);
    let b = pattern_cost(pattern, &params, core)?;
    Ok(Prediction::from_breakdown(pattern, core, &b, &params))
}

/// Name of the model stage a measured stage is compared with.
pub fn model_stage(measured: &str) -> &str {
    match measured {
        "shuffle-left" | "shuffle-right" => "shuffle",
        "local-join" | "local-groupby" | "local-union" | "local-difference" | "local-unique" => {
            "local-op"
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageComparison {
    pub name: String,
    pub model_stage: String,
    pub measured_wall_s: f64,
    pub predicted_s: Option<f64>,
    /// measured / predicted.
    pub ratio: Option<f64>,
    /// Mean bytes sent per rank.
    pub measured_bytes: f64,
    pub predicted_bytes: Option<f64>,
    pub bytes_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub constants: ModelConstants,
    pub prediction: Prediction,
    pub measured: TimingReport,
    pub stages: Vec<StageComparison>,
}

fn ratio(m: f64, p: f64) -> Option<f64> {
    (p > 0.0).then(|| m / p)
}

/// Pairs each stage of `report` with its model stage.
pub fn compare(report: TimingReport, k: ModelConstants) -> Result<Comparison, BenchError> {
    let prediction = predict(&report.config, k)?;
    let stages = report
        .stages
        .iter()
        .map(|s| {
            let ms = model_stage(&s.name);
            let p = prediction.stage(ms);
            StageComparison {
                name: s.name.clone(),
                model_stage: ms.to_string(),
                measured_wall_s: s.wall_s,
                predicted_s: p.map(|p| p.seconds),
                ratio: p.and_then(|p| ratio(s.wall_s, p.seconds)),
                measured_bytes: s.bytes_mean,
                predicted_bytes: p.map(|p| p.bytes),
                bytes_ratio: p.and_then(|p| ratio(s.bytes_mean, p.bytes)),
            }
        })
        .collect();
    Ok(Comparison {
        constants: k,
        prediction,
        measured: report,
        stages,
    })
}

/// Runs `cfg` and compares it against the model under `k`.
pub fn predict_vs_measured(cfg: &BenchConfig, k: ModelConstants) -> Result<Comparison, BenchError> {
    compare(run_benchmark(cfg)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: ModelConstants = ModelConstants {
        alpha: 1e-6,
        beta: 1e-9,
        kappa: 1e-8,
    };

    fn cfg(op: OpKind, rows: usize, p: usize) -> BenchConfig {
        BenchConfig {
            reps: 1,
            warmup: false,
            cardinality: 1.0,
            ..BenchConfig::new(op, rows, p)
        }
    }

    #[test]
    fn uniform_shuffle_bytes_within_ten_percent() {
        let c = predict_vs_measured(&cfg(OpKind::Join, 40_000, 4), K).unwrap();
        for s in c.stages.iter().filter(|s| s.model_stage == "shuffle") {
            let r = s.bytes_ratio.unwrap();
            assert!((r - 1.0).abs() < 0.1, "{}: {r}", s.name);
        }
    }

    #[test]
    fn single_worker_has_no_comm() {
        let c = predict_vs_measured(&cfg(OpKind::Join, 2_000, 1), K).unwrap();
        assert_eq!(c.prediction.startup_s + c.prediction.transfer_s, 0.0);
        assert_eq!(c.prediction.shuffle_startup_term_s, 0.0);
        assert!(c.stages.iter().all(|s| s.measured_bytes == 0.0));
    }

    #[test]
    fn startup_term_reported() {
        let p = predict(&cfg(OpKind::Join, 1000, 4), K).unwrap();
        assert_eq!(p.shuffle_startup_term_s, 3e-6);
    }

    #[test]
    fn every_op_has_a_pattern() {
        for op in [
            OpKind::Select,
            OpKind::Window,
            OpKind::Aggregate,
            OpKind::Unique,
            OpKind::Sort,
        ] {
            predict(&cfg(op, 1000, 4), K).unwrap();
        }
    }
}
