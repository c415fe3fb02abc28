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

//! Runs one benchmark configuration on a cluster and summarizes timings.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use ddf_core::comm::{
    run_cluster, CollectiveKind, StageRecord, WorkerContext, ENV_COORD, ENV_RANK, ENV_WORLD,
};
use ddf_core::ops::{self, AggFn, AggSpec, JoinKind};
use ddf_core::{Table, Value};
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, OpKind, Transport};
use crate::datagen::{generate_partition, VALUE_RANGE};
use crate::BenchError;

/// Line prefix a worker process uses for its JSON report on stdout.
pub const REPORT_PREFIX: &str = "DDF-RANK-REPORT ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub wall_s: f64,
    pub cpu_s: f64,
    pub bytes: u64,
}

/// One rank's measurements, with per-stage medians over the timed reps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub input_rows: usize,
    pub output_rows: usize,
    pub total_wall_s: f64,
    pub stages: Vec<StageTiming>,
    /// Bytes this rank sent per collective kind in the last rep.
    pub bytes_by_kind: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub name: String,
    /// Slowest rank, which bounds a BSP stage.
    pub wall_s: f64,
    pub wall_mean_s: f64,
    pub cpu_mean_s: f64,
    /// Largest per-rank byte count.
    pub bytes: u64,
    pub bytes_mean: f64,
    pub bytes_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub config: BenchConfig,
    pub stages: Vec<StageSummary>,
    pub total_wall_s: f64,
    pub output_rows: usize,
    pub rank_detail: Vec<RankReport>,
}

impl TimingReport {
    pub fn stage(&self, name: &str) -> Option<&StageSummary> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Mean bytes per rank over all stages whose name starts with `prefix`.
    pub fn bytes_mean_with_prefix(&self, prefix: &str) -> f64 {
        self.stages
            .iter()
            .filter(|s| s.name.starts_with(prefix))
            .map(|s| s.bytes_mean)
            .sum()
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

struct Inputs {
    left: Table,
    right: Option<Table>,
}

fn make_inputs(cfg: &BenchConfig, rank: usize) -> Result<Inputs, BenchError> {
    let left = generate_partition(cfg, rank, 0)?;
    let right = if cfg.op.is_binary() {
        Some(generate_partition(cfg, rank, 1)?)
    } else {
        None
    };
    Ok(Inputs { left, right })
}

fn csv_dir(cfg: &BenchConfig) -> PathBuf {
    cfg.csv_dir.clone().unwrap_or_else(|| {
        std::env::temp_dir().join(format!(
            "ddf-bench-csv-{}-{}-{}",
            std::process::id(),
            cfg.seed,
            cfg.workers
        ))
    })
}

/// Runs the configured operator once; returns the local output row count.
fn run_op(ctx: &mut WorkerContext, cfg: &BenchConfig, inp: &Inputs) -> Result<usize, BenchError> {
    let l = &inp.left;
    let r = || inp.right.as_ref().expect("binary op has a right input");
    let out = match cfg.op {
        OpKind::Join => ops::join(
            ctx,
            l,
            r(),
            &["k"],
            &["k"],
            JoinKind::Inner,
            cfg.join_algorithm()?,
        )?,
        OpKind::Groupby => {
            // One Sum keeps combined partials as wide as input rows, so
            // shuffled bytes track shuffled rows.
            let aggs = AggSpec::new().with("v", AggFn::Sum);
            ops::groupby(ctx, l, &["k"], &aggs, cfg.groupby_strategy()?)?
        }
        OpKind::Sort => ops::sort(ctx, l, "k", cfg.sort_strategy()?)?,
        OpKind::Union => ops::union_distinct(ctx, l, r())?,
        OpKind::Difference => ops::difference(ctx, l, r())?,
        OpKind::Unique => ops::unique(ctx, l, &["k"])?,
        OpKind::Select => ctx.stage("local-op", |_| {
            ops::select(
                l,
                "v",
                |v| matches!(v, Value::Int64(x) if x < VALUE_RANGE / 2),
            )
        })?,
        OpKind::Project => ctx.stage("local-op", |_| ops::project(l, &["k"]))?,
        OpKind::Aggregate => {
            let aggs = AggSpec::new()
                .with("v", AggFn::Sum)
                .with("v", AggFn::Min)
                .with("v", AggFn::Max)
                .with("v", AggFn::Mean);
            ops::column_aggregate(ctx, l, &aggs)?
        }
        OpKind::Window => ops::rolling_window(ctx, l, "v", cfg.window)?,
        OpKind::Csv => {
            let dir = csv_dir(cfg);
            ops::write_csv_partitioned(ctx, l, &dir)?;
            let paths: Vec<PathBuf> = (0..ctx.world_size())
                .map(|r| dir.join(format!("part-{r:05}.csv")))
                .collect();
            let t = ops::read_csv_partitioned(ctx, &paths)?;
            ctx.barrier()?;
            if ctx.rank() == 0 {
                let _ = std::fs::remove_dir_all(&dir);
            }
            t
        }
    };
    Ok(out.num_rows())
}

fn secs(d: std::time::Duration) -> f64 {
    d.as_secs_f64()
}

/// Runs `cfg` on an existing context. Every rank of the world must call it.
pub fn run_worker(ctx: &mut WorkerContext, cfg: &BenchConfig) -> Result<RankReport, BenchError> {
    cfg.validate()?;
    if ctx.world_size() != cfg.workers {
        return Err(BenchError::Config(format!(
            "world size {} does not match workers = {}",
            ctx.world_size(),
            cfg.workers
        )));
    }
    let rank = ctx.rank();
    let inputs = make_inputs(cfg, rank)?;
    let runs = cfg.reps + usize::from(cfg.warmup);
    let mut samples: Vec<(Vec<StageRecord>, f64)> = Vec::with_capacity(runs);
    let mut output_rows = 0;
    let mut bytes_by_kind = BTreeMap::new();
    for _ in 0..runs {
        ctx.barrier()?;
        ctx.reset_counters();
        ctx.record_stages();
        let start = Instant::now();
        output_rows = run_op(ctx, cfg, &inputs)?;
        let total = secs(start.elapsed());
        let counters = ctx.bytes_sent();
        bytes_by_kind = CollectiveKind::ALL
            .iter()
            .filter(|&&k| k != CollectiveKind::Barrier)
            .map(|&k| (k.name().to_string(), counters.bytes(k)))
            .collect();
        samples.push((ctx.take_stages(), total));
    }
    if cfg.warmup {
        samples.remove(0);
    }
    let names: Vec<String> = samples[0].0.iter().map(|s| s.name.clone()).collect();
    let stages = names
        .iter()
        .enumerate()
        .map(|(i, name)| StageTiming {
            name: name.clone(),
            wall_s: median(samples.iter().map(|(s, _)| secs(s[i].wall)).collect()),
            cpu_s: median(samples.iter().map(|(s, _)| secs(s[i].cpu)).collect()),
            bytes: samples.last().map(|(s, _)| s[i].bytes).unwrap_or(0),
        })
        .collect();
    Ok(RankReport {
        rank,
        input_rows: inputs.left.num_rows(),
        output_rows,
        total_wall_s: median(samples.iter().map(|(_, t)| *t).collect()),
        stages,
        bytes_by_kind,
    })
}

/// Combines per-rank reports into per-stage summaries.
pub fn summarize(
    cfg: &BenchConfig,
    mut ranks: Vec<RankReport>,
) -> Result<TimingReport, BenchError> {
    ranks.sort_by_key(|r| r.rank);
    let first = ranks
        .first()
        .ok_or_else(|| BenchError::Config("no rank reports".into()))?;
    let p = ranks.len() as f64;
    let mut stages = Vec::with_capacity(first.stages.len());
    for (i, s) in first.stages.iter().enumerate() {
        let per: Vec<&StageTiming> = ranks.iter().filter_map(|r| r.stages.get(i)).collect();
        if per.len() != ranks.len() || per.iter().any(|x| x.name != s.name) {
            return Err(BenchError::Config(format!(
                "ranks disagree on stage {i} ({})",
                s.name
            )));
        }
        let total: u64 = per.iter().map(|x| x.bytes).sum();
        stages.push(StageSummary {
            name: s.name.clone(),
            wall_s: per.iter().map(|x| x.wall_s).fold(0.0, f64::max),
            wall_mean_s: per.iter().map(|x| x.wall_s).sum::<f64>() / p,
            cpu_mean_s: per.iter().map(|x| x.cpu_s).sum::<f64>() / p,
            bytes: per.iter().map(|x| x.bytes).max().unwrap_or(0),
            bytes_mean: total as f64 / p,
            bytes_total: total,
        });
    }
    Ok(TimingReport {
        config: cfg.clone(),
        stages,
        total_wall_s: ranks.iter().map(|r| r.total_wall_s).fold(0.0, f64::max),
        output_rows: ranks.iter().map(|r| r.output_rows).sum(),
        rank_detail: ranks,
    })
}

/// Runs `cfg` with one thread per worker. TCP configs use loopback sockets
/// between threads; see [`run_processes`] for separate processes.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<TimingReport, BenchError> {
    cfg.validate()?;
    let results = run_cluster(cfg.transport.into(), cfg.workers, |ctx| {
        run_worker(ctx, cfg)
    })?;
    let ranks = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    summarize(cfg, ranks)
}

/// Runs `cfg` with one OS process per worker, each started as
/// `exe worker --config <json>` and connected over TCP.
pub fn run_processes(cfg: &BenchConfig, exe: &Path) -> Result<TimingReport, BenchError> {
    cfg.validate()?;
    if cfg.transport != Transport::Tcp {
        return Err(BenchError::Config(
            "process launch needs the tcp transport".into(),
        ));
    }
    let json = serde_json::to_string(cfg)?;
    let coord = {
        let l = TcpListener::bind("127.0.0.1:0")?;
        l.local_addr()?.to_string()
    };
    let mut children = Vec::with_capacity(cfg.workers);
    for rank in 0..cfg.workers {
        let child = Command::new(exe)
            .args(["worker", "--config", &json])
            .env(ENV_COORD, &coord)
            .env(ENV_RANK, rank.to_string())
            .env(ENV_WORLD, cfg.workers.to_string())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        children.push(child);
    }
    let mut ranks = Vec::with_capacity(cfg.workers);
    let mut failures = Vec::new();
    for (rank, mut child) in children.into_iter().enumerate() {
        let stdout = child.stdout.take().expect("piped stdout");
        let mut report = None;
        for line in BufReader::new(stdout).lines() {
            let line = line?;
            if let Some(js) = line.strip_prefix(REPORT_PREFIX) {
                report = Some(serde_json::from_str::<RankReport>(js)?);
            }
        }
        let out = child.wait_with_output()?;
        match report {
            Some(r) if out.status.success() => ranks.push(r),
            _ => failures.push(format!(
                "rank {rank} exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )),
        }
    }
    if !failures.is_empty() {
        return Err(BenchError::Worker(failures.join("; ")));
    }
    summarize(cfg, ranks)
}

/// Strong scaling keeps total rows fixed; weak scaling keeps rows per worker
/// fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub workers: usize,
    pub report: Option<TimingReport>,
    /// Why the point was skipped.
    pub skipped: Option<String>,
}

/// Runs `template` at each worker count. In weak mode `template.rows` is the
/// per-worker row count. Infeasible points are skipped with a reason.
pub fn scaling_suite(
    mode: ScalingMode,
    template: &BenchConfig,
    workers: &[usize],
    mut run: impl FnMut(&BenchConfig) -> Result<TimingReport, BenchError>,
) -> Vec<ScalingPoint> {
    workers
        .iter()
        .map(|&p| {
            let mut cfg = template.clone();
            cfg.workers = p;
            if mode == ScalingMode::Weak {
                cfg.rows = template.rows * p;
            }
            let res = cfg.validate().and_then(|_| run(&cfg));
            match res {
                Ok(r) => ScalingPoint {
                    workers: p,
                    report: Some(r),
                    skipped: None,
                },
                Err(e) => ScalingPoint {
                    workers: p,
                    report: None,
                    skipped: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(op: OpKind, p: usize) -> BenchConfig {
        BenchConfig {
            reps: 2,
            warmup: true,
            ..BenchConfig::new(op, 2000, p)
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn every_op_runs() {
        for op in [
            OpKind::Join,
            OpKind::Groupby,
            OpKind::Sort,
            OpKind::Union,
            OpKind::Difference,
            OpKind::Unique,
            OpKind::Select,
            OpKind::Project,
            OpKind::Aggregate,
            OpKind::Window,
            OpKind::Csv,
        ] {
            let rep = run_benchmark(&small(op, 3)).unwrap_or_else(|e| panic!("{op}: {e}"));
            assert_eq!(rep.rank_detail.len(), 3);
            assert!(!rep.stages.is_empty(), "{op}");
            assert!(rep.total_wall_s > 0.0);
        }
    }

    #[test]
    fn join_stage_names() {
        let rep = run_benchmark(&small(OpKind::Join, 2)).unwrap();
        let names: Vec<&str> = rep.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ops::stage_names::SHUFFLE_JOIN);
    }

    #[test]
    fn weak_scaling_skips_infeasible() {
        let t = BenchConfig {
            rows: 10,
            cardinality: 0.01,
            reps: 1,
            ..BenchConfig::new(OpKind::Groupby, 10, 1)
        };
        let pts = scaling_suite(ScalingMode::Weak, &t, &[1, 20], run_benchmark);
        assert!(pts[0].skipped.is_some(), "0.1 keys is infeasible");
        assert!(pts[1].report.is_some());
    }

    #[test]
    fn world_mismatch_rejected() {
        let cfg = small(OpKind::Join, 3);
        let res = run_cluster(ddf_core::TransportKind::Local, 2, |ctx| {
            run_worker(ctx, &cfg).is_err()
        })
        .unwrap();
        assert!(res.iter().all(|&e| e));
    }
}
