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

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddf_bench::calibrate::{calibrate, default_sizes, DEFAULT_SORT_SIZES};
use ddf_bench::predict::{predict, predict_vs_measured, ModelConstants};
use ddf_bench::runner::{run_worker, REPORT_PREFIX};
use ddf_bench::{
    run_benchmark, run_processes, scaling_suite, BenchConfig, BenchError, KeyScope, OpKind,
    ScalingMode, TimingReport, Transport,
};
use ddf_core::comm::{TcpConfig, TcpTransport, WorkerContext};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ddf-bench",
    version,
    about = "Benchmarks for distributed dataframe operators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one operator configuration.
    Run {
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a strong or weak scaling suite over several worker counts.
    Scaling {
        #[arg(long, value_enum, default_value = "strong")]
        kind: ScalingMode,
        /// Worker counts, comma separated.
        #[arg(long = "workers", value_delimiter = ',', default_value = "1,2,4,8")]
        worker_list: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the cost model, optionally against a measured run.
    Predict {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        kappa: f64,
        /// Also run the configuration and pair measured stages with the model.
        #[arg(long)]
        measure: bool,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fit alpha and beta from a ping-pong sweep and kappa from local sorts.
    Calibrate {
        #[arg(long, value_enum, default_value = "local")]
        transport: Transport,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// One rank of a multi-process run; configured by DDF_COORD, DDF_RANK
    /// and DDF_WORLD.
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        config: String,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "join")]
    op: OpKind,
    /// Total rows per input table (rows per worker for weak scaling).
    #[arg(long, default_value_t = 1_000_000)]
    rows: usize,
    #[arg(long, default_value_t = 0.9)]
    cardinality: f64,
    #[arg(long, value_enum, default_value = "local")]
    transport: Transport,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Join algorithm (hash|sort|broadcast), groupby strategy
    /// (shuffle-compute|combine-shuffle-reduce) or sort strategy
    /// (sample|histogram).
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Time every repetition, including the first.
    #[arg(long)]
    no_warmup: bool,
    #[arg(long, value_enum, default_value = "global")]
    key_scope: KeyScope,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    /// Run TCP workers as threads of this process instead of processes.
    #[arg(long)]
    threads: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl Common {
    fn config(&self, workers: usize) -> BenchConfig {
        BenchConfig {
            op: self.op,
            rows: self.rows,
            workers,
            cardinality: self.cardinality,
            transport: self.transport,
            seed: self.seed,
            strategy: self.strategy.clone(),
            reps: self.reps,
            warmup: !self.no_warmup,
            key_scope: self.key_scope,
            window: self.window,
            csv_dir: self.csv_dir.clone(),
        }
    }

    fn run(&self, cfg: &BenchConfig) -> Result<TimingReport, BenchError> {
        if cfg.transport == Transport::Tcp && !self.threads {
            run_processes(cfg, &std::env::current_exe()?)
        } else {
            run_benchmark(cfg)
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&PathBuf>) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn print_summary(r: &TimingReport) {
    let c = &r.config;
    eprintln!(
        "{} rows={} P={} C={} transport={:?}: total {:.6} s (max over ranks), {} output rows",
        c.op, c.rows, c.workers, c.cardinality, c.transport, r.total_wall_s, r.output_rows
    );
    eprintln!(
        "  {:<16} {:>12} {:>12} {:>14}",
        "stage", "max wall s", "mean wall s", "max bytes"
    );
    for s in &r.stages {
        eprintln!(
            "  {:<16} {:>12.6} {:>12.6} {:>14}",
            s.name, s.wall_s, s.wall_mean_s, s.bytes
        );
    }
}

fn worker(config: &str) -> Result<(), BenchError> {
    let cfg: BenchConfig = serde_json::from_str(config)?;
    let tcp = TcpConfig::from_env()?;
    let mut ctx = WorkerContext::new(Box::new(TcpTransport::connect(&tcp)?));
    let report = run_worker(&mut ctx, &cfg)?;
    println!("{REPORT_PREFIX}{}", serde_json::to_string(&report)?);
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Run { workers, common } => {
            let r = common.run(&common.config(workers))?;
            print_summary(&r);
            emit(&r, common.json.as_ref())
        }
        Cmd::Scaling {
            kind,
            worker_list,
            common,
        } => {
            let points = scaling_suite(kind, &common.config(1), &worker_list, |c| common.run(c));
            for p in &points {
                match (&p.report, &p.skipped) {
                    (Some(r), _) => print_summary(r),
                    (None, Some(why)) => eprintln!("skipping P={}: {why}", p.workers),
                    _ => {}
                }
            }
            emit(&points, common.json.as_ref())
        }
        Cmd::Predict {
            alpha,
            beta,
            kappa,
            measure,
            workers,
            common,
        } => {
            let k = ModelConstants { alpha, beta, kappa };
            let cfg = common.config(workers);
            if measure {
                let c = if cfg.transport == Transport::Tcp && !common.threads {
                    ddf_bench::predict::compare(common.run(&cfg)?, k)?
                } else {
                    predict_vs_measured(&cfg, k)?
                };
                emit(&c, common.json.as_ref())
            } else {
                emit(&predict(&cfg, k)?, common.json.as_ref())
            }
        }
        Cmd::Calibrate {
            transport,
            reps,
            json,
        } => {
            let r = calibrate(
                transport.into(),
                &default_sizes(),
                reps,
                &DEFAULT_SORT_SIZES,
            )?;
            eprintln!(
                "alpha = {:.3e} s, beta = {:.3e} s/B, kappa = {:.3e} s/op (rms residuals {:.3}, {:.3})",
                r.alpha, r.beta, r.kappa, r.network_rms_relative_residual, r.kappa_rms_relative_residual
            );
            emit(&r, json.as_ref())
        }
        Cmd::Worker { config } => worker(&config),
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddf-bench: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn scaling_parses_worker_list() {
        let cli = Cli::try_parse_from([
            "ddf-bench",
            "scaling",
            "--kind",
            "weak",
            "--workers",
            "1,2,4",
        ])
        .unwrap();
        match cli.cmd {
            Cmd::Scaling {
                kind, worker_list, ..
            } => {
                assert_eq!(kind, ScalingMode::Weak);
                assert_eq!(worker_list, vec![1, 2, 4]);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
