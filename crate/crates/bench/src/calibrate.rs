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

//! Fits the network constants (alpha, beta) from a ping-pong sweep and the
//! local compute constant kappa from sort timings.

use std::time::Instant;

use ddf_core::columnar::serialize_table;
use ddf_core::comm::{run_cluster, TransportKind, WorkerContext};
use ddf_core::{Column, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// 0 B, then 1 B to 4 MiB in powers of four.
pub fn default_sizes() -> Vec<usize> {
    std::iter::once(0)
        .chain((0..12).map(|k| 1usize << (2 * k)))
        .collect()
}

pub const DEFAULT_SORT_SIZES: [usize; 4] = [1 << 12, 1 << 14, 1 << 16, 1 << 18];

/// Times one-way delivery of a message carrying `bytes` payload bytes.
pub trait MessageTimer {
    /// Returns `(bytes actually on the wire, one-way seconds)`.
    fn time(&mut self, bytes: usize) -> Result<(f64, f64), BenchError>;
}

/// Reports `alpha + bytes * beta`, optionally scaled by `1 + u` with `u`
/// uniform in `[-noise, noise]`.
#[derive(Debug, Clone)]
pub struct SyntheticTimer {
    pub alpha: f64,
    pub beta: f64,
    pub noise: f64,
    rng: ChaCha8Rng,
}

impl SyntheticTimer {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self::with_noise(alpha, beta, 0.0, 0)
    }

    pub fn with_noise(alpha: f64, beta: f64, noise: f64, seed: u64) -> Self {
        Self {
            alpha,
            beta,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl MessageTimer for SyntheticTimer {
    fn time(&mut self, bytes: usize) -> Result<(f64, f64), BenchError> {
        let jitter = if self.noise > 0.0 {
            1.0 + self.rng.random_range(-self.noise..=self.noise)
        } else {
            1.0
        };
        let b = bytes as f64;
        Ok((b, (self.alpha + b * self.beta) * jitter))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub bytes: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub alpha: f64,
    pub beta: f64,
    /// Root mean square of `(fit - measured) / measured`.
    pub rms_relative_residual: f64,
}

/// Weighted least squares for `seconds = alpha + bytes * beta`, weighting
/// each sample by `1 / seconds^2` so small messages constrain alpha as
/// much as large ones constrain beta. Negative estimates clamp to zero.
pub fn fit_alpha_beta(samples: &[Sample]) -> Result<LinearFit, BenchError> {
    let mut sizes: Vec<f64> = samples.iter().map(|s| s.bytes).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(BenchError::Calibration(format!(
            "need at least two distinct message sizes, got {}",
            sizes.len()
        )));
    }
    if samples
        .iter()
        .any(|s| !(s.seconds > 0.0) || !s.seconds.is_finite())
    {
        return Err(BenchError::Calibration(
            "non-positive or non-finite timing".into(),
        ));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let w = 1.0 / (s.seconds * s.seconds);
        sw += w;
        sx += w * s.bytes;
        sy += w * s.seconds;
        sxx += w * s.bytes * s.bytes;
        sxy += w * s.bytes * s.seconds;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() <= f64::EPSILON * sw * sxx {
        return Err(BenchError::Calibration(
            "degenerate message-size sweep".into(),
        ));
    }
    let beta = ((sw * sxy - sx * sy) / det).max(0.0);
    let alpha = ((sy - beta * sx) / sw).max(0.0);
    Ok(LinearFit {
        alpha,
        beta,
        rms_relative_residual: rms(samples
            .iter()
            .map(|s| (alpha + beta * s.bytes - s.seconds) / s.seconds)),
    })
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for r in it {
        sum += r * r;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Median one-way time per size over `reps` trials.
pub fn sweep(
    timer: &mut dyn MessageTimer,
    sizes: &[usize],
    reps: usize,
) -> Result<Vec<Sample>, BenchError> {
    if reps == 0 {
        return Err(BenchError::Calibration("reps must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &b in sizes {
        let mut times = Vec::with_capacity(reps);
        let mut wire = 0.0;
        for _ in 0..reps {
            let (w, t) = timer.time(b)?;
            wire = w;
            times.push(t);
        }
        times.sort_by(f64::total_cmp);
        out.push(Sample {
            bytes: wire,
            seconds: times[times.len() / 2],
        });
    }
    Ok(out)
}

/// Least squares through the origin for `seconds = kappa * n * log2(n)`.
pub fn fit_kappa(samples: &[(usize, f64)]) -> Result<(f64, f64), BenchError> {
    let xs: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(n, _)| *n > 1)
        .map(|&(n, t)| (n as f64 * (n as f64).log2(), t))
        .collect();
    if xs.is_empty() {
        return Err(BenchError::Calibration("no sort timings with n > 1".into()));
    }
    let sxx: f64 = xs.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = xs.iter().map(|(x, y)| x * y).sum();
    let kappa = (sxy / sxx).max(0.0);
    let res = rms(xs
        .iter()
        .map(|(x, y)| if *y > 0.0 { (kappa * x - y) / y } else { 0.0 }));
    Ok((kappa, res))
}

/// Median wall time of a local stable sort of `n` random Int64 keys.
pub fn time_local_sort(n: usize, reps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys: Vec<i64> = (0..n).map(|_| rng.random()).collect();
    let t = Table::from_columns(vec![("k", Column::from_i64(keys))]).expect("one column");
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(t.sort_indices(&[0]));
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub network_rms_relative_residual: f64,
    pub kappa_rms_relative_residual: f64,
    pub samples: Vec<Sample>,
    pub sort_samples: Vec<(usize, f64)>,
}

/// Ping-pong between rank 0 and rank 1 of a live context.
struct PingPong<'a> {
    ctx: &'a mut WorkerContext,
}

fn payload(bytes: usize) -> Table {
    Table::from_columns(vec![("payload", Column::from_strs(&["x".repeat(bytes)]))])
        .expect("one column")
}

fn stop() -> Table {
    Table::from_columns(vec![("stop", Column::from_i64(vec![]))]).expect("one column")
}

impl MessageTimer for PingPong<'_> {
    fn time(&mut self, bytes: usize) -> Result<(f64, f64), BenchError> {
        let t = payload(bytes);
        let wire = serialize_table(&t).byte_size() as f64;
        let start = Instant::now();
        self.ctx.send_table(1, &t)?;
        self.ctx.recv_table(1)?;
        Ok((wire, start.elapsed().as_secs_f64() / 2.0))
    }
}

fn echo(ctx: &mut WorkerContext) -> Result<(), BenchError> {
    loop {
        let t = ctx.recv_table(0)?;
        if t.schema().index_of("stop").is_ok() {
            return Ok(());
        }
        ctx.send_table(0, &t)?;
    }
}

/// Runs a ping-pong sweep over `sizes` between two workers of `kind`, then
/// fits kappa from local sorts of `sort_sizes` rows.
pub fn calibrate(
    kind: TransportKind,
    sizes: &[usize],
    reps: usize,
    sort_sizes: &[usize],
) -> Result<CalibrationResult, BenchError> {
    let results = run_cluster(kind, 2, |ctx| -> Result<Option<Vec<Sample>>, BenchError> {
        if ctx.rank() == 0 {
            let res = sweep(&mut PingPong { ctx }, sizes, reps);
            ctx.send_table(1, &stop())?;
            res.map(Some)
        } else {
            echo(ctx).map(|_| None)
        }
    })?;
    let mut samples = None;
    for r in results {
        if let Some(s) = r? {
            samples = Some(s);
        }
    }
    let samples = samples.expect("rank 0 returns samples");
    let net = fit_alpha_beta(&samples)?;
    let sort_samples: Vec<(usize, f64)> = sort_sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, time_local_sort(n, reps, i as u64)))
        .collect();
    let (kappa, kres) = fit_kappa(&sort_samples)?;
    Ok(CalibrationResult {
        alpha: net.alpha,
        beta: net.beta,
        kappa,
        network_rms_relative_residual: net.rms_relative_residual,
        kappa_rms_relative_residual: kres,
        samples,
        sort_samples,
    })
}
