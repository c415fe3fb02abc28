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

//! Analytic cost model: Hockney point-to-point cost `T = alpha + n * beta`,
//! collective complexities per algorithm, local operator costs and their
//! composition into whole operator patterns.
//!
//! Asymptotic terms are evaluated with unit coefficients and scaled by the
//! calibration constants, so absolute numbers are only meaningful once
//! `alpha`, `beta`, `gamma` and `kappa` have been measured. Logarithms of
//! the world size are `ceil(log2 P)`; linear `O(P)` startup terms count the
//! `P - 1` remote peers, so every communication term vanishes at `P = 1`.

use std::fmt;

use num_traits::Float;

use crate::comm::CollectiveKind;
use crate::error::{Error, Result};

#[inline]
fn c<F: Float>(x: f64) -> F {
    F::from(x).expect("representable constant")
}

/// `ceil(log2 p)`, zero for `p <= 1`.
pub fn ceil_log2(p: usize) -> u32 {
    if p <= 1 {
        0
    } else {
        usize::BITS - (p - 1).leading_zeros()
    }
}

/// Inputs of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams<F> {
    /// Seconds per message.
    pub alpha: F,
    /// Seconds per byte transferred.
    pub beta: F,
    /// Seconds per byte reduced.
    pub gamma: F,
    /// Seconds per unit of local work (one row touched).
    pub kappa: F,
    pub workers: usize,
    /// Total rows `N`.
    pub total_rows: F,
    pub columns: usize,
    pub row_bytes: F,
    /// Distinct rows over rows, in `[1/N, 1]`.
    pub cardinality: Option<F>,
}

impl<F: Float> CostParams<F> {
    pub fn new(alpha: F, beta: F, kappa: F, workers: usize, total_rows: F, row_bytes: F) -> Self {
        Self {
            alpha,
            beta,
            gamma: F::zero(),
            kappa,
            workers,
            total_rows,
            columns: 2,
            row_bytes,
            cardinality: None,
        }
    }

    pub fn with_cardinality(mut self, c: F) -> Self {
        self.cardinality = Some(c);
        self
    }

    pub fn with_gamma(mut self, gamma: F) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_columns(mut self, columns: usize) -> Self {
        self.columns = columns;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    /// Rows per worker, `n = N / P`.
    pub fn rows_per_worker(&self) -> F {
        self.total_rows / self.p()
    }

    /// Bytes each worker holds, `n * row_bytes`.
    pub fn payload_bytes(&self) -> F {
        self.rows_per_worker() * self.row_bytes
    }

    fn p(&self) -> F {
        c(self.workers as f64)
    }

    fn peers(&self) -> F {
        c(self.workers.saturating_sub(1) as f64)
    }

    fn log_p(&self) -> F {
        c(ceil_log2(self.workers) as f64)
    }

    /// `(P - 1) / P`.
    fn remote_fraction(&self) -> F {
        self.peers() / self.p()
    }

    pub fn validate(&self) -> Result<()> {
        let z = F::zero();
        if self.alpha < z || self.beta < z || self.gamma < z || self.kappa < z {
            return Err(Error::invalid("cost constants must be non-negative"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("at least one worker is required"));
        }
        if self.total_rows < F::one() || self.row_bytes < z {
            return Err(Error::invalid(
                "need at least one row and non-negative row width",
            ));
        }
        if let Some(card) = self.cardinality {
            if card < F::one() / self.total_rows || card > F::one() {
                return Err(Error::invalid("cardinality must lie in [1/N, 1]"));
            }
        }
        Ok(())
    }

    fn cardinality(&self) -> Result<F> {
        self.cardinality
            .ok_or_else(|| Error::invalid("this cost depends on the cardinality, which is not set"))
    }
}

/// Cost attributed to one named stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCost<F> {
    pub name: String,
    pub seconds: F,
    pub bytes: F,
}

/// Predicted time split by component. `total()` is their exact sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown<F> {
    pub startup: F,
    pub transfer: F,
    pub reduce: F,
    pub compute: F,
    pub predicted_bytes: F,
    pub stages: Vec<StageCost<F>>,
}

impl<F: Float> Default for CostBreakdown<F> {
    fn default() -> Self {
        Self {
            startup: F::zero(),
            transfer: F::zero(),
            reduce: F::zero(),
            compute: F::zero(),
            predicted_bytes: F::zero(),
            stages: Vec::new(),
        }
    }
}

impl<F: Float> CostBreakdown<F> {
    pub fn total(&self) -> F {
        self.startup + self.transfer + self.reduce + self.compute
    }

    /// Communication part: startup + transfer + reduce.
    pub fn communication(&self) -> F {
        self.startup + self.transfer + self.reduce
    }

    pub fn stage(&self, name: &str) -> Option<&StageCost<F>> {
        self.stages.iter().find(|s| s.name == name)
    }

    fn add_comm(&mut self, name: &str, other: CostBreakdown<F>) {
        self.startup = self.startup + other.startup;
        self.transfer = self.transfer + other.transfer;
        self.reduce = self.reduce + other.reduce;
        self.predicted_bytes = self.predicted_bytes + other.predicted_bytes;
        self.stages.push(StageCost {
            name: name.to_string(),
            seconds: other.communication(),
            bytes: other.predicted_bytes,
        });
    }

    fn add_compute(&mut self, name: &str, seconds: F) {
        self.compute = self.compute + seconds;
        self.stages.push(StageCost {
            name: name.to_string(),
            seconds,
            bytes: F::zero(),
        });
    }
}

/// Collective algorithms with known complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    IsendIrecv,
    Ring,
    PairwiseExchange,
    Bruck,
    RecursiveDoubling,
    BinomialTree,
    ScatterAllGather,
    ReduceScatterGather,
    ReduceScatterAllGather,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Every (collective, algorithm) pair the model knows.
pub const COLLECTIVE_ALGORITHMS: [(CollectiveKind, AlgorithmKind); 14] = [
    (CollectiveKind::Shuffle, AlgorithmKind::IsendIrecv),
    (CollectiveKind::Shuffle, AlgorithmKind::Ring),
    (CollectiveKind::Shuffle, AlgorithmKind::PairwiseExchange),
    (CollectiveKind::Shuffle, AlgorithmKind::Bruck),
    (CollectiveKind::AllGather, AlgorithmKind::Ring),
    (CollectiveKind::AllGather, AlgorithmKind::RecursiveDoubling),
    (CollectiveKind::AllGather, AlgorithmKind::Bruck),
    (CollectiveKind::Broadcast, AlgorithmKind::BinomialTree),
    (CollectiveKind::Broadcast, AlgorithmKind::ScatterAllGather),
    (CollectiveKind::Reduce, AlgorithmKind::BinomialTree),
    (CollectiveKind::Reduce, AlgorithmKind::ReduceScatterGather),
    (CollectiveKind::AllReduce, AlgorithmKind::BinomialTree),
    (CollectiveKind::AllReduce, AlgorithmKind::RecursiveDoubling),
    (
        CollectiveKind::AllReduce,
        AlgorithmKind::ReduceScatterAllGather,
    ),
];

/// How a startup term grows with the world size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Linear,
    Logarithmic,
}

pub fn startup_growth(kind: CollectiveKind, algo: AlgorithmKind) -> Result<Growth> {
    check_pair(kind, algo)?;
    Ok(match algo {
        AlgorithmKind::IsendIrecv
        | AlgorithmKind::Ring
        | AlgorithmKind::PairwiseExchange
        | AlgorithmKind::ScatterAllGather => Growth::Linear,
        _ => Growth::Logarithmic,
    })
}

fn check_pair(kind: CollectiveKind, algo: AlgorithmKind) -> Result<()> {
    if COLLECTIVE_ALGORITHMS.contains(&(kind, algo)) {
        return Ok(());
    }
    let valid: Vec<String> = COLLECTIVE_ALGORITHMS
        .iter()
        .filter(|(k, _)| *k == kind)
        .map(|(_, a)| a.to_string())
        .collect();
    Err(Error::invalid(format!(
        "{algo} is not a {} algorithm; valid: [{}]",
        kind.name(),
        valid.join(", ")
    )))
}

/// Hockney point-to-point time `alpha + bytes * beta`.
pub fn p2p_time<F: Float>(msg_bytes: F, params: &CostParams<F>) -> F {
    params.alpha + msg_bytes * params.beta
}

/// Pairwise non-blocking shuffle of each worker's whole payload:
/// `(P-1) alpha + ((P-1)/P) n beta`.
pub fn shuffle_time<F: Float>(params: &CostParams<F>) -> CostBreakdown<F> {
    shuffle_bytes_time(params.payload_bytes(), params)
}

fn shuffle_bytes_time<F: Float>(bytes: F, params: &CostParams<F>) -> CostBreakdown<F> {
    let moved = params.remote_fraction() * bytes;
    CostBreakdown {
        startup: params.peers() * params.alpha,
        transfer: moved * params.beta,
        predicted_bytes: moved,
        ..CostBreakdown::default()
    }
}

/// Evaluates a collective on each worker's payload (`n * row_bytes`).
pub fn collective_time<F: Float>(
    kind: CollectiveKind,
    algo: AlgorithmKind,
    params: &CostParams<F>,
) -> Result<CostBreakdown<F>> {
    collective_time_bytes(kind, algo, params.payload_bytes(), params)
}

/// Evaluates a collective on a per-worker message of `bytes`. For
/// AllGather, `bytes` is each worker's contribution.
pub fn collective_time_bytes<F: Float>(
    kind: CollectiveKind,
    algo: AlgorithmKind,
    bytes: F,
    params: &CostParams<F>,
) -> Result<CostBreakdown<F>> {
    check_pair(kind, algo)?;
    let zero = F::zero();
    if params.workers <= 1 {
        return Ok(CostBreakdown::default());
    }
    let (peers, log, frac) = (params.peers(), params.log_p(), params.remote_fraction());
    use AlgorithmKind as A;
    use CollectiveKind as K;
    // (startup messages, transferred bytes, reduced bytes)
    let (s, t, r) = match (kind, algo) {
        (K::Shuffle, A::IsendIrecv) => (peers, frac * bytes, zero),
        (K::Shuffle, A::Ring) => (peers, peers * bytes, zero),
        (K::Shuffle, A::PairwiseExchange) => (peers, bytes, zero),
        (K::Shuffle, A::Bruck) => (log, log * bytes / c(2.0), zero),
        // each worker ends up with the other (P-1) contributions
        (K::AllGather, _) => (
            if algo == A::Ring { peers } else { log },
            peers * bytes,
            zero,
        ),
        (K::Broadcast, A::BinomialTree) => (log, log * bytes, zero),
        (K::Broadcast, A::ScatterAllGather) => (log + peers, frac * bytes, zero),
        (K::Reduce | K::AllReduce, A::ReduceScatterGather | A::ReduceScatterAllGather) => {
            (log, frac * bytes, frac * bytes)
        }
        (K::Reduce | K::AllReduce, _) => (log, log * bytes, log * bytes),
        _ => unreachable!("pair checked"),
    };
    Ok(CostBreakdown {
        startup: s * params.alpha,
        transfer: t * params.beta,
        reduce: r * params.gamma,
        predicted_bytes: t,
        ..CostBreakdown::default()
    })
}

/// Direct gather at a root: the root receives `P - 1` messages of `bytes`.
pub fn gather_time<F: Float>(bytes: F, params: &CostParams<F>) -> CostBreakdown<F> {
    let moved = params.peers() * bytes;
    CostBreakdown {
        startup: params.peers() * params.alpha,
        transfer: moved * params.beta,
        predicted_bytes: moved,
        ..CostBreakdown::default()
    }
}

/// Local operators with known cost and output size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalOpKind {
    SelectionMap,
    RowAggregation,
    Projection,
    Union,
    SetDifference,
    HashJoin,
    SortJoin,
    Transpose,
    Unique,
    GroupBy,
    ColumnAggregation,
    Sort,
}

impl LocalOpKind {
    pub const ALL: [LocalOpKind; 12] = [
        LocalOpKind::SelectionMap,
        LocalOpKind::RowAggregation,
        LocalOpKind::Projection,
        LocalOpKind::Union,
        LocalOpKind::SetDifference,
        LocalOpKind::HashJoin,
        LocalOpKind::SortJoin,
        LocalOpKind::Transpose,
        LocalOpKind::Unique,
        LocalOpKind::GroupBy,
        LocalOpKind::ColumnAggregation,
        LocalOpKind::Sort,
    ];
}

fn log2_pos<F: Float>(x: F) -> F {
    if x > F::one() {
        x.log2()
    } else {
        F::zero()
    }
}

/// `(compute seconds, output size)` of `op` on each worker's `n` rows.
/// Output size is in rows, except `Projection`/`Transpose` (cells) and
/// `ColumnAggregation` (one value per column).
pub fn local_op_cost<F: Float>(op: LocalOpKind, params: &CostParams<F>) -> Result<(F, F)> {
    local_op_cost_rows(op, params.rows_per_worker(), params)
}

/// As [`local_op_cost`] for `n` rows.
pub fn local_op_cost_rows<F: Float>(
    op: LocalOpKind,
    n: F,
    params: &CostParams<F>,
) -> Result<(F, F)> {
    use LocalOpKind as L;
    let cols: F = c(params.columns as f64);
    let (work, out) = match op {
        L::SelectionMap => (n, n),
        L::RowAggregation => (n * cols, n),
        L::Projection => (cols, n * cols),
        L::Union => (n * cols, n * params.cardinality()?),
        L::SetDifference => (n * cols, n),
        L::HashJoin => {
            let j = n / params.cardinality()?;
            (n + j, j)
        }
        L::SortJoin => {
            let j = n / params.cardinality()?;
            (n * log2_pos(n) + j, j)
        }
        L::Transpose => (n * cols, n * cols),
        L::Unique => (n * cols, n * params.cardinality()?),
        L::GroupBy => (n, n * params.cardinality()?),
        L::ColumnAggregation => (n * cols, cols),
        L::Sort => (n * log2_pos(n), n),
    };
    Ok((params.kappa * work, out))
}

/// Operator patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    EmbarrassinglyParallel,
    ShuffleComputeHash,
    ShuffleComputeRange,
    SampleShuffleCompute,
    CombineShuffleReduce,
    GloballyReduce,
    BroadcastCompute,
    HaloExchange { window: usize },
}

fn valid_cores(pattern: Pattern) -> &'static [LocalOpKind] {
    use LocalOpKind as L;
    match pattern {
        Pattern::EmbarrassinglyParallel => &[L::SelectionMap, L::RowAggregation, L::Projection],
        Pattern::ShuffleComputeHash | Pattern::ShuffleComputeRange => &[
            L::Union,
            L::SetDifference,
            L::HashJoin,
            L::SortJoin,
            L::Unique,
            L::GroupBy,
            L::Sort,
        ],
        Pattern::SampleShuffleCompute => &[L::Sort],
        Pattern::CombineShuffleReduce => &[L::Unique, L::GroupBy],
        Pattern::GloballyReduce => &[L::ColumnAggregation],
        Pattern::BroadcastCompute => &[L::HashJoin, L::SortJoin],
        Pattern::HaloExchange { .. } => &[L::RowAggregation, L::SelectionMap],
    }
}

/// Total per-worker cost of an operator pattern around `core`, with each
/// term attributed to a named stage.
pub fn pattern_cost<F: Float>(
    pattern: Pattern,
    params: &CostParams<F>,
    core: LocalOpKind,
) -> Result<CostBreakdown<F>> {
    params.validate()?;
    if !valid_cores(pattern).contains(&core) {
        return Err(Error::invalid(format!(
            "{core:?} cannot be the core of {pattern:?}"
        )));
    }
    let n = params.rows_per_worker();
    let k = params.kappa;
    let mut b = CostBreakdown::default();
    match pattern {
        Pattern::EmbarrassinglyParallel => b.add_compute("local-op", k * n),
        Pattern::ShuffleComputeHash => {
            b.add_compute("partition", k * n);
            b.add_comm("shuffle", shuffle_time(params));
            b.add_compute("local-op", local_op_cost(core, params)?.0);
        }
        Pattern::ShuffleComputeRange => {
            let range = collective_time_bytes(
                CollectiveKind::AllReduce,
                AlgorithmKind::BinomialTree,
                c(16.0),
                params,
            )?;
            b.add_comm("allreduce-range", range);
            b.add_compute("binning", k * n);
            b.add_comm("shuffle", shuffle_time(params));
            b.add_compute("local-op", local_op_cost(core, params)?.0);
        }
        Pattern::SampleShuffleCompute => {
            let p = params.p();
            b.add_compute("local-sort", local_op_cost(core, params)?.0);
            b.add_compute("sample", k * p);
            b.add_comm("gather-samples", gather_time(p * params.row_bytes, params));
            let m = p * p;
            b.add_compute("calc-pivots", k * m * log2_pos(m));
            let pivots = (p - F::one()) * params.row_bytes;
            b.add_comm(
                "bcast-pivots",
                collective_time_bytes(
                    CollectiveKind::Broadcast,
                    AlgorithmKind::BinomialTree,
                    pivots,
                    params,
                )?,
            );
            b.add_compute("split", k * n);
            b.add_comm("shuffle", shuffle_time(params));
            b.add_compute("local-merge", k * n * params.log_p());
        }
        Pattern::CombineShuffleReduce => {
            let card = params.cardinality()?;
            let reduced = n * card;
            b.add_compute("local-combine", local_op_cost_rows(core, n, params)?.0);
            b.add_compute("partition", k * reduced);
            b.add_comm(
                "shuffle",
                shuffle_bytes_time(reduced * params.row_bytes, params),
            );
            b.add_compute("local-reduce", local_op_cost_rows(core, reduced, params)?.0);
        }
        Pattern::GloballyReduce => {
            let (work, out) = local_op_cost(core, params)?;
            b.add_compute("local-op", work);
            let bytes = out * c(8.0);
            b.add_comm(
                "allreduce",
                collective_time_bytes(
                    CollectiveKind::AllReduce,
                    AlgorithmKind::BinomialTree,
                    bytes,
                    params,
                )?,
            );
            b.add_compute("finalize", k * out);
        }
        Pattern::BroadcastCompute => {
            b.add_comm(
                "broadcast",
                collective_time_bytes(
                    CollectiveKind::Broadcast,
                    AlgorithmKind::BinomialTree,
                    params.payload_bytes(),
                    params,
                )?,
            );
            b.add_compute("local-op", local_op_cost(core, params)?.0);
        }
        Pattern::HaloExchange { window } => {
            if window == 0 {
                return Err(Error::invalid("window must be at least 1"));
            }
            let halo = if params.workers > 1 {
                let bytes = c::<F>(window as f64 - 1.0) * params.row_bytes;
                CostBreakdown {
                    startup: params.alpha,
                    transfer: bytes * params.beta,
                    predicted_bytes: bytes,
                    ..CostBreakdown::default()
                }
            } else {
                CostBreakdown::default()
            };
            b.add_comm("halo-exchange", halo);
            b.add_compute("local-op", local_op_cost(core, params)?.0);
        }
    }
    Ok(b)
}

/// Cardinality at which combine-shuffle-reduce and hash shuffle-compute
/// cost the same, by bisection over `[1/N, 1]`. Below it, combining first
/// is cheaper. Returns 1 if combining never loses and `1/N` if it never
/// wins.
pub fn crossover_cardinality<F: Float>(params: &CostParams<F>, core: LocalOpKind) -> Result<F> {
    let diff = |card: F| -> Result<(F, F)> {
        let p = params.with_cardinality(card);
        let a = pattern_cost(Pattern::CombineShuffleReduce, &p, core)?.total();
        let b = pattern_cost(Pattern::ShuffleComputeHash, &p, core)?.total();
        Ok((a - b, a.max(b)))
    };
    let (mut lo, mut hi) = (F::one() / params.total_rows, F::one());
    if diff(hi)?.0 <= F::zero() {
        return Ok(hi);
    }
    if diff(lo)?.0 >= F::zero() {
        return Ok(lo);
    }
    let tol = c::<F>(1e-6);
    let rel = c::<F>(1e-9);
    loop {
        let mid = (lo + hi) / c(2.0);
        let (d, scale) = diff(mid)?;
        if hi - lo < tol || d.abs() < rel * scale {
            return Ok(mid);
        }
        if d < F::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
