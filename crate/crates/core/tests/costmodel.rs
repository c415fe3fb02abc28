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

//! Cost-model examples with hand-computed values.

use ddf_core::costmodel::{
    collective_time, crossover_cardinality, local_op_cost, pattern_cost, shuffle_time,
    AlgorithmKind, CostParams, LocalOpKind, Pattern,
};
use ddf_core::{CollectiveKind, CostParams32, CostParams64};

fn base(p: usize) -> CostParams64 {
    CostParams::new(1e-6, 1e-9, 1e-8, p, 1e6, 16.0)
}

#[test]
fn embarrassingly_parallel_is_kappa_n() {
    let b = pattern_cost(
        Pattern::EmbarrassinglyParallel,
        &base(4),
        LocalOpKind::SelectionMap,
    )
    .unwrap();
    assert_eq!(b.communication(), 0.0);
    assert!((b.total() - 1e-8 * 250_000.0).abs() < 1e-15);
}

#[test]
fn shuffle_compute_stages_sum_to_total() {
    let p = base(8).with_cardinality(0.5);
    let b = pattern_cost(Pattern::ShuffleComputeHash, &p, LocalOpKind::HashJoin).unwrap();
    let names: Vec<&str> = b.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["partition", "shuffle", "local-op"]);
    let sum: f64 = b.stages.iter().map(|s| s.seconds).sum();
    assert!((sum - b.total()).abs() <= 1e-12 * b.total());
    assert_eq!(
        b.stage("shuffle").unwrap().seconds,
        shuffle_time(&p).total()
    );
}

#[test]
fn binomial_broadcast_is_logarithmic() {
    let b = collective_time(
        CollectiveKind::Broadcast,
        AlgorithmKind::BinomialTree,
        &base(8),
    )
    .unwrap();
    assert!((b.startup - 3e-6).abs() < 1e-18);
}

#[test]
fn free_compute_makes_combining_always_win() {
    let p = CostParams::new(1e-6, 1e-9, 0.0, 4, 1e6, 16.0);
    assert_eq!(
        crossover_cardinality(&p, LocalOpKind::GroupBy).unwrap(),
        1.0
    );
}

#[test]
fn hash_join_output_grows_as_cardinality_drops() {
    let (_, hi) = local_op_cost(LocalOpKind::HashJoin, &base(4).with_cardinality(1.0)).unwrap();
    let (_, lo) = local_op_cost(LocalOpKind::HashJoin, &base(4).with_cardinality(0.25)).unwrap();
    assert_eq!(lo, 4.0 * hi);
}

#[test]
fn single_precision_params_work() {
    let p: CostParams32 = CostParams::new(1e-6, 1e-9, 1e-8, 4, 1e6, 16.0);
    assert!(shuffle_time(&p).total() > 0.0);
}

#[test]
fn invalid_params_are_rejected() {
    let p = CostParams {
        alpha: -1.0,
        ..base(2)
    };
    assert!(p.validate().is_err());
    assert!(base(0).validate().is_err());
    assert!(base(2).with_cardinality(2.0).validate().is_err());
}
