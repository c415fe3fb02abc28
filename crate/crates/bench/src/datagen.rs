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

//! Cardinality-controlled input data: two Int64 columns `k` and `v`.

use ddf_core::columnar::{Column, Table};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BenchConfig, KeyScope};
use crate::BenchError;

/// Values of `v` are drawn from `[0, VALUE_RANGE)`.
pub const VALUE_RANGE: i64 = 1_000_000_000;

/// Number of distinct keys for `rows` rows at cardinality `c`.
pub fn pool_size(rows: usize, c: f64) -> Result<usize, BenchError> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(BenchError::Config(format!("cardinality {c} not in (0, 1]")));
    }
    let m = (rows as f64 * c).ceil();
    if rows as f64 * c < 1.0 {
        return Err(BenchError::Config(format!(
            "rows * cardinality = {} is below one key",
            rows as f64 * c
        )));
    }
    Ok(m as usize)
}

/// `rows` rows whose key column holds exactly `ceil(rows * c)` distinct
/// values `0..m`: each value once, the rest drawn uniformly from the pool,
/// then shuffled. Deterministic per seed.
pub fn generate_table(rows: usize, c: f64, seed: u64) -> Result<Table, BenchError> {
    let m = pool_size(rows, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(build(&mut rng, rows, 0..m as i64, m as i64))
}

fn build(rng: &mut ChaCha8Rng, rows: usize, once: std::ops::Range<i64>, pool: i64) -> Table {
    let mut keys: Vec<i64> = once.take(rows).collect();
    while keys.len() < rows {
        keys.push(rng.random_range(0..pool));
    }
    keys.shuffle(rng);
    let values: Vec<i64> = (0..rows)
        .map(|_| rng.random_range(0..VALUE_RANGE))
        .collect();
    Table::from_columns(vec![
        ("k", Column::from_i64(keys)),
        ("v", Column::from_i64(values)),
    ])
    .expect("two equal columns")
}

fn mix(seed: u64, rank: usize, stream: u64) -> u64 {
    // splitmix64 over the triple, so nearby seeds give unrelated streams
    let mut z = seed
        ^ (rank as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ stream.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The partition of input table `stream` held by `rank`.
pub fn generate_partition(
    cfg: &BenchConfig,
    rank: usize,
    stream: u64,
) -> Result<Table, BenchError> {
    let n = cfg.rows_on(rank);
    let seed = mix(cfg.seed, rank, stream);
    match cfg.key_scope {
        KeyScope::PerWorker => generate_table(n, cfg.cardinality, seed),
        KeyScope::Global => {
            let m = pool_size(cfg.rows, cfg.cardinality)? as i64;
            let p = cfg.workers as i64;
            let r = rank as i64;
            let slice = (r * m / p)..((r + 1) * m / p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(build(&mut rng, n, slice, m))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn distinct(t: &Table) -> usize {
        t.column(0)
            .i64_values()
            .unwrap()
            .iter()
            .collect::<HashSet<_>>()
            .len()
    }

    #[test]
    fn pool_of_ninety() {
        let t = generate_table(100, 0.9, 3).unwrap();
        assert_eq!(distinct(&t), 90);
        assert!(t
            .column(0)
            .i64_values()
            .unwrap()
            .iter()
            .all(|&k| (0..90).contains(&k)));
    }

    #[test]
    fn full_cardinality_is_a_permutation() {
        let t = generate_table(50, 1.0, 3).unwrap();
        assert_eq!(distinct(&t), 50);
    }

    #[test]
    fn too_few_keys() {
        assert!(generate_table(10, 0.01, 1).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            generate_table(500, 0.3, 9).unwrap(),
            generate_table(500, 0.3, 9).unwrap()
        );
        assert_ne!(
            generate_table(500, 0.3, 9).unwrap(),
            generate_table(500, 0.3, 10).unwrap()
        );
    }

    #[test]
    fn global_scope_covers_pool() {
        let cfg = BenchConfig {
            rows: 1000,
            workers: 4,
            cardinality: 0.5,
            ..BenchConfig::default()
        };
        let mut all = HashSet::new();
        for r in 0..4 {
            let t = generate_partition(&cfg, r, 0).unwrap();
            assert_eq!(t.num_rows(), 250);
            all.extend(t.column(0).i64_values().unwrap().iter().copied());
        }
        assert_eq!(all.len(), 500);
    }
}
