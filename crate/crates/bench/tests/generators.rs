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

//! Properties of the synthetic data generator and the network fit.

use std::collections::HashSet;

use ddf_bench::calibrate::{fit_alpha_beta, Sample};
use ddf_bench::datagen::{generate_partition, generate_table, pool_size};
use ddf_bench::{BenchConfig, KeyScope};
use proptest::prelude::*;

fn keys(t: &ddf_core::Table) -> Vec<i64> {
    t.column(0).i64_values().unwrap().to_vec()
}

proptest! {
    #[test]
    fn key_pool_is_exact(rows in 1usize..2000, c in 0.001f64..=1.0, seed in any::<u64>()) {
        prop_assume!(rows as f64 * c >= 1.0);
        let m = pool_size(rows, c).unwrap();
        let t = generate_table(rows, c, seed).unwrap();
        prop_assert_eq!(t.num_rows(), rows);
        let k = keys(&t);
        let distinct: HashSet<i64> = k.iter().copied().collect();
        prop_assert_eq!(distinct.len(), m);
        prop_assert!(k.iter().all(|&x| (0..m as i64).contains(&x)));
        prop_assert_eq!(&generate_table(rows, c, seed).unwrap(), &t);
    }

    #[test]
    fn global_scope_partitions_cover_the_pool(workers in 1usize..6, per in 1usize..200, c in 0.05f64..=1.0, seed in any::<u64>()) {
        let cfg = BenchConfig {
            rows: workers * per,
            workers,
            cardinality: c,
            seed,
            key_scope: KeyScope::Global,
            ..BenchConfig::default()
        };
        prop_assume!(cfg.validate().is_ok());
        let m = pool_size(cfg.rows, c).unwrap();
        let mut all = HashSet::new();
        let mut rows = 0;
        for r in 0..workers {
            let t = generate_partition(&cfg, r, 0).unwrap();
            rows += t.num_rows();
            all.extend(keys(&t));
        }
        prop_assert_eq!(rows, cfg.rows);
        prop_assert_eq!(all.len(), m);
    }

    #[test]
    fn exact_linear_timings_are_recovered(alpha in 1e-7f64..1e-3, beta in 1e-11f64..1e-7) {
        let samples: Vec<Sample> = [0usize, 64, 4096, 1 << 20]
            .iter()
            .map(|&b| Sample { bytes: b as f64, seconds: alpha + beta * b as f64 })
            .collect();
        let fit = fit_alpha_beta(&samples).unwrap();
        prop_assert!((fit.alpha - alpha).abs() <= 1e-6 * alpha);
        prop_assert!((fit.beta - beta).abs() <= 1e-6 * beta);
    }
}
