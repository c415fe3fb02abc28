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

//! Property tests for serialization, partitioning and ordering.

use std::collections::HashMap;

use ddf_core::columnar::{deserialize_table, serialize_table, SerializedTable};
use ddf_core::comm::{run_cluster, TransportKind};
use ddf_core::partition::{
    assign_by_range, hash_partition, pivots_from_samples, rebalance, split, RangeBounds,
};
use ddf_core::{canonical_sort, Column, Table};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = Table> {
    (0usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::option::weighted(0.8, -5i64..5), n),
            prop::collection::vec(prop::option::weighted(0.8, any::<f64>()), n),
            prop::collection::vec(prop::option::weighted(0.8, "[a-c,\"\n]{0,4}"), n),
        )
            .prop_map(|(k, f, s)| {
                Table::from_columns(vec![
                    ("k", Column::from_opt_i64(k)),
                    ("f", Column::from_opt_f64(f)),
                    ("s", Column::from_opt_strs(s.iter().map(|x| x.as_deref()))),
                ])
                .unwrap()
            })
    })
}

fn key_bytes(t: &Table, i: usize) -> Vec<u8> {
    let mut out = Vec::new();
    t.encode_key(i, &[0], &mut out);
    out
}

proptest! {
    #[test]
    fn serialization_round_trips(t in table_strategy()) {
        let frames = serialize_table(&t).into_frames();
        let back = deserialize_table(SerializedTable::from_frames(frames.clone()).unwrap()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(serialize_table(&back).into_frames(), frames);
    }

    #[test]
    fn corrupt_frames_never_panic(t in table_strategy(), at in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut frames = serialize_table(&t).into_frames();
        let f = at.index(frames.len());
        if !frames[f].is_empty() {
            let i = at.index(frames[f].len());
            frames[f][i] = byte;
        }
        let _ = SerializedTable::from_frames(frames).and_then(deserialize_table);
    }

    #[test]
    fn hash_partition_colocates_and_split_preserves(t in table_strategy(), parts in 1usize..6) {
        let a = hash_partition(&t, &[0], parts).unwrap();
        let mut home: HashMap<Vec<u8>, usize> = HashMap::new();
        for i in 0..t.num_rows() {
            let d = a.dest()[i];
            prop_assert!(d < parts);
            prop_assert_eq!(*home.entry(key_bytes(&t, i)).or_insert(d), d);
        }
        let pieces = split(&t, &a).unwrap();
        prop_assert_eq!(pieces.len(), parts);
        for (d, piece) in pieces.iter().enumerate() {
            let want: Vec<usize> = (0..t.num_rows()).filter(|&i| a.dest()[i] == d).collect();
            prop_assert_eq!(piece, &t.take_rows(&want).unwrap());
        }
    }

    #[test]
    fn canonical_sort_ignores_input_order(t in table_strategy(), seed in any::<u64>()) {
        let n = t.num_rows();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(canonical_sort(&t.take_rows(&idx).unwrap()), canonical_sort(&t));
    }

    #[test]
    fn range_assignment_is_monotone(mut keys in prop::collection::vec(-50i64..50, 0..80), samples in prop::collection::vec(-50i64..50, 1..30), parts in 1usize..6) {
        keys.sort();
        let bounds: RangeBounds<i64> = pivots_from_samples(samples, parts);
        prop_assert_eq!(bounds.pivots.len(), parts - 1);
        prop_assert!(bounds.pivots.windows(2).all(|w| w[0] <= w[1]));
        let a = assign_by_range(&Column::from_i64(keys.clone()), &bounds).unwrap();
        prop_assert!(a.dest().windows(2).all(|w| w[0] <= w[1]));
        for (i, k) in keys.iter().enumerate() {
            prop_assert_eq!(a.dest()[i], bounds.rank_of(Some(k)));
        }
    }

    #[test]
    fn rebalance_evens_out_and_keeps_order(sizes in prop::collection::vec(0usize..30, 1..5)) {
        let p = sizes.len();
        let mut start = 0i64;
        let inputs: Vec<Table> = sizes.iter().map(|&n| {
            let t = Table::from_columns(vec![("x", Column::from_i64((start..start + n as i64).collect()))]).unwrap();
            start += n as i64;
            t
        }).collect();
        let out = run_cluster(TransportKind::Local, p, |ctx| rebalance(ctx, &inputs[ctx.rank()]).unwrap()).unwrap();
        let total: usize = sizes.iter().sum();
        let mut all = Vec::new();
        for t in &out {
            prop_assert!(t.num_rows() == total / p || t.num_rows() == total.div_ceil(p));
            all.extend_from_slice(t.column(0).i64_values().unwrap());
        }
        prop_assert_eq!(all, (0..total as i64).collect::<Vec<_>>());
    }
}
