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

//! Worked operator examples on small hand-checked tables.

use ddf_core::comm::{run_cluster, TransportKind, WorkerContext};
use ddf_core::ops::{
    self, stage_names, AggFn, AggSpec, GroupByStrategy, JoinAlgorithm, JoinKind, SortStrategy,
};
use ddf_core::{canonical_sort, concat_tables, Column, Error, Table, Value};

fn ints(cols: &[(&str, Vec<Option<i64>>)]) -> Table {
    Table::from_columns(
        cols.iter()
            .map(|(n, v)| (*n, Column::from_opt_i64(v.clone())))
            .collect(),
    )
    .unwrap()
}

fn slice(t: &Table, rank: usize, p: usize) -> Table {
    let n = t.num_rows();
    t.take_rows(&(rank * n / p..(rank + 1) * n / p).collect::<Vec<_>>())
        .unwrap()
}

/// Runs `f` on `p` local workers over row slices of `inputs` and
/// concatenates the outputs in rank order.
fn distributed(
    p: usize,
    inputs: &[&Table],
    f: impl Fn(&mut WorkerContext, &[Table]) -> Table + Sync,
) -> Table {
    let outs = run_cluster(TransportKind::Local, p, |ctx| {
        let mine: Vec<Table> = inputs.iter().map(|t| slice(t, ctx.rank(), p)).collect();
        f(ctx, &mine)
    })
    .unwrap();
    concat_tables(outs[0].schema(), &outs).unwrap()
}

#[test]
fn join_kinds_with_null_keys() {
    let l = ints(&[
        ("k", vec![Some(1), Some(2), Some(2), None]),
        ("a", vec![Some(10), Some(20), Some(21), Some(40)]),
    ]);
    let r = ints(&[
        ("k", vec![Some(2), Some(3), None]),
        ("b", vec![Some(200), Some(300), Some(400)]),
    ]);
    let cases = [
        (
            JoinKind::Inner,
            vec![
                [Some(2), Some(20), Some(200)],
                [Some(2), Some(21), Some(200)],
                [None, Some(40), Some(400)],
            ],
        ),
        (
            JoinKind::LeftOuter,
            vec![
                [Some(1), Some(10), None],
                [Some(2), Some(20), Some(200)],
                [Some(2), Some(21), Some(200)],
                [None, Some(40), Some(400)],
            ],
        ),
        (
            JoinKind::RightOuter,
            vec![
                [Some(2), Some(20), Some(200)],
                [Some(2), Some(21), Some(200)],
                [Some(3), None, Some(300)],
                [None, Some(40), Some(400)],
            ],
        ),
    ];
    for (kind, rows) in cases {
        let want = ints(&[
            ("k", rows.iter().map(|r| r[0]).collect()),
            ("a", rows.iter().map(|r| r[1]).collect()),
            ("b", rows.iter().map(|r| r[2]).collect()),
        ]);
        for alg in JoinAlgorithm::ALL {
            for p in [1, 2, 3] {
                let got = distributed(p, &[&l, &r], |ctx, t| {
                    ops::join(ctx, &t[0], &t[1], &["k"], &["k"], kind, alg).unwrap()
                });
                assert_eq!(
                    canonical_sort(&got),
                    canonical_sort(&want),
                    "{kind:?} {alg:?} P={p}"
                );
            }
        }
    }
}

#[test]
fn groupby_strategies_agree() {
    let t = ints(&[
        ("k", vec![Some(1), Some(2), Some(1), None, Some(2), Some(1)]),
        ("v", vec![Some(5), None, Some(7), Some(1), None, Some(-2)]),
    ]);
    let aggs = AggSpec::new()
        .with("v", AggFn::Sum)
        .with("v", AggFn::Count)
        .with("v", AggFn::Max)
        .with("v", AggFn::Mean);
    for strategy in [
        GroupByStrategy::ShuffleCompute,
        GroupByStrategy::CombineShuffleReduce,
    ] {
        let got = canonical_sort(&distributed(3, &[&t], |ctx, t| {
            ops::groupby(ctx, &t[0], &["k"], &aggs, strategy).unwrap()
        }));
        let names: Vec<&str> = got
            .schema()
            .fields()
            .iter()
            .map(|f| f.name.as_str())
            .collect();
        assert_eq!(names, ["k", "v_sum", "v_count", "v_max", "v_mean"]);
        assert_eq!(
            got.column(0),
            &Column::from_opt_i64([None, Some(1), Some(2)])
        );
        assert_eq!(got.column(1).i64_values().unwrap(), &[1, 10, 0]);
        assert_eq!(got.column(2).i64_values().unwrap(), &[1, 3, 0]);
        assert_eq!(
            got.column(3),
            &Column::from_opt_i64([Some(1), Some(7), None])
        );
        assert_eq!(
            got.column(4),
            &Column::from_opt_f64([Some(1.0), Some(10.0 / 3.0), None])
        );
    }
}

#[test]
fn sort_strategies_produce_global_order() {
    let keys: Vec<Option<i64>> = (0..60)
        .map(|i| {
            if i % 13 == 0 {
                None
            } else {
                Some((i * 37) % 23)
            }
        })
        .collect();
    let t = ints(&[("k", keys.clone())]);
    let mut want = keys;
    want.sort();
    for strategy in [SortStrategy::SampleSort, SortStrategy::HistogramRange] {
        for p in [1, 2, 4] {
            let got = distributed(p, &[&t], |ctx, t| {
                ops::sort(ctx, &t[0], "k", strategy).unwrap()
            });
            assert_eq!(
                got.column(0),
                &Column::from_opt_i64(want.clone()),
                "{strategy:?} P={p}"
            );
        }
    }
}

#[test]
fn rolling_window_crosses_ranks() {
    let t = ints(&[("v", (1..=6).map(Some).collect())]);
    for p in [1, 2, 3, 6] {
        let got = distributed(p, &[&t], |ctx, t| {
            ops::rolling_window(ctx, &t[0], "v", 3).unwrap()
        });
        assert_eq!(
            got.column(1),
            &Column::from_opt_i64([None, None, Some(6), Some(9), Some(12), Some(15)]),
            "P={p}"
        );
    }
}

#[test]
fn column_aggregate_is_replicated() {
    let t = ints(&[("v", vec![Some(4), None, Some(-1), Some(9)])]);
    let outs = run_cluster(TransportKind::Local, 3, |ctx| {
        let aggs = AggSpec::new()
            .with("v", AggFn::Sum)
            .with("v", AggFn::Min)
            .with("v", AggFn::Mean);
        ops::column_aggregate(ctx, &slice(&t, ctx.rank(), 3), &aggs).unwrap()
    })
    .unwrap();
    for o in outs {
        assert_eq!(
            o.row(0),
            vec![Value::Int64(12), Value::Int64(-1), Value::Float64(4.0)]
        );
    }
}

#[test]
fn set_operations() {
    let a = ints(&[("x", vec![Some(1), Some(2), Some(2), None, Some(5)])]);
    let b = ints(&[("x", vec![Some(2), Some(3), None])]);
    let u = distributed(2, &[&a, &b], |ctx, t| {
        ops::union_distinct(ctx, &t[0], &t[1]).unwrap()
    });
    assert_eq!(
        canonical_sort(&u),
        ints(&[("x", vec![None, Some(1), Some(2), Some(3), Some(5)])])
    );
    let d = distributed(2, &[&a, &b], |ctx, t| {
        ops::difference(ctx, &t[0], &t[1]).unwrap()
    });
    assert_eq!(canonical_sort(&d), ints(&[("x", vec![Some(1), Some(5)])]));
}

#[test]
fn stage_names_follow_the_documented_sequences() {
    let t = ints(&[
        ("k", (0..40).map(|i| Some(i % 7)).collect()),
        ("v", (0..40).map(Some).collect()),
    ]);
    let names = run_cluster(TransportKind::Local, 2, |ctx| {
        let mine = slice(&t, ctx.rank(), 2);
        let mut seen = Vec::new();
        let mut record = |ctx: &mut WorkerContext, f: &dyn Fn(&mut WorkerContext)| {
            ctx.record_stages();
            f(ctx);
            seen.push(
                ctx.take_stages()
                    .into_iter()
                    .map(|s| s.name)
                    .collect::<Vec<_>>(),
            );
        };
        let sum = AggSpec::new().with("v", AggFn::Sum);
        record(ctx, &|c| {
            drop(
                ops::join(
                    c,
                    &mine,
                    &mine,
                    &["k"],
                    &["k"],
                    JoinKind::Inner,
                    JoinAlgorithm::HashShuffle,
                )
                .unwrap(),
            )
        });
        record(ctx, &|c| {
            drop(
                ops::join(
                    c,
                    &mine,
                    &mine,
                    &["k"],
                    &["k"],
                    JoinKind::Inner,
                    JoinAlgorithm::Broadcast,
                )
                .unwrap(),
            )
        });
        record(ctx, &|c| {
            drop(
                ops::groupby(
                    c,
                    &mine,
                    &["k"],
                    &sum,
                    GroupByStrategy::CombineShuffleReduce,
                )
                .unwrap(),
            )
        });
        record(ctx, &|c| {
            drop(ops::groupby(c, &mine, &["k"], &sum, GroupByStrategy::ShuffleCompute).unwrap())
        });
        record(ctx, &|c| drop(ops::unique(c, &mine, &["k"]).unwrap()));
        record(ctx, &|c| {
            drop(ops::union_distinct(c, &mine, &mine).unwrap())
        });
        record(ctx, &|c| drop(ops::difference(c, &mine, &mine).unwrap()));
        record(ctx, &|c| {
            drop(ops::sort(c, &mine, "k", SortStrategy::SampleSort).unwrap())
        });
        record(ctx, &|c| {
            drop(ops::sort(c, &mine, "k", SortStrategy::HistogramRange).unwrap())
        });
        record(ctx, &|c| {
            drop(ops::column_aggregate(c, &mine, &sum).unwrap())
        });
        record(ctx, &|c| {
            drop(ops::rolling_window(c, &mine, "v", 3).unwrap())
        });
        seen
    })
    .unwrap();
    let want: [&[&str]; 11] = [
        &stage_names::SHUFFLE_JOIN,
        &stage_names::BROADCAST_JOIN,
        &stage_names::GROUPBY_COMBINE,
        &stage_names::GROUPBY_SHUFFLE,
        &stage_names::UNIQUE,
        &stage_names::UNION,
        &stage_names::DIFFERENCE,
        &stage_names::SAMPLE_SORT,
        &stage_names::HISTOGRAM_SORT,
        &stage_names::AGGREGATE,
        &stage_names::WINDOW,
    ];
    for rank in names {
        for (got, want) in rank.iter().zip(want) {
            assert_eq!(got, want);
        }
    }
}

#[test]
fn missing_csv_part_fails_on_every_rank() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("a.csv");
    std::fs::write(&good, "x\n1\n2\n").unwrap();
    let bad = dir.path().join("missing.csv");
    let paths = [good, bad];
    let errs = run_cluster(TransportKind::Local, 2, |ctx| {
        ops::read_csv_partitioned(ctx, &paths).unwrap_err()
    })
    .unwrap();
    assert!(
        matches!(errs[0], Error::Collective { rank: 0, .. }),
        "{:?}",
        errs[0]
    );
    assert!(
        matches!(errs[1], Error::Csv { rank: 1, .. }),
        "{:?}",
        errs[1]
    );
}

#[test]
fn partitioned_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = Table::from_columns(vec![
        ("n", Column::from_opt_i64([Some(1), None, Some(3)])),
        (
            "s",
            Column::from_opt_strs([Some("a,\"b\""), Some(""), None]),
        ),
        ("f", Column::from_opt_f64([Some(-0.5), Some(1e300), None])),
    ])
    .unwrap();
    let outs = run_cluster(TransportKind::Local, 2, |ctx| {
        let p = ops::write_csv_partitioned(ctx, &slice(&t, ctx.rank(), 2), dir.path()).unwrap();
        ctx.barrier().unwrap();
        let paths = [
            dir.path().join("part-00000.csv"),
            dir.path().join("part-00001.csv"),
        ];
        (p, ops::read_csv_partitioned(ctx, &paths).unwrap())
    })
    .unwrap();
    assert!(outs[1].0.ends_with("part-00001.csv"));
    let tables: Vec<Table> = outs.into_iter().map(|o| o.1).collect();
    assert_eq!(
        canonical_sort(&concat_tables(tables[0].schema(), &tables).unwrap()),
        canonical_sort(&t)
    );
}

#[test]
fn sort_without_non_null_keys() {
    let empty = ints(&[("k", vec![])]);
    let nulls = ints(&[("k", vec![None; 5])]);
    for strategy in [SortStrategy::SampleSort, SortStrategy::HistogramRange] {
        for t in [&empty, &nulls] {
            let got = distributed(3, &[t], |ctx, t| {
                ops::sort(ctx, &t[0], "k", strategy).unwrap()
            });
            assert_eq!(&got, t, "{strategy:?}");
        }
    }
}
