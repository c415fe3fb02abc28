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

//! Collectives on both transports.

use ddf_core::comm::{run_cluster, CollectiveKind, ReduceOp, TransportKind};
use ddf_core::{Column, Table};

const KINDS: [TransportKind; 2] = [TransportKind::Local, TransportKind::Tcp];

fn ints(v: Vec<i64>) -> Table {
    Table::from_columns(vec![("x", Column::from_i64(v))]).unwrap()
}

#[test]
fn allreduce_ops() {
    for kind in KINDS {
        for p in [1, 2, 3, 5] {
            let out = run_cluster(kind, p, |ctx| {
                let r = ctx.rank() as i64;
                let s = ctx.allreduce(&[r, -r], ReduceOp::Sum).unwrap();
                let mn = ctx.allreduce(&[r as f64 + 0.5], ReduceOp::Min).unwrap();
                let mx = ctx.allreduce(&[r as u64], ReduceOp::Max).unwrap();
                let c = ctx.allreduce(&[1i64], ReduceOp::Count).unwrap();
                (s, mn, mx, c)
            })
            .unwrap();
            let total: i64 = (0..p as i64).sum();
            for (s, mn, mx, c) in out {
                assert_eq!(s, vec![total, -total]);
                assert_eq!(mn, vec![0.5]);
                assert_eq!(mx, vec![p as u64 - 1]);
                assert_eq!(c, vec![p as i64]);
            }
        }
    }
}

#[test]
fn gather_allgather_broadcast() {
    for kind in KINDS {
        let p = 4;
        let out = run_cluster(kind, p, |ctx| {
            let r = ctx.rank() as i64;
            let mine = ints((0..r).map(|i| r * 10 + i).collect());
            let g = ctx.gather_table(&mine, p - 1).unwrap();
            let a = ctx.allgather_table(&mine).unwrap();
            let b = ctx
                .broadcast_table((ctx.rank() == 2).then(|| ints(vec![7, 8])).as_ref(), 2)
                .unwrap();
            ctx.barrier().unwrap();
            (g, a, b)
        })
        .unwrap();
        let want = ints(vec![10, 20, 21, 30, 31, 32]);
        for (rank, (g, a, b)) in out.into_iter().enumerate() {
            assert_eq!(g.is_some(), rank == p - 1);
            if let Some(g) = g {
                assert_eq!(g, want);
            }
            assert_eq!(a, want);
            assert_eq!(b, ints(vec![7, 8]));
        }
    }
}

#[test]
fn ring_send_recv_and_counters() {
    for kind in KINDS {
        let p = 3;
        let out = run_cluster(kind, p, |ctx| {
            let (r, n) = (ctx.rank(), ctx.world_size());
            ctx.reset_counters();
            ctx.send_table((r + 1) % n, &ints(vec![r as i64])).unwrap();
            let got = ctx.recv_table((r + n - 1) % n).unwrap();
            let c = ctx.bytes_sent();
            (
                got,
                c.bytes(CollectiveKind::SendRecv),
                c.bytes(CollectiveKind::Shuffle),
            )
        })
        .unwrap();
        for (r, (t, sr, sh)) in out.into_iter().enumerate() {
            assert_eq!(t, ints(vec![((r + p - 1) % p) as i64]));
            assert!(sr > 0);
            assert_eq!(sh, 0);
        }
    }
}

#[test]
fn shuffle_counts_only_remote_bytes() {
    for kind in KINDS {
        let out = run_cluster(kind, 2, |ctx| {
            let t = ints(vec![1, 2, 3, 4]);
            let me = ctx.rank();
            ctx.shuffle_table(&t, &[me; 4]).unwrap();
            ctx.bytes_sent().bytes(CollectiveKind::Shuffle)
        })
        .unwrap();
        assert_eq!(out, vec![0, 0]);
    }
}

#[test]
fn single_rank_world_sends_nothing() {
    let out = run_cluster(TransportKind::Local, 1, |ctx| {
        let t = ints(vec![1, 2]);
        ctx.allgather_table(&t).unwrap();
        ctx.shuffle_table(&t, &[0, 0]).unwrap();
        ctx.allreduce(&[1i64], ReduceOp::Sum).unwrap();
        ctx.bytes_sent().total_bytes()
    })
    .unwrap();
    assert_eq!(out, vec![0]);
}

#[test]
fn empty_world_is_rejected() {
    assert!(run_cluster(TransportKind::Local, 0, |_| ()).is_err());
}
