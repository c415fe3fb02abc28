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

//! Launching a world of workers inside one process, for tests and the
//! benchmark harness.

use std::net::TcpListener;
use std::str::FromStr;
use std::time::Duration;

use super::context::WorkerContext;
use super::tcp::{TcpConfig, TcpTransport};
use super::transport::{LocalTransport, Transport, DEFAULT_TIMEOUT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransportKind {
    /// Threads exchanging frames over in-process queues.
    Local,
    /// Loopback TCP connections between threads of this process.
    Tcp,
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(TransportKind::Local),
            "tcp" | "socket" => Ok(TransportKind::Tcp),
            other => Err(Error::invalid(format!("unknown transport '{other}'"))),
        }
    }
}

/// Runs `f` on `world` workers and returns their results in rank order.
/// A panic on any worker is re-raised here.
pub fn run_cluster<R, F>(kind: TransportKind, world: usize, f: F) -> Result<Vec<R>>
where
    F: Fn(&mut WorkerContext) -> R + Sync,
    R: Send,
{
    run_cluster_with_timeout(kind, world, DEFAULT_TIMEOUT, f)
}

pub fn run_cluster_with_timeout<R, F>(
    kind: TransportKind,
    world: usize,
    timeout: Duration,
    f: F,
) -> Result<Vec<R>>
where
    F: Fn(&mut WorkerContext) -> R + Sync,
    R: Send,
{
    if world == 0 {
        return Err(Error::invalid("world size must be at least 1"));
    }
    match kind {
        TransportKind::Local => {
            let endpoints = LocalTransport::world_with_timeout(world, timeout);
            run_endpoints(endpoints.into_iter().map(|t| move || Ok(t)).collect(), &f)
        }
        TransportKind::Tcp => {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let coord = listener.local_addr()?.to_string();
            let mut listener = Some(listener);
            let makers: Vec<_> = (0..world)
                .map(|rank| {
                    let mut cfg = TcpConfig::new(coord.clone(), rank, world);
                    cfg.timeout = timeout;
                    let l = if rank == 0 { listener.take() } else { None };
                    move || match l {
                        Some(l) => TcpTransport::coordinator(l, &cfg),
                        None => TcpTransport::connect(&cfg),
                    }
                })
                .collect();
            run_endpoints(makers, &f)
        }
    }
}

fn run_endpoints<T, M, R, F>(makers: Vec<M>, f: &F) -> Result<Vec<R>>
where
    T: Transport + 'static,
    M: FnOnce() -> Result<T> + Send,
    F: Fn(&mut WorkerContext) -> R + Sync,
    R: Send,
{
    std::thread::scope(|s| {
        let handles: Vec<_> = makers
            .into_iter()
            .map(|make| {
                s.spawn(move || {
                    let mut ctx = WorkerContext::new(Box::new(make()?));
                    Ok(f(&mut ctx))
                })
            })
            .collect();
        let mut out = Vec::with_capacity(handles.len());
        let mut first_err = None;
        for h in handles {
            match h.join() {
                Ok(Ok(r)) => out.push(r),
                Ok(Err(e)) => {
                    first_err.get_or_insert(e);
                }
                Err(panic) => std::panic::resume_unwind(panic),
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    })
}
