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

use std::fmt;
use std::time::{Duration, Instant};

use super::frame::{Frame, MAX_BUFFER_INDEX};
use super::transport::Transport;
use crate::columnar::{concat_tables, deserialize_table, serialize_table, SerializedTable, Table};
use crate::error::{Error, Phase, Result};
use crate::scalar::{decode_elements, encode_elements, Element};

/// Communication routines a dataframe operator may issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectiveKind {
    SendRecv,
    Shuffle,
    Scatter,
    Gather,
    AllGather,
    Broadcast,
    Reduce,
    AllReduce,
    Barrier,
}

impl CollectiveKind {
    pub const ALL: [CollectiveKind; 9] = [
        CollectiveKind::SendRecv,
        CollectiveKind::Shuffle,
        CollectiveKind::Scatter,
        CollectiveKind::Gather,
        CollectiveKind::AllGather,
        CollectiveKind::Broadcast,
        CollectiveKind::Reduce,
        CollectiveKind::AllReduce,
        CollectiveKind::Barrier,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CollectiveKind::SendRecv => "send-recv",
            CollectiveKind::Shuffle => "shuffle",
            CollectiveKind::Scatter => "scatter",
            CollectiveKind::Gather => "gather",
            CollectiveKind::AllGather => "allgather",
            CollectiveKind::Broadcast => "broadcast",
            CollectiveKind::Reduce => "reduce",
            CollectiveKind::AllReduce => "allreduce",
            CollectiveKind::Barrier => "barrier",
        }
    }
}

impl fmt::Display for CollectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Elementwise reduction. `Count` adds per-rank counts, like `Sum`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReduceOp {
    Sum,
    Min,
    Max,
    Count,
}

impl ReduceOp {
    pub fn combine<T: Element>(self, a: T, b: T) -> T {
        match self {
            ReduceOp::Sum | ReduceOp::Count => a + b,
            ReduceOp::Min => {
                if b < a {
                    b
                } else {
                    a
                }
            }
            ReduceOp::Max => {
                if b > a {
                    b
                } else {
                    a
                }
            }
        }
    }
}

/// Payload bytes (framing excluded) and message counts sent to remote ranks,
/// per collective kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteCounters {
    bytes: [u64; 9],
    messages: [u64; 9],
}

impl ByteCounters {
    pub fn bytes(&self, kind: CollectiveKind) -> u64 {
        self.bytes[kind.index()]
    }

    pub fn messages(&self, kind: CollectiveKind) -> u64 {
        self.messages[kind.index()]
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes.iter().sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.messages.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.total_bytes() == 0 && self.total_messages() == 0
    }
}

/// One buffer addressed to `dest` in a channel exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferRequest {
    pub buffer: Vec<u8>,
    pub index: usize,
    pub dest: usize,
}

impl BufferRequest {
    pub fn new(dest: usize, index: usize, buffer: Vec<u8>) -> Self {
        Self {
            buffer,
            index,
            dest,
        }
    }

    pub fn size(&self) -> usize {
        self.buffer.len()
    }
}

/// Wall time and payload bytes of one named operator stage on one rank.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub name: String,
    pub wall: Duration,
    /// CPU time consumed by the calling thread during the stage. Differs
    /// from `wall` when workers share cores or wait on peers.
    pub cpu: Duration,
    pub bytes: u64,
}

/// CPU time of the calling thread.
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Buffers, or an error raised by some rank that every participant must see.
type Envelope = std::result::Result<Vec<Vec<u8>>, String>;

/// A worker's identity in the world plus its transport endpoint.
///
/// Every collective must be called by all ranks in the same order.
pub struct WorkerContext {
    rank: usize,
    world: usize,
    transport: Box<dyn Transport>,
    counters: ByteCounters,
    stages: Option<Vec<StageRecord>>,
}

impl fmt::Debug for WorkerContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorkerContext")
            .field("rank", &self.rank)
            .field("world", &self.world)
            .field("counters", &self.counters)
            .finish_non_exhaustive()
    }
}

impl WorkerContext {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            rank: transport.rank(),
            world: transport.world_size(),
            transport,
            counters: ByteCounters::default(),
            stages: None,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn world_size(&self) -> usize {
        self.world
    }

    pub fn bytes_sent(&self) -> ByteCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = ByteCounters::default();
    }

    /// Starts collecting [`StageRecord`]s from operators run on this context.
    pub fn record_stages(&mut self) {
        self.stages = Some(Vec::new());
    }

    pub fn take_stages(&mut self) -> Vec<StageRecord> {
        self.stages.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Runs `f` as a named stage; timed only while recording is on.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        if self.stages.is_none() {
            return f(self);
        }
        let before = self.counters.total_bytes();
        let start = Instant::now();
        let cpu_start = thread_cpu_time();
        let out = f(self);
        let wall = start.elapsed();
        let cpu = thread_cpu_time().saturating_sub(cpu_start);
        let bytes = self.counters.total_bytes() - before;
        if let Some(s) = self.stages.as_mut() {
            s.push(StageRecord {
                name: name.to_string(),
                wall,
                cpu,
                bytes,
            });
        }
        out
    }

    fn check_root(&self, root: usize) -> Result<()> {
        if root >= self.world {
            return Err(Error::invalid(format!(
                "root {root} out of range for world {}",
                self.world
            )));
        }
        Ok(())
    }

    // Two-phase send: a metadata frame carrying status and buffer sizes, then
    // one data frame per buffer.
    fn send_envelope(&mut self, dest: usize, kind: CollectiveKind, env: Envelope) -> Result<()> {
        debug_assert_ne!(dest, self.rank);
        let mut meta = Vec::new();
        match &env {
            Ok(bufs) => {
                if bufs.len() > MAX_BUFFER_INDEX {
                    return Err(Error::invalid(format!(
                        "{} buffers exceed the frame index limit",
                        bufs.len()
                    )));
                }
                meta.push(0u8);
                meta.extend_from_slice(&(bufs.len() as u32).to_le_bytes());
                for b in bufs {
                    meta.extend_from_slice(&(b.len() as u64).to_le_bytes());
                }
            }
            Err(msg) => {
                meta.push(1u8);
                meta.extend_from_slice(msg.as_bytes());
            }
        }
        self.transport
            .send(dest, Frame::new(self.rank, 0, Phase::Metadata, meta))?;
        self.counters.messages[kind.index()] += 1;
        if let Ok(bufs) = env {
            for (i, b) in bufs.into_iter().enumerate() {
                self.counters.bytes[kind.index()] += b.len() as u64;
                self.counters.messages[kind.index()] += 1;
                self.transport
                    .send(dest, Frame::new(self.rank, i, Phase::Data, b))?;
            }
        }
        Ok(())
    }

    fn recv_envelope(&mut self, src: usize) -> Result<Envelope> {
        let meta = self.transport.recv(src)?;
        if meta.tag.phase != Phase::Metadata || meta.tag.rank != src {
            return Err(Error::transport(
                src,
                Phase::Metadata,
                format!("expected metadata frame, got {:?}", meta.tag),
            ));
        }
        let p = &meta.payload;
        match p.first() {
            Some(0) if p.len() >= 5 => {
                let n = u32::from_le_bytes(p[1..5].try_into().expect("4")) as usize;
                if p.len() != 5 + 8 * n {
                    return Err(Error::transport(
                        src,
                        Phase::Metadata,
                        "malformed metadata frame",
                    ));
                }
                let sizes: Vec<u64> = decode_elements(&p[5..])?;
                let mut bufs = Vec::with_capacity(n);
                for (i, &size) in sizes.iter().enumerate() {
                    let f = self.transport.recv(src)?;
                    if f.tag.phase != Phase::Data || f.tag.index != i || f.tag.rank != src {
                        return Err(Error::transport(
                            src,
                            Phase::Data,
                            format!("out of order frame {:?}", f.tag),
                        ));
                    }
                    if f.payload.len() as u64 != size {
                        return Err(Error::transport(
                            src,
                            Phase::Data,
                            format!(
                                "buffer {i}: announced {size} bytes, received {}",
                                f.payload.len()
                            ),
                        ));
                    }
                    bufs.push(f.payload);
                }
                Ok(Ok(bufs))
            }
            Some(1) => Ok(Err(String::from_utf8_lossy(&p[1..]).into_owned())),
            _ => Err(Error::transport(
                src,
                Phase::Metadata,
                "malformed metadata frame",
            )),
        }
    }

    fn remote_error(&self, msg: String) -> Error {
        Error::Collective {
            rank: self.rank,
            message: msg,
        }
    }

    /// Binomial-tree broadcast of an envelope from `root`.
    fn bcast_envelope(
        &mut self,
        root: usize,
        kind: CollectiveKind,
        mine: Option<Envelope>,
    ) -> Result<Envelope> {
        let p = self.world;
        let vr = (self.rank + p - root) % p;
        let mut data = if vr == 0 { mine } else { None };
        let mut mask = 1usize;
        while mask < p {
            if vr & mask != 0 {
                let parent = (vr - mask + root) % p;
                data = Some(self.recv_envelope(parent)?);
                break;
            }
            mask <<= 1;
        }
        let data = data.ok_or_else(|| Error::invalid("broadcast root supplied no data"))?;
        mask >>= 1;
        while mask > 0 {
            if vr + mask < p {
                let child = (vr + mask + root) % p;
                self.send_envelope(child, kind, data.clone())?;
            }
            mask >>= 1;
        }
        Ok(data)
    }

    /// Exchanges buffers with every rank: sizes first, then data. The result
    /// is indexed by source rank; each source's buffers arrive in index order.
    pub fn channel_exchange(&mut self, outgoing: Vec<BufferRequest>) -> Result<Vec<Vec<Vec<u8>>>> {
        let p = self.world;
        let mut per_dest: Vec<Vec<BufferRequest>> = (0..p).map(|_| Vec::new()).collect();
        for req in outgoing {
            if req.dest >= p {
                return Err(Error::invalid(format!(
                    "destination {} out of range for world {p}",
                    req.dest
                )));
            }
            per_dest[req.dest].push(req);
        }
        let per_dest = per_dest
            .into_iter()
            .map(|mut v| {
                v.sort_by_key(|r| r.index);
                v.into_iter().map(|r| r.buffer).collect()
            })
            .collect();
        self.exchange(CollectiveKind::Shuffle, per_dest)
    }

    fn exchange(
        &mut self,
        kind: CollectiveKind,
        mut per_dest: Vec<Vec<Vec<u8>>>,
    ) -> Result<Vec<Vec<Vec<u8>>>> {
        let p = self.world;
        let me = self.rank;
        let mut received: Vec<Vec<Vec<u8>>> = (0..p).map(|_| Vec::new()).collect();
        received[me] = std::mem::take(&mut per_dest[me]);
        for step in 1..p {
            let dest = (me + step) % p;
            let bufs = std::mem::take(&mut per_dest[dest]);
            self.send_envelope(dest, kind, Ok(bufs))?;
        }
        for step in 1..p {
            let src = (me + p - step) % p;
            received[src] = self.recv_envelope(src)?.map_err(|m| self.remote_error(m))?;
        }
        Ok(received)
    }

    /// Sends each row of `t` to the rank named by `dest[row]`. The result is
    /// the concatenation of what every rank sent here, in rank order.
    pub fn shuffle_table(&mut self, t: &Table, dest: &[usize]) -> Result<Table> {
        let parts = crate::partition::split_by_dest(t, dest, self.world)?;
        self.shuffle_parts(parts)
    }

    /// Shuffle of pre-split parts: `parts[r]` goes to rank `r`.
    pub fn shuffle_parts(&mut self, parts: Vec<Table>) -> Result<Table> {
        let schema = parts.get(self.rank).map(|t| t.schema().clone());
        let runs = self.shuffle_runs(parts)?;
        concat_tables(&schema.expect("checked by shuffle_runs"), &runs)
    }

    /// Like [`shuffle_parts`](Self::shuffle_parts) but keeps what each
    /// source rank sent as a separate table, indexed by source rank.
    pub fn shuffle_runs(&mut self, parts: Vec<Table>) -> Result<Vec<Table>> {
        if parts.len() != self.world {
            return Err(Error::invalid(format!(
                "{} parts for world {}",
                parts.len(),
                self.world
            )));
        }
        let schema = parts[self.rank].schema().clone();
        let mut mine = None;
        let mut per_dest = Vec::with_capacity(self.world);
        for (r, part) in parts.into_iter().enumerate() {
            if r == self.rank {
                mine = Some(part);
                per_dest.push(Vec::new());
            } else {
                per_dest.push(table_frames(&part, true));
            }
        }
        let received = self.exchange(CollectiveKind::Shuffle, per_dest)?;
        let mut tables = Vec::with_capacity(self.world);
        for (src, frames) in received.into_iter().enumerate() {
            if src == self.rank {
                tables.push(mine.take().expect("own part"));
            } else {
                tables.push(frames_table(frames)?.unwrap_or_else(|| Table::empty(schema.clone())));
            }
        }
        Ok(tables)
    }

    /// Root receives every rank's table concatenated in rank order.
    pub fn gather_table(&mut self, t: &Table, root: usize) -> Result<Option<Table>> {
        self.check_root(root)?;
        self.gather_impl(t, root, CollectiveKind::Gather)
    }

    fn gather_impl(
        &mut self,
        t: &Table,
        root: usize,
        kind: CollectiveKind,
    ) -> Result<Option<Table>> {
        if self.rank != root {
            self.send_envelope(root, kind, Ok(table_frames(t, true)))?;
            return Ok(None);
        }
        let mut tables = Vec::with_capacity(self.world);
        for src in 0..self.world {
            if src == root {
                tables.push(t.clone());
            } else {
                let env = self.recv_envelope(src)?.map_err(|m| self.remote_error(m))?;
                if let Some(part) = frames_table(env)? {
                    tables.push(part);
                }
            }
        }
        concat_tables(t.schema(), &tables).map(Some)
    }

    /// Every rank receives the rank-ordered concatenation of all tables.
    /// Implemented as gather at rank 0 followed by a broadcast.
    pub fn allgather_table(&mut self, t: &Table) -> Result<Table> {
        let gathered = self.gather_impl(t, 0, CollectiveKind::AllGather);
        let mine = if self.rank == 0 {
            Some(match gathered {
                Ok(Some(g)) => Ok(table_frames(&g, false)),
                Ok(None) => unreachable!("root gathers"),
                Err(e) => Err(format!("allgather at rank 0: {e}")),
            })
        } else {
            gathered?;
            None
        };
        let env = self.bcast_envelope(0, CollectiveKind::AllGather, mine)?;
        let frames = env.map_err(|m| self.remote_error(m))?;
        Ok(frames_table(frames)?.expect("broadcast carries a full table"))
    }

    /// Every rank receives `root`'s table via a binomial tree of
    /// `ceil(log2 P)` rounds. `t` is only read on `root`.
    pub fn broadcast_table(&mut self, t: Option<&Table>, root: usize) -> Result<Table> {
        self.check_root(root)?;
        let mine = (self.rank == root).then(|| match t {
            Some(t) => Ok(table_frames(t, false)),
            None => Err(format!("broadcast root {root} supplied no table")),
        });
        let env = self.bcast_envelope(root, CollectiveKind::Broadcast, mine)?;
        let frames = env.map_err(|m| self.remote_error(m))?;
        Ok(frames_table(frames)?.expect("broadcast carries a full table"))
    }

    /// Elementwise reduction over all ranks; every rank gets the same result
    /// (binomial-tree reduce to rank 0, then broadcast).
    pub fn allreduce<T: Element>(&mut self, values: &[T], op: ReduceOp) -> Result<Vec<T>> {
        let p = self.world;
        let mut acc: Envelope = Ok(vec![encode_elements(values)]);
        let mut mask = 1usize;
        while mask < p {
            if self.rank & mask != 0 {
                self.send_envelope(self.rank - mask, CollectiveKind::AllReduce, acc)?;
                acc = Ok(Vec::new());
                break;
            }
            if self.rank + mask < p {
                let src = self.rank + mask;
                let other = self.recv_envelope(src)?;
                acc = match (acc, other) {
                    (Err(m), _) | (_, Err(m)) => Err(m),
                    (Ok(a), Ok(b)) => combine_encoded::<T>(&a[0], &b[0], op),
                };
            }
            mask <<= 1;
        }
        let env = self.bcast_envelope(
            0,
            CollectiveKind::AllReduce,
            (self.rank == 0).then_some(acc),
        )?;
        let bufs = env.map_err(|m| self.remote_error(m))?;
        decode_elements(&bufs[0])
    }

    /// No rank returns before every rank has entered.
    pub fn barrier(&mut self) -> Result<()> {
        let p = self.world;
        let mut mask = 1usize;
        while mask < p {
            if self.rank & mask != 0 {
                self.send_envelope(self.rank - mask, CollectiveKind::Barrier, Ok(Vec::new()))?;
                break;
            }
            if self.rank + mask < p {
                self.recv_envelope(self.rank + mask)?
                    .map_err(|m| self.remote_error(m))?;
            }
            mask <<= 1;
        }
        let mine = (self.rank == 0).then(|| Ok(Vec::new()));
        self.bcast_envelope(0, CollectiveKind::Barrier, mine)?
            .map_err(|m| self.remote_error(m))?;
        Ok(())
    }

    /// Point-to-point table send; returns without waiting for the receiver.
    pub fn send_table(&mut self, dest: usize, t: &Table) -> Result<()> {
        self.check_root(dest)?;
        if dest == self.rank {
            return Err(Error::invalid("send_table to self"));
        }
        self.send_envelope(dest, CollectiveKind::SendRecv, Ok(table_frames(t, false)))
    }

    pub fn recv_table(&mut self, src: usize) -> Result<Table> {
        self.check_root(src)?;
        if src == self.rank {
            return Err(Error::invalid("recv_table from self"));
        }
        let frames = self.recv_envelope(src)?.map_err(|m| self.remote_error(m))?;
        Ok(frames_table(frames)?.expect("full table"))
    }
}

/// Number of rounds a binomial-tree broadcast takes over `world` ranks.
pub fn broadcast_rounds(world: usize) -> u32 {
    if world <= 1 {
        0
    } else {
        usize::BITS - (world - 1).leading_zeros()
    }
}

/// Serialized frames of `t`; an empty table becomes no frames when
/// `elide_empty` is set, so empty shuffle parts cost no payload bytes.
fn table_frames(t: &Table, elide_empty: bool) -> Vec<Vec<u8>> {
    if elide_empty && t.is_empty() {
        Vec::new()
    } else {
        serialize_table(t).into_frames()
    }
}

fn frames_table(frames: Vec<Vec<u8>>) -> Result<Option<Table>> {
    if frames.is_empty() {
        return Ok(None);
    }
    deserialize_table(SerializedTable::from_frames(frames)?).map(Some)
}

fn combine_encoded<T: Element>(a: &[u8], b: &[u8], op: ReduceOp) -> Envelope {
    let (Ok(a), Ok(b)) = (decode_elements::<T>(a), decode_elements::<T>(b)) else {
        return Err("allreduce payload is not a whole number of elements".to_string());
    };
    if a.len() != b.len() {
        return Err(format!(
            "allreduce length mismatch: {} vs {}",
            a.len(),
            b.len()
        ));
    }
    let out: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| op.combine(x, y)).collect();
    Ok(vec![encode_elements(&out)])
}
