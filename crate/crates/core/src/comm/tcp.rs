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

//! Multi-process transport over TCP.
//!
//! Rendezvous: rank 0 listens on the coordinator address; every other rank
//! dials it, announces its rank and its own listening address, and receives
//! the full address table. Ranks then complete a full mesh (rank `i` dials
//! every rank `0 < j < i`). Each peer connection gets a writer thread fed by a
//! queue and a reader thread feeding an inbox, so sends never block.

use std::collections::VecDeque;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::frame::{Frame, MAX_RANKS};
use super::transport::{Transport, DEFAULT_TIMEOUT};
use crate::error::{Error, Phase, Result};

pub const ENV_COORD: &str = "DDF_COORD";
pub const ENV_RANK: &str = "DDF_RANK";
pub const ENV_WORLD: &str = "DDF_WORLD";
pub const ENV_TIMEOUT: &str = "DDF_TIMEOUT_S";

#[derive(Debug, Clone)]
pub struct TcpConfig {
    /// `host:port` of rank 0's rendezvous listener.
    pub coord: String,
    pub rank: usize,
    pub world: usize,
    pub timeout: Duration,
}

impl TcpConfig {
    pub fn new(coord: impl Into<String>, rank: usize, world: usize) -> Self {
        Self {
            coord: coord.into(),
            rank,
            world,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Reads `DDF_COORD`, `DDF_RANK`, `DDF_WORLD` and optionally `DDF_TIMEOUT_S`.
    pub fn from_env() -> Result<Self> {
        let var = |k: &str| {
            std::env::var(k)
                .map_err(|_| Error::invalid(format!("environment variable {k} not set")))
        };
        let parse = |k: &str, v: String| {
            v.parse::<usize>()
                .map_err(|_| Error::invalid(format!("{k}={v} is not a non-negative integer")))
        };
        let mut cfg = Self::new(
            var(ENV_COORD)?,
            parse(ENV_RANK, var(ENV_RANK)?)?,
            parse(ENV_WORLD, var(ENV_WORLD)?)?,
        );
        if let Ok(t) = std::env::var(ENV_TIMEOUT) {
            cfg.timeout = Duration::from_secs(parse(ENV_TIMEOUT, t)? as u64);
        }
        Ok(cfg)
    }
}

type Inbox = Receiver<Result<Frame>>;

pub struct TcpTransport {
    rank: usize,
    world: usize,
    timeout: Duration,
    writers: Vec<Option<Sender<Frame>>>,
    writer_threads: Vec<JoinHandle<()>>,
    inboxes: Vec<Option<Inbox>>,
    self_queue: VecDeque<Frame>,
    write_error: Arc<Mutex<Option<(usize, String)>>>,
}

impl TcpTransport {
    /// Joins the world described by `cfg`. Rank 0 binds `cfg.coord`.
    pub fn connect(cfg: &TcpConfig) -> Result<Self> {
        check_world(cfg)?;
        if cfg.rank == 0 {
            let listener = TcpListener::bind(&cfg.coord).map_err(|e| {
                Error::transport(
                    0,
                    Phase::Connect,
                    format!("cannot bind coordinator {}: {e}", cfg.coord),
                )
            })?;
            Self::coordinator(listener, cfg)
        } else {
            Self::worker(cfg)
        }
    }

    /// Rank 0 with an already bound rendezvous listener.
    pub fn coordinator(listener: TcpListener, cfg: &TcpConfig) -> Result<Self> {
        check_world(cfg)?;
        let deadline = Instant::now() + cfg.timeout;
        let mut peers: Vec<Option<TcpStream>> = (0..cfg.world).map(|_| None).collect();
        let mut addrs = vec![String::new(); cfg.world];
        for _ in 1..cfg.world {
            let mut s = accept_until(&listener, deadline)?;
            s.set_read_timeout(Some(cfg.timeout))?;
            let rank = read_u32(&mut s)? as usize;
            let world = read_u32(&mut s)? as usize;
            let addr = read_str(&mut s)?;
            if world != cfg.world || rank == 0 || rank >= cfg.world || peers[rank].is_some() {
                return Err(Error::transport(
                    rank,
                    Phase::Connect,
                    format!(
                        "bad hello: rank {rank} world {world} (expected world {})",
                        cfg.world
                    ),
                ));
            }
            addrs[rank] = addr;
            peers[rank] = Some(s);
        }
        let mut table = Vec::new();
        table.extend_from_slice(&(cfg.world as u32).to_le_bytes());
        for a in &addrs {
            put_str(&mut table, a);
        }
        for (r, s) in peers.iter_mut().enumerate().skip(1) {
            s.as_mut()
                .expect("accepted")
                .write_all(&table)
                .map_err(|e| Error::transport(r, Phase::Connect, e.to_string()))?;
        }
        Self::start(cfg, peers)
    }

    fn worker(cfg: &TcpConfig) -> Result<Self> {
        let deadline = Instant::now() + cfg.timeout;
        let coord: Vec<SocketAddr> = cfg
            .coord
            .to_socket_addrs()
            .map_err(|e| {
                Error::transport(
                    0,
                    Phase::Connect,
                    format!("cannot resolve {}: {e}", cfg.coord),
                )
            })?
            .collect();
        let mut to_root = dial_until(&coord, deadline, 0)?;
        to_root.set_read_timeout(Some(cfg.timeout))?;
        let local_ip = to_root.local_addr()?.ip();
        let listener = TcpListener::bind((local_ip, 0))?;
        let my_addr = listener.local_addr()?.to_string();

        let mut hello = Vec::new();
        hello.extend_from_slice(&(cfg.rank as u32).to_le_bytes());
        hello.extend_from_slice(&(cfg.world as u32).to_le_bytes());
        put_str(&mut hello, &my_addr);
        to_root
            .write_all(&hello)
            .map_err(|e| Error::transport(0, Phase::Connect, e.to_string()))?;

        let world = read_u32(&mut to_root)? as usize;
        if world != cfg.world {
            return Err(Error::transport(
                0,
                Phase::Connect,
                format!("coordinator world {world} != {}", cfg.world),
            ));
        }
        let mut addrs = Vec::with_capacity(world);
        for _ in 0..world {
            addrs.push(read_str(&mut to_root)?);
        }

        let mut peers: Vec<Option<TcpStream>> = (0..world).map(|_| None).collect();
        peers[0] = Some(to_root);
        for (j, addr) in addrs.iter().enumerate().take(cfg.rank).skip(1) {
            let resolved: Vec<SocketAddr> = addr
                .to_socket_addrs()
                .map_err(|e| Error::transport(j, Phase::Connect, e.to_string()))?
                .collect();
            let mut s = dial_until(&resolved, deadline, j)?;
            s.write_all(&(cfg.rank as u32).to_le_bytes())
                .map_err(|e| Error::transport(j, Phase::Connect, e.to_string()))?;
            peers[j] = Some(s);
        }
        for _ in cfg.rank + 1..world {
            let mut s = accept_until(&listener, deadline)?;
            s.set_read_timeout(Some(cfg.timeout))?;
            let r = read_u32(&mut s)? as usize;
            if r <= cfg.rank || r >= world || peers[r].is_some() {
                return Err(Error::transport(
                    r,
                    Phase::Connect,
                    "unexpected mesh connection",
                ));
            }
            peers[r] = Some(s);
        }
        Self::start(cfg, peers)
    }

    fn start(cfg: &TcpConfig, peers: Vec<Option<TcpStream>>) -> Result<Self> {
        let write_error = Arc::new(Mutex::new(None));
        let mut writers = Vec::with_capacity(cfg.world);
        let mut inboxes = Vec::with_capacity(cfg.world);
        let mut writer_threads = Vec::new();
        for (peer, stream) in peers.into_iter().enumerate() {
            let Some(stream) = stream else {
                writers.push(None);
                inboxes.push(None);
                continue;
            };
            stream.set_nodelay(true)?;
            stream.set_read_timeout(None)?;
            let wstream = stream.try_clone()?;

            let (wtx, wrx) = channel::<Frame>();
            let err_slot = Arc::clone(&write_error);
            writer_threads.push(std::thread::spawn(move || {
                let mut w = BufWriter::with_capacity(1 << 16, &wstream);
                for f in wrx {
                    if let Err(e) = f.write_to(&mut w).and_then(|_| w.flush()) {
                        *err_slot.lock().expect("error slot") = Some((peer, e.to_string()));
                        break;
                    }
                }
                drop(w);
                let _ = wstream.shutdown(Shutdown::Write);
            }));

            let (itx, irx) = channel::<Result<Frame>>();
            std::thread::spawn(move || {
                let mut r = BufReader::with_capacity(1 << 16, stream);
                loop {
                    match Frame::read_from(&mut r) {
                        Ok(f) => {
                            if itx.send(Ok(f)).is_err() {
                                break;
                            }
                        }
                        Err(e) => {
                            let msg = if e.kind() == ErrorKind::UnexpectedEof {
                                "peer closed the connection".to_string()
                            } else {
                                e.to_string()
                            };
                            let _ = itx.send(Err(Error::transport(peer, Phase::Data, msg)));
                            break;
                        }
                    }
                }
            });
            writers.push(Some(wtx));
            inboxes.push(Some(irx));
        }
        Ok(Self {
            rank: cfg.rank,
            world: cfg.world,
            timeout: cfg.timeout,
            writers,
            writer_threads,
            inboxes,
            self_queue: VecDeque::new(),
            write_error,
        })
    }
}

impl Transport for TcpTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.world
    }

    fn send(&mut self, dest: usize, frame: Frame) -> Result<()> {
        if let Some((peer, msg)) = self.write_error.lock().expect("error slot").clone() {
            return Err(Error::transport(peer, Phase::Data, msg));
        }
        if dest == self.rank {
            self.self_queue.push_back(frame);
            return Ok(());
        }
        let phase = frame.tag.phase;
        self.writers[dest]
            .as_ref()
            .ok_or_else(|| Error::transport(dest, phase, "no connection"))?
            .send(frame)
            .map_err(|_| Error::transport(dest, phase, "writer thread stopped"))
    }

    fn recv(&mut self, src: usize) -> Result<Frame> {
        if src == self.rank {
            return self.self_queue.pop_front().ok_or_else(|| {
                Error::transport(src, Phase::Data, "receive from self with nothing queued")
            });
        }
        let inbox = self.inboxes[src]
            .as_ref()
            .ok_or_else(|| Error::transport(src, Phase::Data, "no connection"))?;
        match inbox.recv_timeout(self.timeout) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => Err(Error::transport(
                src,
                Phase::Data,
                format!("no frame within {:?}", self.timeout),
            )),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::transport(src, Phase::Data, "reader stopped"))
            }
        }
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        // flush queued frames before the process can exit
        self.writers.clear();
        for h in self.writer_threads.drain(..) {
            let _ = h.join();
        }
    }
}

fn check_world(cfg: &TcpConfig) -> Result<()> {
    if cfg.world == 0 || cfg.world > MAX_RANKS || cfg.rank >= cfg.world {
        return Err(Error::invalid(format!(
            "rank {} invalid for world {}",
            cfg.rank, cfg.world
        )));
    }
    Ok(())
}

fn accept_until(listener: &TcpListener, deadline: Instant) -> Result<TcpStream> {
    listener.set_nonblocking(true)?;
    loop {
        match listener.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)?;
                listener.set_nonblocking(false)?;
                return Ok(s);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::transport(
                        usize::MAX,
                        Phase::Connect,
                        "timed out waiting for peers",
                    ));
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn dial_until(addrs: &[SocketAddr], deadline: Instant, peer: usize) -> Result<TcpStream> {
    loop {
        for a in addrs {
            if let Ok(s) = TcpStream::connect_timeout(a, Duration::from_millis(500)) {
                return Ok(s);
            }
        }
        if Instant::now() >= deadline {
            return Err(Error::transport(
                peer,
                Phase::Connect,
                format!("could not connect to {addrs:?}"),
            ));
        }
        std::thread::sleep(Duration::from_millis(20));
    }
}

fn read_u32(s: &mut TcpStream) -> Result<u32> {
    let mut b = [0u8; 4];
    s.read_exact(&mut b)
        .map_err(|e| Error::transport(usize::MAX, Phase::Connect, e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(s: &mut TcpStream) -> Result<String> {
    let mut l = [0u8; 2];
    s.read_exact(&mut l)
        .map_err(|e| Error::transport(usize::MAX, Phase::Connect, e.to_string()))?;
    let mut b = vec![0u8; u16::from_le_bytes(l) as usize];
    s.read_exact(&mut b)
        .map_err(|e| Error::transport(usize::MAX, Phase::Connect, e.to_string()))?;
    String::from_utf8(b).map_err(|_| Error::decode("address is not utf8"))
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}
