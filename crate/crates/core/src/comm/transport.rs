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

use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::frame::Frame;
use crate::error::{Error, Phase, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Point-to-point endpoint of one worker. Sends never block on the receiver;
/// frames between a fixed pair of ranks arrive in send order.
pub trait Transport: Send {
    fn rank(&self) -> usize;

    fn world_size(&self) -> usize;

    fn send(&mut self, dest: usize, frame: Frame) -> Result<()>;

    /// Next frame from `src`, waiting up to the transport timeout.
    fn recv(&mut self, src: usize) -> Result<Frame>;
}

/// In-process transport: each worker is a thread and owns the receiving end
/// of one queue per peer. Only frames cross between workers.
pub struct LocalTransport {
    rank: usize,
    outboxes: Vec<Sender<Frame>>,
    inboxes: Vec<Receiver<Frame>>,
    timeout: Duration,
}

impl LocalTransport {
    /// Endpoints for a world of `world` ranks, index = rank.
    pub fn world(world: usize) -> Vec<LocalTransport> {
        Self::world_with_timeout(world, DEFAULT_TIMEOUT)
    }

    pub fn world_with_timeout(world: usize, timeout: Duration) -> Vec<LocalTransport> {
        // queues[src][dst]
        let mut senders: Vec<Vec<Option<Sender<Frame>>>> =
            (0..world).map(|_| vec![None; world]).collect();
        let mut receivers: Vec<Vec<Option<Receiver<Frame>>>> = (0..world)
            .map(|_| (0..world).map(|_| None).collect())
            .collect();
        for (src, row) in senders.iter_mut().enumerate() {
            for (dst, slot) in row.iter_mut().enumerate() {
                let (tx, rx) = channel();
                *slot = Some(tx);
                receivers[dst][src] = Some(rx);
            }
        }
        senders
            .into_iter()
            .zip(receivers)
            .enumerate()
            .map(|(rank, (out, inb))| LocalTransport {
                rank,
                outboxes: out.into_iter().map(|s| s.expect("filled")).collect(),
                inboxes: inb.into_iter().map(|r| r.expect("filled")).collect(),
                timeout,
            })
            .collect()
    }
}

impl Transport for LocalTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.outboxes.len()
    }

    fn send(&mut self, dest: usize, frame: Frame) -> Result<()> {
        let phase = frame.tag.phase;
        self.outboxes[dest]
            .send(frame)
            .map_err(|_| Error::transport(dest, phase, "peer endpoint dropped"))
    }

    fn recv(&mut self, src: usize) -> Result<Frame> {
        match self.inboxes[src].recv_timeout(self.timeout) {
            Ok(f) => Ok(f),
            Err(RecvTimeoutError::Timeout) => Err(Error::transport(
                src,
                Phase::Data,
                format!("no frame within {:?}", self.timeout),
            )),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::transport(src, Phase::Data, "peer disconnected"))
            }
        }
    }
}
