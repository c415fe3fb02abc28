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

//! Message framing shared by both transports.
//!
//! Wire form: `u32 tag | u64 payload length | payload`, little-endian. The tag
//! packs sender rank (bits 0..12), buffer index (bits 12..28) and phase
//! (bits 28..32).

use std::io::{Read, Write};

use crate::error::{Error, Phase, Result};

pub const MAX_RANKS: usize = 1 << 12;
pub const MAX_BUFFER_INDEX: usize = (1 << 16) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTag {
    pub rank: usize,
    pub index: usize,
    pub phase: Phase,
}

impl FrameTag {
    pub fn pack(&self) -> u32 {
        debug_assert!(self.rank < MAX_RANKS && self.index <= MAX_BUFFER_INDEX);
        let phase = match self.phase {
            Phase::Connect => 0,
            Phase::Metadata => 1,
            Phase::Data => 2,
            Phase::Control => 3,
        };
        (self.rank as u32) | ((self.index as u32) << 12) | (phase << 28)
    }

    pub fn unpack(tag: u32) -> Result<Self> {
        let phase = match tag >> 28 {
            0 => Phase::Connect,
            1 => Phase::Metadata,
            2 => Phase::Data,
            3 => Phase::Control,
            p => return Err(Error::decode(format!("unknown frame phase {p}"))),
        };
        Ok(Self {
            rank: (tag & 0xFFF) as usize,
            index: ((tag >> 12) & 0xFFFF) as usize,
            phase,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub tag: FrameTag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(rank: usize, index: usize, phase: Phase, payload: Vec<u8>) -> Self {
        Self {
            tag: FrameTag { rank, index, phase },
            payload,
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.tag.pack().to_le_bytes())?;
        w.write_all(&(self.payload.len() as u64).to_le_bytes())?;
        w.write_all(&self.payload)
    }

    pub fn read_from(r: &mut impl Read) -> std::io::Result<Self> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        let tag = u32::from_le_bytes(head[..4].try_into().expect("4"));
        let len = u64::from_le_bytes(head[4..].try_into().expect("8"));
        let tag = FrameTag::unpack(tag)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        let len = usize::try_from(len)
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidData, "frame too large"))?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Self { tag, payload })
    }
}
