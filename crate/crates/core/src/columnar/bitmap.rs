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

use crate::error::{Error, Result};

/// Bit-packed validity bitmap, least-significant bit first. A set bit marks
/// a valid (non-null) slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    bits: Vec<u8>,
    len: usize,
}

impl Bitmap {
    pub fn new_valid(len: usize) -> Self {
        let mut bits = vec![0xFFu8; len.div_ceil(8)];
        let tail = len % 8;
        if tail != 0 {
            if let Some(last) = bits.last_mut() {
                *last = (1u8 << tail) - 1;
            }
        }
        Self { bits, len }
    }

    pub fn from_bools(valid: impl IntoIterator<Item = bool>) -> Self {
        let mut bm = Self {
            bits: Vec::new(),
            len: 0,
        };
        for v in valid {
            bm.push(v);
        }
        bm
    }

    /// Wraps raw bytes. The byte count must be exactly `ceil(len / 8)`.
    pub fn from_bytes(bits: Vec<u8>, len: usize) -> Result<Self> {
        if bits.len() != len.div_ceil(8) {
            return Err(Error::decode(format!(
                "validity bitmap has {} bytes, expected {} for {} rows",
                bits.len(),
                len.div_ceil(8),
                len
            )));
        }
        Ok(Self { bits, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bits[i >> 3] & (1 << (i & 7)) != 0
    }

    pub fn push(&mut self, valid: bool) {
        if self.len % 8 == 0 {
            self.bits.push(0);
        }
        if valid {
            let i = self.len;
            self.bits[i >> 3] |= 1 << (i & 7);
        }
        self.len += 1;
    }

    pub fn null_count(&self) -> usize {
        self.len
            - self
                .bits
                .iter()
                .map(|b| b.count_ones() as usize)
                .sum::<usize>()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_valid_masks_tail_bits() {
        let bm = Bitmap::new_valid(10);
        assert_eq!(bm.as_bytes(), &[0xFF, 0x03]);
        assert_eq!(bm.null_count(), 0);
    }

    #[test]
    fn push_and_get() {
        let bm = Bitmap::from_bools([true, false, true, true, false, false, false, false, true]);
        assert_eq!(bm.len(), 9);
        assert!(bm.get(0) && !bm.get(1) && bm.get(8));
        assert_eq!(bm.null_count(), 5);
        assert_eq!(bm.as_bytes(), &[0b0000_1101, 0b1]);
    }

    #[test]
    fn from_bytes_rejects_wrong_size() {
        assert!(Bitmap::from_bytes(vec![0xFF], 9).is_err());
        assert!(Bitmap::from_bytes(vec![], 0).is_ok());
    }
}
