//! Counter-based splittable random streams.
//!
//! Every draw is a pure function of `(seed, counter)`, so a stream can be
//! snapshotted, replayed or split into independent children without sharing
//! mutable state between environment instances or rollout workers.

use rand::RngCore;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic stream of 64-bit draws.
///
/// Draw `n` is `mix64(seed + (n + 1) * GOLDEN_GAMMA)`; the counter is the
/// number of draws already consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub counter: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Child stream keyed by `tag`. Children with different tags, and the
    /// parent itself, never share draws in practice.
    pub fn split(&self, tag: u64) -> RngState {
        let seed = mix64(self.seed ^ mix64(tag.wrapping_add(0x6a09_e667_f3bc_c909)));
        RngState { seed, counter: 0 }
    }

    /// Child stream keyed by a path of tags, e.g. `(iteration, episode)`.
    pub fn split_path(&self, tags: &[u64]) -> RngState {
        tags.iter().fold(*self, |s, &t| s.split(t))
    }

    /// Stable 64-bit key for a string label.
    pub fn tag_of(label: &str) -> u64 {
        label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
