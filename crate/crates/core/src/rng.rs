//! Addressable Gaussian streams.
//!
//! Every lattice cell `(k, i)` owns a fixed position in a ChaCha8 keystream
//! selected by `(seed, replica_id)`. Any sub-block of the lattice can be
//! regenerated without producing the rest, and replicas never share words.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// 32-bit words consumed per Box-Muller pair (two `u64` uniforms).
const WORDS_PER_PAIR: u128 = 4;

/// Derives a stream seed from a master seed and a tag (e.g. an experiment id).
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = splitmix64(master ^ 0x6b70_7a2d_7265_6e6f);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
    replica_id: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, replica_id: u64) -> Self {
        NoiseStream { seed, replica_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica_id(&self) -> u64 {
        self.replica_id
    }

    fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replica_id);
        rng
    }

    /// Fills `out` with the standard normals of cells `first .. first + out.len()`
    /// (flat cell indices).
    pub fn fill(&self, first: u64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        let mut rng = self.generator();
        self.fill_with(&mut rng, first, out);
    }

    fn fill_with(&self, rng: &mut ChaCha8Rng, first: u64, out: &mut [f64]) {
        let pair = first / 2;
        rng.set_word_pos(u128::from(pair) * WORDS_PER_PAIR);
        let mut slot = 0;
        if first % 2 == 1 {
            let (_, z1) = box_muller(rng);
            out[0] = z1;
            slot = 1;
        }
        while slot + 1 < out.len() {
            let (z0, z1) = box_muller(rng);
            out[slot] = z0;
            out[slot + 1] = z1;
            slot += 2;
        }
        if slot < out.len() {
            out[slot] = box_muller(rng).0;
        }
    }

    /// Standard normals for columns `col_start .. col_start + width` (wrapping
    /// modulo `m`) of rows `0..rows` of an `m`-column lattice, row-major.
    pub fn block(&self, m: usize, rows: usize, col_start: usize, width: usize) -> Vec<f64> {
        assert!(width <= m && col_start < m);
        let mut rng = self.generator();
        let mut out = vec![0.0; rows * width];
        let head = width.min(m - col_start);
        for (k, row) in out.chunks_exact_mut(width.max(1)).enumerate().take(rows) {
            let base = (k * m) as u64;
            self.fill_with(&mut rng, base + col_start as u64, &mut row[..head]);
            if head < width {
                self.fill_with(&mut rng, base, &mut row[head..]);
            }
        }
        out
    }
}

fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = 1.0 - (rng.next_u64() >> 11) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}
