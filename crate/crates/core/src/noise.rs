//! Counter-based Gaussian and uniform noise streams.
//!
//! Each stream is a ChaCha20 keystream selected by `(seed, stream_index)`.
//! Sample `n` of a stream is computed from keystream words `4n..4n+4`, so any
//! sample can be regenerated without replaying its predecessors and distinct
//! trajectories never share keystream material.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

const WORDS_PER_SAMPLE: u128 = 4;
const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    stream_index: u64,
    dt: f64,
    cursor: u64,
    rng: ChaCha20Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_index: u64, dt: f64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            dt,
            cursor: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Moves the cursor to an arbitrary sample position.
    pub fn seek(&mut self, cursor: u64) {
        self.cursor = cursor;
    }

    fn words_at(&mut self, cursor: u64) -> (u64, u64) {
        let pos = cursor as u128 * WORDS_PER_SAMPLE;
        if self.rng.get_word_pos() != pos {
            self.rng.set_word_pos(pos);
        }
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Standard normal sample at `cursor` (Box-Muller, cosine branch).
    pub fn standard_normal_at(&mut self, cursor: u64) -> f64 {
        let (a, b) = self.words_at(cursor);
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = 1.0 - unit_interval(a);
        let u2 = unit_interval(b);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(TWO_PI * u2)
    }

    /// Wiener increment with variance `dt`; advances the cursor.
    pub fn wiener_increment(&mut self) -> f64 {
        let z = self.standard_normal_at(self.cursor);
        self.cursor += 1;
        z * libm::sqrt(self.dt)
    }

    /// Uniform sample in `[0, 1)`; advances the cursor.
    pub fn uniform(&mut self) -> f64 {
        let (a, _) = self.words_at(self.cursor);
        self.cursor += 1;
        unit_interval(a)
    }
}

fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
