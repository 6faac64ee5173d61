//! Counter-based Gaussian noise.
//!
//! Each `(seed, substream)` pair selects an independent ChaCha8 stream and
//! step `k` always reads the same block of `4·⌈d/2⌉` 32-bit words, so the
//! noise seen at a given step index depends neither on how many paths ran
//! before it nor on the step size.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Source of standard normal vectors, one per time step.
pub trait NoiseSource {
    fn next_normals(&mut self, out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    d: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, substream: u64, d: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(substream);
        NoiseStream { rng, d }
    }

    /// Stream positioned at step `step`.
    pub fn at_step(seed: u64, substream: u64, d: usize, step: u64) -> Self {
        let mut s = NoiseStream::new(seed, substream, d);
        s.rng.set_word_pos(step as u128 * words_per_step(d) as u128);
        s
    }
}

pub fn words_per_step(d: usize) -> usize {
    4 * d.div_ceil(2)
}

#[inline]
fn unit_open_closed(u: u64) -> f64 {
    ((u >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl NoiseSource for NoiseStream {
    #[inline]
    fn next_normals(&mut self, out: &mut [f64]) {
        let mut k = 0;
        while k < self.d {
            let u1 = unit_open_closed(self.rng.next_u64());
            let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[k] = r * c;
            if k + 1 < self.d {
                out[k + 1] = r * s;
            }
            k += 2;
        }
    }
}

/// Aggregates `factor` consecutive draws of a finer stream: the coarse
/// increment is the sum of the fine ones, renormalised to unit variance.
#[derive(Debug, Clone)]
pub struct CoarsenedNoise<N> {
    fine: N,
    factor: usize,
    scratch: Vec<f64>,
}

impl<N: NoiseSource> CoarsenedNoise<N> {
    pub fn new(fine: N, factor: usize, d: usize) -> Self {
        assert!(factor >= 1, "coarsening factor must be positive");
        CoarsenedNoise {
            fine,
            factor,
            scratch: vec![0.0; d],
        }
    }
}

impl<N: NoiseSource> NoiseSource for CoarsenedNoise<N> {
    fn next_normals(&mut self, out: &mut [f64]) {
        let d = self.scratch.len();
        out[..d].fill(0.0);
        for _ in 0..self.factor {
            self.fine.next_normals(&mut self.scratch);
            for k in 0..d {
                out[k] += self.scratch[k];
            }
        }
        let s = 1.0 / (self.factor as f64).sqrt();
        for v in out[..d].iter_mut() {
            *v *= s;
        }
    }
}

/// Zero noise, for deterministic drift-only tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn next_normals(&mut self, out: &mut [f64]) {
        out.fill(0.0);
    }
}
