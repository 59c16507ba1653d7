//! Reproducible random streams.
//!
//! Every replica owns a ChaCha8 stream. The 256-bit key is expanded from the
//! master seed with SplitMix64 and the replica id selects the ChaCha stream
//! number, so replica `r` sees the same numbers no matter which thread runs
//! it or how many replicas run alongside it.
//!
//! Samplers here consume a fixed number of 64-bit words per variate so that
//! draw sequences stay aligned between runs that branch differently (for
//! example a coupled run and a single-copy run sharing a seed).

use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// One SplitMix64 step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The stream for `replica` under `master_seed`.
pub fn replica_rng(master_seed: u64, replica: u64) -> ReplicaRng {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Uniform on the open interval `(0, 1)`; one word.
#[inline]
pub fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Exponential with the given rate; one word.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -uniform_open01(rng).ln() / rate
}

/// Uniform index in `0..m`; one word.
#[inline]
pub fn uniform_index<R: Rng + ?Sized>(rng: &mut R, m: usize) -> usize {
    ((uniform_open01(rng) * m as f64) as usize).min(m - 1)
}

/// Two independent standard normals by Box–Muller; two words.
#[inline]
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let radius = (-2.0 * uniform_open01(rng).ln()).sqrt();
    let angle = TAU * uniform_open01(rng);
    let (s, c) = angle.sin_cos();
    (radius * c, radius * s)
}

/// Fills `out` with standard normals, consuming `2·⌈len/2⌉` words.
pub fn standard_normal_fill<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = standard_normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = standard_normal_pair(rng).0;
    }
}

/// Counts the words drawn through it; used to check fixed draw budgets.
#[derive(Debug)]
pub struct CountingRng<R> {
    inner: R,
    pub words: u64,
}

impl<R> CountingRng<R> {
    pub fn new(inner: R) -> Self {
        CountingRng { inner, words: 0 }
    }
}

impl<R: RngCore> RngCore for CountingRng<R> {
    fn next_u32(&mut self) -> u32 {
        self.words += 1;
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.words += 1;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.words += dest.len().div_ceil(8) as u64;
        self.inner.fill_bytes(dest)
    }
}
