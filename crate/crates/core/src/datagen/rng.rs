use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::channel::PureState;
use crate::scalar::Scalar;

/// Seeded ChaCha20 stream.
///
/// `seed_from_u64` and the ChaCha block function are specified bit-for-bit
/// by `rand_chacha` 0.3, so a seed reproduces the same stream on every
/// platform. Independent substreams come from the ChaCha stream id.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha20Rng,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha20Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh generator on stream `stream` of the same seed.
    pub fn substream(&self, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Self {
            inner,
            seed: self.seed,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[−1, 1)`.
    pub fn uniform_sym(&mut self) -> f64 {
        2.0 * self.uniform01() - 1.0
    }

    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn uniform_vec<T: Scalar>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| T::of(self.uniform_sym())).collect()
    }

    /// Uniform `[−1, 1]` coordinates, normalized. Not rotation invariant.
    pub fn unit_vector<T: Scalar>(&mut self, n: usize) -> PureState<T> {
        loop {
            let v = self.uniform_vec::<T>(n);
            if crate::linalg::norm2(&v).as_f64() > 1e-6 {
                return PureState::normalized(v).expect("non-zero finite vector");
            }
        }
    }
}
