use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A reproducible random stream addressed by `(master_seed, stream_index)`.
///
/// The generator seed is a SplitMix64 hash of the pair, so any consumer can
/// rebuild the exact same stream from its address without coordinating with
/// other consumers. Parallel workers derive their own streams with
/// [`RandomStream::child`] rather than sharing one generator.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(master_seed: u64, stream_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(stream_index ^ 0xD1B5_4A32_D192_ED03))
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut state = mix(master_seed, stream_index);
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RandomStream {
            master_seed,
            stream_index,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// An independent stream nested under this one's address. Does not consume
    /// any draws from `self`.
    pub fn child(&self, index: u64) -> RandomStream {
        RandomStream::new(mix(self.master_seed, self.stream_index), index)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rayon::prelude::*;

    fn draws(seed: u64, index: u64, n: usize) -> Vec<u64> {
        let mut s = RandomStream::new(seed, index);
        (0..n).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_address_same_sequence() {
        assert_eq!(draws(42, 3, 64), draws(42, 3, 64));
    }

    #[test]
    fn distinct_indices_differ() {
        assert_ne!(draws(42, 3, 8), draws(42, 4, 8));
        assert_ne!(draws(42, 3, 8), draws(43, 3, 8));
    }

    #[test]
    fn child_does_not_advance_parent() {
        let mut a = RandomStream::new(1, 0);
        let mut b = RandomStream::new(1, 0);
        let _ = a.child(5);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_eq!(
            RandomStream::new(1, 0).child(5).next_u64(),
            RandomStream::new(1, 0).child(5).next_u64()
        );
    }

    #[test]
    fn parallel_children_match_sequential() {
        let parent = RandomStream::new(99, 7);
        let sequential: Vec<f64> = (0..256).map(|i| parent.child(i).random::<f64>()).collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let parallel: Vec<f64> = pool.install(|| {
            (0..256u64)
                .into_par_iter()
                .map(|i| parent.child(i).random::<f64>())
                .collect()
        });
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let n = 20_000;
        let mut a = RandomStream::new(5, 0);
        let mut b = RandomStream::new(5, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.random::<f64>() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random::<f64>() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // var of U(-.5,.5) is 1/12, so the correlation estimate has sd ~ 1/sqrt(n)
        let corr = cov * 12.0;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");
    }
}
