//! Seed plumbing.
//!
//! Every stochastic stage takes a `u64` seed. Stages that need several
//! independent streams derive them with [`sub_seed`], so one global seed
//! fans out to sampling, k-means restarts, initialization, dropout and
//! skip masks without any of them sharing a generator.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SeededRng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, stream)`.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ mix(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller, one value per call).
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random::<f64>();
    crate::math::sqrt(-2.0 * crate::math::ln(u1)) * crate::math::cos(core::f64::consts::TAU * u2)
}

/// Named streams, so call sites do not collide by accident.
pub mod stream {
    pub const SAMPLE: u64 = 1;
    pub const KMEANS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const NET_INIT: u64 = 4;
    pub const NET_TRAIN: u64 = 5;
    pub const SYNTH: u64 = 6;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_seeds_differ_by_stream_and_seed() {
        assert_ne!(sub_seed(1, 0), sub_seed(1, 1));
        assert_ne!(sub_seed(1, 0), sub_seed(2, 0));
        assert_eq!(sub_seed(7, 3), sub_seed(7, 3));
    }

    #[test]
    fn normal_draws_have_unit_moments() {
        let mut rng = seeded(11);
        let n = 20_000;
        let xs: std::vec::Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
