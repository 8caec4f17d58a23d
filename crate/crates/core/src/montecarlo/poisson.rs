//! Portable Poisson variates.
//!
//! The algorithm is fixed so that a seed reproduces the same counts on every
//! platform:
//!
//! * uniforms are the top 53 bits of one `next_u64` call;
//! * μ < 10: sequential inversion of the CDF with one uniform;
//! * μ ≥ 10: `floor(μ + √μ·Z + 0.5)` clamped at 0, with `Z` from one
//!   Box–Muller pair (cosine branch only, two uniforms).

use std::f64::consts::TAU;

use rand::RngCore;

/// Mean at and above which the normal approximation is used.
pub const NORMAL_THRESHOLD: f64 = 10.0;

/// Uniform in [0, 1).
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Poisson variate of mean `mean`. Non-positive or non-finite means give 0.
pub fn poisson(rng: &mut impl RngCore, mean: f64) -> u64 {
    if !(mean > 0.0 && mean.is_finite()) {
        return 0;
    }
    if mean < NORMAL_THRESHOLD {
        let u = uniform(rng);
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        // The tail beyond 100 has probability below 1e-60 for mean < 10.
        while u >= cdf && k < 100 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    } else {
        let z = standard_normal(rng);
        (mean + mean.sqrt() * z + 0.5).floor().max(0.0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(mean: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..n).map(|_| poisson(&mut rng, mean) as f64).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn zero_mean_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(poisson(&mut rng, 0.0), 0);
        }
        assert_eq!(poisson(&mut rng, -1.0), 0);
        assert_eq!(poisson(&mut rng, f64::NAN), 0);
    }

    #[test]
    fn moments_at_100() {
        let (m, v) = moments(100.0, 10_000, 11);
        assert!((m - 100.0).abs() < 4.0 * 10.0 / 100.0);
        assert!((0.9..=1.1).contains(&(v / m)));
    }

    #[test]
    fn moments_small_means() {
        for mean in [0.3, 2.5, 9.9] {
            let (m, v) = moments(mean, 20_000, 5);
            let se = (mean / 20_000.0).sqrt();
            assert!((m - mean).abs() < 4.0 * se, "{mean}: {m}");
            assert!((0.9..=1.1).contains(&(v / m)), "{mean}: {v}");
        }
    }

    #[test]
    fn inversion_matches_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50_000;
        let mut hist = [0usize; 4];
        for _ in 0..n {
            let k = poisson(&mut rng, 1.0) as usize;
            if k < 4 {
                hist[k] += 1;
            }
        }
        let e1 = (-1.0f64).exp();
        for (k, expected) in [e1, e1, e1 / 2.0, e1 / 6.0].into_iter().enumerate() {
            let p = hist[k] as f64 / n as f64;
            assert!((p - expected).abs() < 0.01, "k={k}: {p} vs {expected}");
        }
    }

    #[test]
    fn seeded_stream_is_stable() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<u64> = (0..64).map(|i| poisson(&mut a, i as f64 * 3.7)).collect();
        let ys: Vec<u64> = (0..64).map(|i| poisson(&mut b, i as f64 * 3.7)).collect();
        assert_eq!(xs, ys);
    }
}
