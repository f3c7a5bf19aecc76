//! Reproducible random streams and simplex sampling.
//!
//! Every random consumer receives its own [`RngStream`]: a `(seed, stream)`
//! pair mapped onto an independent ChaCha8 stream. Child streams are derived
//! with [`RngStream::substream`], so results do not depend on how work is
//! scheduled across threads.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::ProbVector;

/// Generator type handed out by [`RngStream::rng`].
pub type SimRng = ChaCha8Rng;

/// Identifies an independent, reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream `0` of `seed`.
    pub fn from_seed(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Deterministic child stream number `index`.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }

    /// First 64-bit word of this stream, for seeding independent consumers.
    pub fn derive_seed(&self) -> u64 {
        rand::RngCore::next_u64(&mut self.rng())
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> SimRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

/// Uniform draw in `(0, 1]`, safe to take the logarithm of.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Logarithm of a `Gamma(shape, 1)` draw, stable for tiny shapes.
fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("shape >= 1").sample(rng);
        libm::log(g)
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("shape > 1").sample(rng);
        libm::log(g) + libm::log(open_unit(rng)) / shape
    }
}

/// One draw from `Dir(alpha)`.
///
/// Gamma variates are combined in log space, so very small concentrations
/// (common for `Dir(p K / u)` with a sparse prior `p`) do not underflow.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<ProbVector> {
    if alpha.len() < 2 {
        return Err(Error::Domain(format!("Dirichlet needs K >= 2, got {}", alpha.len())));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::Domain(format!("Dirichlet concentration {a} not positive")));
    }
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    ProbVector::new(out)
}

/// Class index drawn with probabilities `p`.
#[inline]
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (k, &pk) in p.iter().enumerate() {
        if pk > 0.0 {
            cum += pk;
            last = k;
            if u < cum {
                return k;
            }
        }
    }
    last
}

/// `count` i.i.d. draws from the flat Dirichlet over `Delta_M`.
pub fn sample_weight_simplex<R: Rng + ?Sized>(m: usize, count: usize, rng: &mut R) -> Result<Vec<ProbVector>> {
    if m < 2 {
        return Err(Error::Domain(format!("weight simplex needs M >= 2, got {m}")));
    }
    let ones = alloc::vec![1.0; m];
    (0..count).map(|_| sample_dirichlet(&ones, rng)).collect()
}

/// Random permutation of `0..n` (Fisher-Yates).
pub fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = s.rng();
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = s.rng();
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        let mut other = s.substream(1).rng();
        assert_ne!(a[0], other.random::<u64>());
        assert_eq!(s.substream(5), s.substream(5));
        assert_ne!(s.substream(5), s.substream(6));
    }

    #[test]
    fn dirichlet_rejects_bad_alpha() {
        let mut r = RngStream::from_seed(1).rng();
        assert!(sample_dirichlet(&[1.0, 0.0], &mut r).is_err());
        assert!(sample_dirichlet(&[1.0, -2.0], &mut r).is_err());
        assert!(sample_dirichlet(&[1.0], &mut r).is_err());
    }

    #[test]
    fn dirichlet_membership_and_concentration() {
        let mut r = RngStream::from_seed(2).rng();
        for alpha in [[0.01, 0.02, 0.5], [1.0, 1.0, 1.0], [30.0, 2.0, 0.001]] {
            let p = sample_dirichlet(&alpha, &mut r).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.as_slice().iter().all(|&v| v >= 0.0));
        }
        let p = sample_dirichlet(&[1e6, 1.0, 1.0], &mut r).unwrap();
        assert!(p.as_slice()[0] > 0.99);
    }

    #[test]
    fn dirichlet_mean_matches() {
        let mut r = RngStream::from_seed(3).rng();
        let mut mean = [0.0; 3];
        let n = 100_000;
        for _ in 0..n {
            let p = sample_dirichlet(&[1.0, 1.0, 1.0], &mut r).unwrap();
            for (m, v) in mean.iter_mut().zip(p.as_slice()) {
                *m += v / n as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 3.0).abs() < 0.01, "{m}");
        }
    }

    #[test]
    fn categorical_examples() {
        let mut r = RngStream::from_seed(4).rng();
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 0.0, 1.0], &mut r), 2);
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut r), 1);
        }
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_categorical(&[0.5, 0.5], &mut r) == 0).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);

        let seq = |seed| {
            let mut r = RngStream::from_seed(seed).rng();
            (0..50).map(|_| sample_categorical(&[0.2, 0.3, 0.5], &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(seq(9), seq(9));
    }

    #[test]
    fn weight_simplex_examples() {
        let mut r = RngStream::from_seed(5).rng();
        assert!(sample_weight_simplex(1, 3, &mut r).is_err());
        let draws = sample_weight_simplex(3, 100_000, &mut r).unwrap();
        let mut mean = [0.0; 3];
        for d in &draws {
            let s: f64 = d.as_slice().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for (m, v) in mean.iter_mut().zip(d.as_slice()) {
                *m += v / draws.len() as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn flat_dirichlet_marginal_is_uniform() {
        // Kolmogorov-Smirnov distance of the first coordinate against U(0, 1).
        let mut r = RngStream::from_seed(6).rng();
        let n = 100_000;
        let mut xs: Vec<f64> = sample_weight_simplex(2, n, &mut r).unwrap().iter().map(|p| p.as_slice()[0]).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut r = RngStream::from_seed(8).rng();
        let mut p = permutation(50, &mut r);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
