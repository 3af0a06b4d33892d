//! Counter-based deterministic randomness.
//!
//! Every sampler in this crate draws from a splitmix64 stream keyed by
//! (seed, stream, counter). Samples are pure functions of their index, so
//! data-parallel schedules cannot change results.

/// Fixed seed for all reproducible sampling.
pub const SEED: u64 = 0x5EED;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A stateless generator: `u64_at(i)` is the i-th draw of the stream.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: splitmix64(seed ^ stream.wrapping_mul(0xA076_1D64_78BD_642F)),
        }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        splitmix64(self.key ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93))
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform point in the axis-aligned box given by (lo, hi) slices.
    pub fn point_at(&self, counter: u64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        lo.iter()
            .zip(hi)
            .enumerate()
            .map(|(axis, (&l, &h))| l + (h - l) * self.f64_at(counter * 8 + axis as u64))
            .collect()
    }
}

/// Direction set for dilatation sampling: 64 equispaced unit vectors for
/// n = 2, otherwise 32·n pseudo-random unit vectors from the fixed seed.
pub fn direction_set(n: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        (0..64)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                vec![theta.cos(), theta.sin()]
            })
            .collect()
    } else {
        let rng = CounterRng::new(SEED, 0xD12EC7);
        let count = 32 * n;
        (0..count)
            .map(|k| {
                // Gaussian via Box-Muller on counter draws, then normalize.
                let mut v: Vec<f64> = (0..n)
                    .map(|axis| {
                        let c = (k * n + axis) as u64;
                        let u1 = rng.f64_at(2 * c).max(1e-12);
                        let u2 = rng.f64_at(2 * c + 1);
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                v.iter_mut().for_each(|x| *x /= norm);
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_rng_is_pure() {
        let rng = CounterRng::new(SEED, 7);
        let a: Vec<u64> = (0..16).map(|i| rng.u64_at(i)).collect();
        let b: Vec<u64> = (0..16).rev().map(|i| rng.u64_at(i)).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn f64_in_unit_interval() {
        let rng = CounterRng::new(SEED, 3);
        for i in 0..1000 {
            let x = rng.f64_at(i);
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn directions_are_unit() {
        for n in [2usize, 3, 4] {
            let dirs = direction_set(n);
            assert_eq!(dirs.len(), if n == 2 { 64 } else { 32 * n });
            for d in dirs {
                let norm: f64 = d.iter().map(|x| x * x).sum::<f64>();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }
}
