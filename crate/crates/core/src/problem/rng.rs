//! Counter-based Gaussian stream.
//!
//! The `k`-th 64-bit word of a stream is `mix(key + (k + 1)·γ)` where `key` is
//! the SplitMix64 image of the seed, `γ = 0x9E3779B97F4A7C15` and `mix` is the
//! SplitMix64 finalizer. Words `2j` and `2j+1` feed one Box–Muller pair:
//!
//! ```text
//! u1 = ((w_2j >> 11) + 1) · 2⁻⁵³          ∈ (0, 1]
//! u2 =  (w_2j+1 >> 11)    · 2⁻⁵³          ∈ [0, 1)
//! r  = sqrt(−2 ln u1),  θ = 2π u2
//! draw[2j] = std · r cos θ,  draw[2j+1] = std · r sin θ
//! ```
//!
//! Transcendentals go through `libm` so streams are bit-identical across
//! platforms.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic standard-normal stream, addressable by position.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    key: u64,
    counter: u64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed.wrapping_add(GAMMA)),
            counter: 0,
            spare: None,
        }
    }

    fn word(&self, k: u64) -> u64 {
        mix(self.key.wrapping_add(k.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    /// Next standard-normal sample.
    pub fn next_standard(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let scale = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.word(self.counter) >> 11) + 1) as f64 * scale;
        let u2 = (self.word(self.counter + 1) >> 11) as f64 * scale;
        self.counter += 2;
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn next_normal(&mut self, std: f64) -> f64 {
        std * self.next_standard()
    }

    pub fn take(&mut self, count: usize, std: f64) -> Vec<f64> {
        (0..count).map(|_| self.next_normal(std)).collect()
    }
}

/// `count` draws from `N(0, std²)`, deterministic in `seed`.
pub fn gaussian_draw(seed: u64, count: usize, std: f64) -> Vec<f64> {
    assert!(std > 0.0, "standard deviation must be positive");
    GaussianStream::new(seed).take(count, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        assert_eq!(gaussian_draw(9, 1000, 1.0), gaussian_draw(9, 1000, 1.0));
        assert_ne!(gaussian_draw(9, 10, 1.0), gaussian_draw(10, 10, 1.0));
    }

    #[test]
    fn moments_match_requested_std() {
        let draws = gaussian_draw(1, 100_000, 5.0);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.05, "mean {mean}");
        assert!((var.sqrt() - 5.0).abs() <= 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn std_scales_elementwise() {
        let unit = gaussian_draw(3, 257, 1.0);
        let five = gaussian_draw(3, 257, 5.0);
        for (a, b) in unit.iter().zip(&five) {
            assert_eq!(5.0 * a, *b);
        }
    }

    #[test]
    fn stream_prefix_is_stable() {
        let long = gaussian_draw(77, 101, 2.0);
        let short = gaussian_draw(77, 33, 2.0);
        assert_eq!(&long[..33], &short[..]);
    }
}
