//! Seeded band-limited random fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::grid::{Grid, ScalarField};

/// Deterministic source of random directions and initial guesses.
pub struct FieldSampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl FieldSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Zero-mean Gaussian field with frequencies at most `N/8` per axis, spectral
    /// amplitudes decaying like `1/(1+|k|²)`, scaled to unit sup-norm.
    pub fn band_limited(&mut self, grid: &Grid) -> ScalarField {
        self.band_limited_with(grid, (grid.resolution() / 8).max(1))
    }

    pub fn band_limited_with(&mut self, grid: &Grid, max_freq: usize) -> ScalarField {
        let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut idx = vec![0; grid.axes()];
        for (i, c) in spec.iter_mut().enumerate() {
            grid.multi_index(i, &mut idx);
            let ks: Vec<i64> = idx.iter().map(|&j| grid.wavenumber(j)).collect();
            let inside = ks.iter().all(|k| k.unsigned_abs() as usize <= max_freq);
            let k2: i64 = ks.iter().map(|k| k * k).sum();
            if inside && k2 > 0 {
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = self.rng.sample(StandardNormal);
                *c = Complex64::new(re, im) / (1.0 + k2 as f64);
            }
        }
        let values = grid.inverse_real(spec);
        let field = ScalarField::new(grid, values).expect("finite spectrum");
        let norm = field.sup_norm();
        if norm > 0.0 {
            field.scale(1.0 / norm)
        } else {
            field
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let g = Grid::new(1, 32).unwrap();
        let a = FieldSampler::new(7).band_limited(&g);
        let b = FieldSampler::new(7).band_limited(&g);
        assert_eq!(a, b);
        assert!((a.sup_norm() - 1.0).abs() < 1e-15);
        assert!(a.integrate().abs() < 1e-14);
        let c = FieldSampler::new(8).band_limited(&g);
        assert_ne!(a, c);
    }
}
