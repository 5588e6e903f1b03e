//! Empirical wavelet coefficients and the linear and hard-thresholded
//! density estimators.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::CoefficientTree;
use crate::error::{Error, Result};
use crate::util::{conjugate, recip};
use crate::wavelet::{WaveletBasis, WaveletIndex};

/// Samples are accumulated in fixed-size chunks whose partial sums are added
/// in chunk order, so results do not depend on the worker count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Linear,
    Thresholded,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Linear => "linear",
            EstimatorKind::Thresholded => "thresholded",
        })
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(EstimatorKind::Linear),
            "thresholded" | "threshold" => Ok(EstimatorKind::Thresholded),
            other => Err(Error::InvalidConfig(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub j0: u32,
    /// Upper end of the thresholding band; ignored by the linear estimator.
    pub j1: u32,
    /// Threshold constant `K` in `K √(j/n)`.
    pub threshold: f64,
    pub basis: Arc<WaveletBasis>,
    pub half_width: f64,
    pub dim: usize,
}

impl EstimatorConfig {
    pub fn linear(basis: Arc<WaveletBasis>, j0: u32, half_width: f64) -> Self {
        EstimatorConfig { kind: EstimatorKind::Linear, j0, j1: j0, threshold: 0.0, basis, half_width, dim: 1 }
    }

    pub fn thresholded(basis: Arc<WaveletBasis>, j0: u32, j1: u32, threshold: f64, half_width: f64) -> Self {
        EstimatorConfig { kind: EstimatorKind::Thresholded, j0, j1, threshold, basis, half_width, dim: 1 }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Highest level the estimator can populate.
    pub fn top_level(&self) -> u32 {
        match self.kind {
            EstimatorKind::Linear => self.j0,
            EstimatorKind::Thresholded => self.j1,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.kind == EstimatorKind::Thresholded {
            if self.j1 < self.j0 {
                return Err(Error::InvalidConfig(format!("j1 = {} is below j0 = {}", self.j1, self.j0)));
            }
            if !(self.threshold >= 0.0) {
                return Err(Error::InvalidConfig(format!("threshold constant {} must be >= 0", self.threshold)));
            }
        }
        let top = self.top_level() as f64 * self.dim as f64;
        if top.exp2() > n as f64 {
            return Err(Error::InvalidConfig(format!(
                "2^(D j) = 2^{top} exceeds the sample size {n}"
            )));
        }
        Ok(())
    }
}

/// `α̂_k = (1/n) Σ φ_k(X_i)`, `β̂_λ = (1/n) Σ ψ_λ(X_i)` for every active index up to `j_max`.
///
/// `samples` holds `n` points of dimension `dim` stored consecutively.
pub fn empirical_coefficients(
    samples: &[f64],
    dim: usize,
    basis: &WaveletBasis,
    j_max: u32,
    half_width: f64,
) -> Result<CoefficientTree> {
    if !(1..=2).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !samples.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: samples.len() % dim });
    }
    if let Some(&value) = samples.iter().find(|x| !(x.abs() <= half_width)) {
        return Err(Error::SampleOutOfSupport { value, half_width });
    }
    let n = samples.len() / dim;
    let layout = Layout::new(basis, dim, j_max, half_width);

    let partials: Vec<Vec<f64>> = samples
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut acc = vec![0.0; layout.total];
            for x in chunk.chunks_exact(dim) {
                layout.accumulate(basis, x, &mut acc);
            }
            acc
        })
        .collect();
    let mut sums = vec![0.0; layout.total];
    for part in &partials {
        for (s, v) in sums.iter_mut().zip(part) {
            *s += v;
        }
    }
    let inv_n = 1.0 / n as f64;
    Ok(layout.into_tree(&sums, inv_n))
}

/// Empirical coefficients truncated at `j0`.
pub fn linear_estimate(samples: &[f64], config: &EstimatorConfig) -> Result<CoefficientTree> {
    if config.kind != EstimatorKind::Linear {
        return Err(Error::InvalidConfig("linear_estimate needs a linear configuration".into()));
    }
    config.validate(samples.len() / config.dim.max(1))?;
    empirical_coefficients(samples, config.dim, &config.basis, config.j0, config.half_width)
}

/// Keeps levels up to `j0`, hard-thresholds `|β̂_λ| > K √(j/n)` on `j0 < j ≤ j1`.
pub fn threshold_estimate(samples: &[f64], config: &EstimatorConfig) -> Result<CoefficientTree> {
    if config.kind != EstimatorKind::Thresholded {
        return Err(Error::InvalidConfig("threshold_estimate needs a thresholded configuration".into()));
    }
    let n = samples.len() / config.dim.max(1);
    config.validate(n)?;
    let raw = empirical_coefficients(samples, config.dim, &config.basis, config.j1, config.half_width)?;
    Ok(apply_threshold(&raw, config.j0, config.threshold, n))
}

/// Hard thresholding of an empirical tree computed from `n` samples.
pub fn apply_threshold(raw: &CoefficientTree, j0: u32, threshold: f64, n: usize) -> CoefficientTree {
    raw.filter_mothers(|idx, v| idx.level <= j0 || v.abs() > threshold * (idx.level as f64 / n as f64).sqrt())
}

/// Dispatches on `config.kind`.
pub fn estimate(samples: &[f64], config: &EstimatorConfig) -> Result<CoefficientTree> {
    match config.kind {
        EstimatorKind::Linear => linear_estimate(samples, config),
        EstimatorKind::Thresholded => threshold_estimate(samples, config),
    }
}

/// `j0 = ⌊log₂n / (2σ_g + D)⌋`, `j1 = ⌈log₂n / (2σ_g + D − 2D/p_g)⌉`.
///
/// `j1` is capped at `⌊log₂n / D⌋` so that `2^{D j1} ≤ n`, and raised to `j0`
/// if the formula would put it below.
pub fn default_levels(n: usize, sigma_g: f64, p_g: f64, dim: usize) -> Result<(u32, u32)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("sample size {n} is below 2")));
    }
    let d = dim as f64;
    let sparse_den = 2.0 * sigma_g + d - 2.0 * d * recip(p_g);
    if sparse_den <= 0.0 {
        return Err(Error::Hypothesis(format!("2 sigma_g + D - 2D/p_g = {sparse_den} is not positive")));
    }
    let log_n = (n as f64).log2();
    let j0 = (log_n / (2.0 * sigma_g + d) + 1e-9).floor() as u32;
    let j1 = (log_n / sparse_den - 1e-9).ceil().max(0.0) as u32;
    let cap = (log_n / d + 1e-9).floor() as u32;
    Ok((j0, j1.min(cap).max(j0)))
}

/// `round(log₂n / (2σ_g + D + 2D/p_d′ − 2D/p_g))`.
pub fn linear_optimal_level(n: usize, sigma_g: f64, p_g: f64, p_d: f64, dim: usize) -> Result<u32> {
    let d = dim as f64;
    let den = 2.0 * sigma_g + d + 2.0 * d * recip(conjugate(p_d)) - 2.0 * d * recip(p_g);
    if den <= 0.0 {
        return Err(Error::Hypothesis(format!("linear level denominator {den} is not positive")));
    }
    Ok(((n as f64).log2() / den).round().max(0.0) as u32)
}

/// Rescales so the father block sums to one (unit mass); for export only.
pub fn normalized(tree: &CoefficientTree) -> CoefficientTree {
    let mass: f64 = tree.fathers().map(|(_, v)| v).sum();
    if mass == 0.0 {
        tree.clone()
    } else {
        tree.scaled(1.0 / mass)
    }
}

/// Dense per-level storage for accumulation.
struct Layout {
    dim: usize,
    j_max: u32,
    support: i64,
    /// Per block (fathers first, then levels 0..=j_max): first translate and width.
    blocks: Vec<(i64, usize, usize)>,
    total: usize,
}

impl Layout {
    fn new(basis: &WaveletBasis, dim: usize, j_max: u32, half_width: f64) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for j in 0..=j_max + 1 {
            // Block 0 holds fathers (level-0 translates); block j + 1 holds level j.
            let level = j.saturating_sub(1);
            let range = basis.translate_range(level, half_width);
            let width = (range.end() - range.start() + 1).max(0) as usize;
            let orientations = if j == 0 { 1 } else { (1usize << dim) - 1 };
            blocks.push((*range.start(), width, offset));
            offset += width.pow(dim as u32) * orientations;
        }
        Layout { dim, j_max, support: basis.support_length() as i64, blocks, total: offset }
    }

    fn accumulate(&self, basis: &WaveletBasis, x: &[f64], acc: &mut [f64]) {
        for (b, &(k_lo, width, offset)) in self.blocks.iter().enumerate() {
            let is_father = b == 0;
            let level = if is_father { 0 } else { b as u32 - 1 };
            let scale = (level as f64).exp2();
            let amp = if is_father { 1.0 } else { (0.5 * self.dim as f64 * level as f64).exp2() };
            // Per axis: (slot, φ value, ψ value) for translates whose support holds x.
            let mut axes: [[(usize, f64, f64); 32]; 2] = [[(0, 0.0, 0.0); 32]; 2];
            let mut counts = [0usize; 2];
            for d in 0..self.dim {
                let u = scale * x[d];
                let top = u.floor() as i64;
                for k in (top - self.support + 1)..=top {
                    let slot = k - k_lo;
                    if slot < 0 || slot >= width as i64 {
                        continue;
                    }
                    let t = u - k as f64;
                    let phi = basis.phi(t);
                    let psi = if is_father { 0.0 } else { basis.psi(t) };
                    axes[d][counts[d]] = (slot as usize, phi, psi);
                    counts[d] += 1;
                }
            }
            if self.dim == 1 {
                for &(slot, phi, psi) in &axes[0][..counts[0]] {
                    acc[offset + slot] += amp * if is_father { phi } else { psi };
                }
            } else {
                let orientations = if is_father { 1 } else { 3 };
                for &(s0, phi0, psi0) in &axes[0][..counts[0]] {
                    for &(s1, phi1, psi1) in &axes[1][..counts[1]] {
                        let cell = (s0 * width + s1) * orientations;
                        if is_father {
                            acc[offset + cell] += phi0 * phi1;
                        } else {
                            // Orientation bit 0 is axis 0.
                            acc[offset + cell] += amp * psi0 * phi1;
                            acc[offset + cell + 1] += amp * phi0 * psi1;
                            acc[offset + cell + 2] += amp * psi0 * psi1;
                        }
                    }
                }
            }
        }
    }

    fn into_tree(self, sums: &[f64], scale: f64) -> CoefficientTree {
        let mut tree = CoefficientTree::new(self.dim, self.j_max);
        for (b, &(k_lo, width, offset)) in self.blocks.iter().enumerate() {
            let is_father = b == 0;
            let orientations = if is_father { 1 } else { (1usize << self.dim) - 1 };
            for cell in 0..width.pow(self.dim as u32) {
                let translate: Vec<i64> = if self.dim == 1 {
                    vec![k_lo + cell as i64]
                } else {
                    vec![k_lo + (cell / width) as i64, k_lo + (cell % width) as i64]
                };
                for o in 0..orientations {
                    let value = sums[offset + cell * orientations + o] * scale;
                    if value == 0.0 {
                        continue;
                    }
                    if is_father {
                        tree.set_father(translate.clone(), value);
                    } else {
                        let idx = WaveletIndex { level: b as u32 - 1, translate: translate.clone(), orientation: o as u8 + 1 };
                        tree.set_mother(idx, value);
                    }
                }
            }
        }
        tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::Family;

    fn haar() -> Arc<WaveletBasis> {
        Arc::new(WaveletBasis::build(Family::Haar, 8).unwrap())
    }

    #[test]
    fn degenerate_sample() {
        let b = haar();
        let xs = vec![0.25; 10];
        let t = empirical_coefficients(&xs, 1, &b, 2, 1.0).unwrap();
        assert_eq!(t.father(&[0]), 1.0);
        assert_eq!(t.mother(&WaveletIndex::d1(0, 0)), 1.0);
        assert_eq!(t.father(&[-1]), 0.0);
    }

    #[test]
    fn cancellation() {
        let b = haar();
        let t = empirical_coefficients(&[0.25, 0.75], 1, &b, 2, 1.0).unwrap();
        assert_eq!(t.mother(&WaveletIndex::d1(0, 0)), 0.0);
        assert_eq!(t.father(&[0]), 1.0);
    }

    #[test]
    fn errors() {
        let b = haar();
        assert!(matches!(empirical_coefficients(&[], 1, &b, 2, 1.0), Err(Error::EmptySample)));
        assert!(matches!(
            empirical_coefficients(&[0.5, 1.5], 1, &b, 2, 1.0),
            Err(Error::SampleOutOfSupport { .. })
        ));
        assert!(matches!(empirical_coefficients(&[f64::NAN], 1, &b, 2, 1.0), Err(Error::SampleOutOfSupport { .. })));
    }

    #[test]
    fn matches_direct_evaluation_db2_two_dims() {
        let b = Arc::new(WaveletBasis::build(Family::Daubechies(2), 10).unwrap());
        let xs = [0.13, -0.42, 0.77, 0.05, -0.9, 0.6];
        let t = empirical_coefficients(&xs, 2, &b, 1, 1.0).unwrap();
        for k in b.active_father_translates(1.0, 2) {
            let direct: f64 = xs.chunks(2).map(|x| b.evaluate_father(&k, x)).sum::<f64>() / 3.0;
            assert!((t.father(&k) - direct).abs() < 1e-14);
        }
        for j in 0..=1 {
            for idx in b.active_indices(j, 1.0, 2) {
                let direct: f64 = xs.chunks(2).map(|x| b.evaluate_mother(&idx, x)).sum::<f64>() / 3.0;
                assert!((t.mother(&idx) - direct).abs() < 1e-14, "{idx:?}");
            }
        }
    }

    #[test]
    fn linear_is_truncation() {
        let b = haar();
        let xs: Vec<f64> = (0..64).map(|i| (i as f64 * 0.618).fract()).collect();
        let full = empirical_coefficients(&xs, 1, &b, 4, 1.0).unwrap();
        let cfg = EstimatorConfig::linear(b.clone(), 0, 1.0);
        let lin = linear_estimate(&xs, &cfg).unwrap();
        assert_eq!(lin, full.truncated(0));
        assert!(lin.mothers().all(|(k, _)| k.level == 0));
    }

    #[test]
    fn threshold_edge_cases() {
        let b = haar();
        let xs: Vec<f64> = (0..256).map(|i| (i as f64 * 0.618).fract()).collect();
        let vacuous = EstimatorConfig::thresholded(b.clone(), 1, 4, 0.0, 1.0);
        let lin4 = EstimatorConfig::linear(b.clone(), 4, 1.0);
        assert_eq!(threshold_estimate(&xs, &vacuous).unwrap(), linear_estimate(&xs, &lin4).unwrap());

        let huge = EstimatorConfig::thresholded(b.clone(), 1, 4, 1e6, 1.0);
        let lin1 = EstimatorConfig::linear(b.clone(), 1, 1.0);
        let a = threshold_estimate(&xs, &huge).unwrap();
        assert_eq!(a.truncated(1), linear_estimate(&xs, &lin1).unwrap());
        assert_eq!(a.mothers().filter(|(k, _)| k.level > 1).count(), 0);

        let inverted = EstimatorConfig::thresholded(b, 3, 2, 1.0, 1.0);
        assert!(matches!(threshold_estimate(&xs, &inverted), Err(Error::InvalidConfig(_))));
        assert!(matches!(linear_estimate(&xs, &huge), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn default_levels_examples() {
        assert_eq!(default_levels(1024, 2.0, 2.0, 1).unwrap(), (2, 3));
        assert_eq!(default_levels(1 << 14, 1.0, f64::INFINITY, 1).unwrap(), (4, 5));
        assert!(default_levels(1024, 0.2, 1.0, 1).is_err());
        let mut last = (0, 0);
        for e in 1..=20 {
            let lv = default_levels(1 << e, 1.5, 2.0, 1).unwrap();
            assert!(lv.0 >= last.0 && lv.1 >= last.1);
            last = lv;
        }
    }

    #[test]
    fn linear_optimal_level_examples() {
        assert_eq!(linear_optimal_level(1024, 2.0, 2.0, 2.0, 1).unwrap(), 2);
        // p_d = 1: exponent 1/(2σ_g + D − 2D/p_g) = 1/4 → 2.5 rounds to 3 (half away from zero).
        assert_eq!(linear_optimal_level(1024, 2.0, 2.0, 1.0, 1).unwrap(), 3);
        let mut last = u32::MAX;
        for s in 1..20 {
            let j = linear_optimal_level(1 << 16, s as f64 * 0.5, 2.0, 2.0, 1).unwrap();
            assert!(j <= last);
            last = j;
        }
    }

    #[test]
    fn normalization_gives_unit_mass() {
        let mut t = CoefficientTree::new(1, 0);
        t.set_father(vec![0], 2.0);
        t.set_mother(WaveletIndex::d1(0, 0), 0.5);
        let n = normalized(&t);
        assert_eq!(n.father(&[0]), 1.0);
        assert_eq!(n.mother(&WaveletIndex::d1(0, 0)), 0.25);
    }
}
