//! Reproducible IID sampling from one-dimensional densities by tabulated
//! inverse CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeff::{reconstruct, CoefficientTree, UniformGrid};
use crate::error::{Error, Result};
use crate::wavelet::WaveletBasis;

/// Default tolerance on clipped negative mass.
pub const CLIP_TOLERANCE: f64 = 1e-6;

/// A density on `[lo, hi]` as cell averages on a uniform grid of step `2^-G`,
/// with the piecewise-linear CDF through the cell boundaries.
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Renormalized nonnegative density per cell.
    pub density: Vec<f64>,
    /// CDF at the `cells + 1` cell boundaries; starts at 0, ends at exactly 1.
    pub cdf: Vec<f64>,
    /// Mass of the negative part removed before renormalization.
    pub clipped_mass: f64,
    /// `|1 − mass|` of the clipped density before renormalization.
    pub renormalization: f64,
    /// Fingerprint of the source tree, or 0 for closures.
    pub source: u64,
}

/// Tabulates a coefficient tree (`D = 1`), failing if more than
/// [`CLIP_TOLERANCE`] of negative mass would be clipped.
pub fn tabulate(tree: &CoefficientTree, basis: &WaveletBasis, support: (f64, f64), grid_exponent: u32) -> Result<TabulatedDensity> {
    tabulate_with_tolerance(tree, basis, support, grid_exponent, Some(CLIP_TOLERANCE))
}

/// As [`tabulate`] with a custom tolerance; `None` accepts any clipping.
pub fn tabulate_with_tolerance(
    tree: &CoefficientTree,
    basis: &WaveletBasis,
    support: (f64, f64),
    grid_exponent: u32,
    tolerance: Option<f64>,
) -> Result<TabulatedDensity> {
    if tree.dim() != 1 {
        return Err(Error::UnsupportedDimension(tree.dim()));
    }
    let cells = cell_count(support, grid_exponent)?;
    let grid = UniformGrid::midpoints(support.0, support.1, cells);
    let values = reconstruct(tree, basis, &grid)?;
    let mut out = build(support, cells, values, tolerance)?;
    out.source = tree.fingerprint();
    Ok(out)
}

/// Tabulates a pointwise density by its values at cell midpoints.
pub fn tabulate_fn<F: Fn(f64) -> f64>(
    f: F,
    support: (f64, f64),
    grid_exponent: u32,
    tolerance: Option<f64>,
) -> Result<TabulatedDensity> {
    let cells = cell_count(support, grid_exponent)?;
    let grid = UniformGrid::midpoints(support.0, support.1, cells);
    let values = grid.points().into_iter().map(f).collect();
    build(support, cells, values, tolerance)
}

fn cell_count(support: (f64, f64), grid_exponent: u32) -> Result<usize> {
    let width = support.1 - support.0;
    if !(width > 0.0) {
        return Err(Error::InvalidConfig(format!("empty support [{}, {}]", support.0, support.1)));
    }
    if grid_exponent > 24 {
        return Err(Error::InvalidConfig(format!("grid exponent {grid_exponent} too large")));
    }
    Ok(((width * (grid_exponent as f64).exp2()).round() as usize).max(1))
}

fn build(support: (f64, f64), cells: usize, mut values: Vec<f64>, tolerance: Option<f64>) -> Result<TabulatedDensity> {
    let step = (support.1 - support.0) / cells as f64;
    let mut clipped = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            clipped -= *v * step;
            *v = 0.0;
        }
    }
    if let Some(tol) = tolerance {
        if clipped > tol {
            return Err(Error::ClippingMass { mass: clipped, tolerance: tol });
        }
    }
    let mut cdf = Vec::with_capacity(cells + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for v in &values {
        acc += v * step;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::InvalidConfig("density has no positive mass".into()));
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    cdf[cells] = 1.0;
    for v in values.iter_mut() {
        *v /= acc;
    }
    Ok(TabulatedDensity {
        lo: support.0,
        hi: support.1,
        step,
        density: values,
        cdf,
        clipped_mass: clipped,
        renormalization: (1.0 - acc).abs(),
        source: 0,
    })
}

impl TabulatedDensity {
    /// CDF at `x`, linear within cells.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let t = (x - self.lo) / self.step;
        let i = (t.floor() as usize).min(self.density.len() - 1);
        self.cdf[i] + (t - i as f64) * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse CDF for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        // First boundary with cdf > u; the cell to its left contains u.
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let i = j - 1;
        let width = self.cdf[j] - self.cdf[i];
        let frac = if width > 0.0 { ((u - self.cdf[i]) / width).clamp(0.0, 1.0) } else { 0.0 };
        (self.lo + (i as f64 + frac) * self.step).min(self.hi)
    }

    /// `n` IID draws from the stream seeded by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect()
    }
}

/// `sup_x |F_n(x) − F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |m, (i, &x)| {
        let f = cdf(x);
        m.max((f - i as f64 / n).abs()).max((((i + 1) as f64) / n - f).abs())
    })
}

/// Single-column CSV of samples.
pub fn samples_to_csv(samples: &[f64]) -> String {
    let mut out = String::from("x\n");
    for x in samples {
        out.push_str(&format!("{x:.17e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{Family, WaveletIndex};

    fn haar() -> WaveletBasis {
        WaveletBasis::build(Family::Haar, 10).unwrap()
    }

    fn uniform_tree() -> CoefficientTree {
        let mut t = CoefficientTree::new(1, 0);
        t.set_father(vec![0], 1.0);
        t
    }

    #[test]
    fn uniform_cdf_is_identity() {
        let d = tabulate(&uniform_tree(), &haar(), (0.0, 1.0), 10).unwrap();
        for (i, c) in d.cdf.iter().enumerate() {
            assert!((c - i as f64 * d.step).abs() < 1e-10);
        }
        assert_eq!(d.clipped_mass, 0.0);
        assert!(d.renormalization < 1e-12);
    }

    #[test]
    fn clipping_is_reported() {
        let mut t = uniform_tree();
        t.set_mother(WaveletIndex::d1(0, 0), 1.5);
        assert!(matches!(tabulate(&t, &haar(), (0.0, 1.0), 8), Err(Error::ClippingMass { .. })));
        let d = tabulate_with_tolerance(&t, &haar(), (0.0, 1.0), 8, None).unwrap();
        assert!((d.clipped_mass - 0.25).abs() < 1e-12);
    }

    #[test]
    fn piecewise_constant_mixture_cdf_is_exact() {
        // 0.3 · U[0, 1/2) + 0.7 · U[1/2, 1)
        let mut t = uniform_tree();
        t.set_mother(WaveletIndex::d1(0, 0), -0.4);
        let d = tabulate(&t, &haar(), (0.0, 1.0), 10).unwrap();
        let exact = |x: f64| if x < 0.5 { 0.6 * x } else { 0.3 + 1.4 * (x - 0.5) };
        for i in 0..=1024 {
            let x = i as f64 / 1024.0;
            assert!((d.cdf_at(x) - exact(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_density_cdf_error_bound() {
        // p(x) = 6x(1 − x) on [0, 1], F(x) = 3x² − 2x³, sup|p′| = 6.
        let g = 8;
        let d = tabulate_fn(|x| 6.0 * x * (1.0 - x), (0.0, 1.0), g, Some(0.0)).unwrap();
        let bound = 5.0 * (-2.0 * g as f64).exp2() * 6.0;
        for (i, c) in d.cdf.iter().enumerate() {
            let x = i as f64 * d.step;
            assert!((c - (3.0 * x * x - 2.0 * x * x * x)).abs() <= bound);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let d = tabulate(&uniform_tree(), &haar(), (0.0, 1.0), 10).unwrap();
        let a = d.sample(500, 42);
        assert_eq!(a, d.sample(500, 42));
        assert_ne!(a, d.sample(500, 43));
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn uniform_ks_and_symmetric_mean() {
        let d = tabulate(&uniform_tree(), &haar(), (0.0, 1.0), 10).unwrap();
        let n = 10_000;
        let xs = d.sample(n, 7);
        assert!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) < 1.63 / (n as f64).sqrt());
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (1.0f64 / 12.0).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn quantile_skips_empty_cells() {
        let d = tabulate_fn(|x| if (0.25..0.75).contains(&x) { 2.0 } else { 0.0 }, (0.0, 1.0), 6, None).unwrap();
        for u in [0.0, 0.1, 0.5, 0.999_999] {
            let x = d.quantile(u);
            assert!((0.25..=0.75).contains(&x), "u={u} → {x}");
        }
    }

    #[test]
    fn csv_export() {
        let csv = samples_to_csv(&[0.5, 0.25]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("x\n"));
    }
}
