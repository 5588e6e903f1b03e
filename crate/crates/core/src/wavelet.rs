//! Compactly supported orthonormal wavelet bases.
//!
//! A [`WaveletBasis`] stores the father (`φ`) and mother (`ψ`) functions
//! tabulated on the dyadic grid `i · 2^-G` over their support `[0, L]`,
//! where `L = 2N - 1` for Daubechies-N and `L = 1` for Haar. Points between
//! grid nodes are linearly interpolated; Haar is evaluated in closed form.
//!
//! Multivariate basis functions are tensor products: for orientation
//! `ε ∈ {0,1}^D \ {0}` the factor along axis `d` is `ψ` when bit `d` of `ε`
//! is set and `φ` otherwise.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filters;

pub const MIN_GRID_EXPONENT: u32 = 6;
pub const MAX_GRID_EXPONENT: u32 = 16;
pub const DEFAULT_GRID_EXPONENT: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Haar,
    /// Daubechies wavelet with the given number of vanishing moments (2..=10).
    Daubechies(u8),
}

impl Family {
    /// Length of the causal support `[0, L]` of φ and ψ.
    pub fn support_length(self) -> usize {
        match self {
            Family::Haar => 1,
            Family::Daubechies(n) => 2 * n as usize - 1,
        }
    }

    /// Integer part of the published Hölder exponent of φ.
    pub fn regularity(self) -> u32 {
        match self {
            Family::Haar | Family::Daubechies(2) => 0,
            Family::Daubechies(3..=5) => 1,
            Family::Daubechies(6..=8) => 2,
            Family::Daubechies(_) => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Haar => write!(f, "haar"),
            Family::Daubechies(n) => write!(f, "daubechies-{n}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "haar" || lower == "db1" || lower == "daubechies-1" {
            return Ok(Family::Haar);
        }
        let order = lower
            .strip_prefix("daubechies-")
            .or_else(|| lower.strip_prefix("db"))
            .and_then(|rest| rest.parse::<u8>().ok());
        match order {
            Some(n @ 2..=10) => Ok(Family::Daubechies(n)),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// λ = (j, k, ε): level, integer translate and orientation bitmask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveletIndex {
    pub level: u32,
    pub translate: Vec<i64>,
    /// Bit `d` set means the factor along axis `d` is ψ. Never zero.
    pub orientation: u8,
}

impl WaveletIndex {
    pub fn new(level: u32, translate: Vec<i64>, orientation: u8) -> Self {
        let dim = translate.len();
        debug_assert!((1..=8).contains(&dim));
        debug_assert!(orientation != 0 && (orientation as u32) < (1u32 << dim));
        WaveletIndex { level, translate, orientation }
    }

    /// One-dimensional index with ε = 1.
    pub fn d1(level: u32, k: i64) -> Self {
        WaveletIndex { level, translate: vec![k], orientation: 1 }
    }

    pub fn dim(&self) -> usize {
        self.translate.len()
    }

    pub fn orientation_bit(&self, axis: usize) -> bool {
        self.orientation >> axis & 1 == 1
    }

    /// The dyadic point `2^-j k + 2^-(j+1) ε` that identifies this index.
    pub fn location(&self) -> Vec<f64> {
        let scale = (-(self.level as f64)).exp2();
        self.translate
            .iter()
            .enumerate()
            .map(|(d, &k)| {
                let eps = if self.orientation_bit(d) { 1.0 } else { 0.0 };
                scale * k as f64 + 0.5 * scale * eps
            })
            .collect()
    }

    /// Inverse of [`WaveletIndex::location`].
    pub fn from_location(level: u32, location: &[f64]) -> Self {
        let scale = (level as f64).exp2();
        let mut translate = Vec::with_capacity(location.len());
        let mut orientation = 0u8;
        for (d, &x) in location.iter().enumerate() {
            let twice = (2.0 * x * scale).round() as i64;
            if twice.rem_euclid(2) == 1 {
                orientation |= 1 << d;
            }
            translate.push(twice.div_euclid(2));
        }
        WaveletIndex { level, translate, orientation }
    }
}

#[derive(Debug, Clone)]
pub struct WaveletBasis {
    family: Family,
    filter: Vec<f64>,
    grid_exponent: u32,
    father: Vec<f64>,
    mother: Vec<f64>,
    father_sup: f64,
    mother_sup: f64,
}

impl WaveletBasis {
    pub fn build(family: Family, grid_exponent: u32) -> Result<Self> {
        if !(MIN_GRID_EXPONENT..=MAX_GRID_EXPONENT).contains(&grid_exponent) {
            return Err(Error::GridExponent(grid_exponent));
        }
        let filter = match family {
            Family::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            Family::Daubechies(n) => filters::daubechies(n as usize)
                .ok_or_else(|| Error::UnknownFamily(family.to_string()))?
                .to_vec(),
        };
        let (father, mother) = match family {
            Family::Haar => haar_grids(grid_exponent),
            Family::Daubechies(_) => {
                let father = cascade(&filter, grid_exponent);
                let mother = mother_from_father(&filter, &father, grid_exponent);
                (father, mother)
            }
        };
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(WaveletBasis {
            family,
            father_sup: sup(&father),
            mother_sup: sup(&mother),
            filter,
            grid_exponent,
            father,
            mother,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Low-pass filter `h`.
    pub fn filter(&self) -> &[f64] {
        &self.filter
    }

    /// High-pass filter `g_m = (-1)^m h_{L-m}`.
    pub fn highpass(&self) -> Vec<f64> {
        let l = self.filter.len() - 1;
        (0..=l)
            .map(|m| if m % 2 == 0 { self.filter[l - m] } else { -self.filter[l - m] })
            .collect()
    }

    pub fn grid_exponent(&self) -> u32 {
        self.grid_exponent
    }

    pub fn grid_step(&self) -> f64 {
        (-(self.grid_exponent as f64)).exp2()
    }

    pub fn support_length(&self) -> usize {
        self.family.support_length()
    }

    /// Half-width `A` such that φ and ψ vanish outside `[-A, A]`.
    ///
    /// With the causal convention the support is `[0, L]`, so `A = L`.
    pub fn support_half_width(&self) -> f64 {
        self.support_length() as f64
    }

    pub fn regularity(&self) -> u32 {
        self.family.regularity()
    }

    /// φ on the grid `i · 2^-G`, `i = 0..=L·2^G`.
    pub fn father_grid(&self) -> &[f64] {
        &self.father
    }

    /// ψ on the same grid as [`WaveletBasis::father_grid`].
    pub fn mother_grid(&self) -> &[f64] {
        &self.mother
    }

    pub fn father_sup_norm(&self) -> f64 {
        self.father_sup
    }

    pub fn mother_sup_norm(&self) -> f64 {
        self.mother_sup
    }

    /// Unscaled φ at a real point.
    pub fn phi(&self, x: f64) -> f64 {
        match self.family {
            Family::Haar => {
                if (0.0..1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Daubechies(_) => self.interpolate(&self.father, x),
        }
    }

    /// Unscaled ψ at a real point.
    pub fn psi(&self, x: f64) -> f64 {
        match self.family {
            Family::Haar => {
                if (0.0..0.5).contains(&x) {
                    1.0
                } else if (0.5..1.0).contains(&x) {
                    -1.0
                } else {
                    0.0
                }
            }
            Family::Daubechies(_) => self.interpolate(&self.mother, x),
        }
    }

    fn interpolate(&self, grid: &[f64], x: f64) -> f64 {
        let len = self.support_length() as f64;
        if !(x > 0.0 && x < len) {
            return 0.0;
        }
        let t = x * (self.grid_exponent as f64).exp2();
        let i = t.floor();
        let frac = t - i;
        let i = i as usize;
        if i + 1 >= grid.len() {
            return grid[grid.len() - 1];
        }
        grid[i] + frac * (grid[i + 1] - grid[i])
    }

    /// `ψ_λ(x) = 2^{Dj/2} ∏_d w_d(2^j x_d - k_d)`.
    pub fn evaluate_mother(&self, index: &WaveletIndex, x: &[f64]) -> f64 {
        debug_assert_eq!(index.dim(), x.len());
        let scale = (index.level as f64).exp2();
        let mut value = (0.5 * index.dim() as f64 * index.level as f64).exp2();
        for (d, (&xd, &kd)) in x.iter().zip(&index.translate).enumerate() {
            let u = scale * xd - kd as f64;
            let w = if index.orientation_bit(d) { self.psi(u) } else { self.phi(u) };
            if w == 0.0 {
                return 0.0;
            }
            value *= w;
        }
        value
    }

    /// `φ_k(x) = ∏_d φ(x_d - k_d)`.
    pub fn evaluate_father(&self, translate: &[i64], x: &[f64]) -> f64 {
        debug_assert_eq!(translate.len(), x.len());
        let mut value = 1.0;
        for (&xd, &kd) in x.iter().zip(translate) {
            let w = self.phi(xd - kd as f64);
            if w == 0.0 {
                return 0.0;
            }
            value *= w;
        }
        value
    }

    /// Translates `k` at level `j` whose support meets `(-T, T)` in positive measure.
    pub fn translate_range(&self, level: u32, half_width: f64) -> std::ops::RangeInclusive<i64> {
        let scale = (level as f64).exp2();
        let len = self.support_length() as f64;
        let lo = (-half_width * scale - len).floor() as i64 + 1;
        let hi = (half_width * scale).ceil() as i64 - 1;
        lo..=hi
    }

    /// Father translates whose support meets `[-T, T]^D`.
    pub fn active_father_translates(&self, half_width: f64, dim: usize) -> Vec<Vec<i64>> {
        let range = self.translate_range(0, half_width);
        cartesian(&vec![range; dim])
    }

    /// Every mother index at level `j` whose support meets `[-T, T]^D`.
    pub fn active_indices(&self, level: u32, half_width: f64, dim: usize) -> Vec<WaveletIndex> {
        let range = self.translate_range(level, half_width);
        let translates = cartesian(&vec![range; dim]);
        let orientations = (1u8..(1u8 << dim)).collect::<Vec<_>>();
        let mut out = Vec::with_capacity(translates.len() * orientations.len());
        for k in translates {
            for &eps in &orientations {
                out.push(WaveletIndex { level, translate: k.clone(), orientation: eps });
            }
        }
        out
    }

    /// Closed interval `[lo, hi]` per axis containing the support of ψ_λ.
    pub fn mother_support(&self, index: &WaveletIndex) -> Vec<(f64, f64)> {
        let scale = (-(index.level as f64)).exp2();
        let len = self.support_length() as f64;
        index
            .translate
            .iter()
            .map(|&k| (k as f64 * scale, (k as f64 + len) * scale))
            .collect()
    }
}

fn cartesian(ranges: &[std::ops::RangeInclusive<i64>]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for range in ranges {
        let mut next = Vec::with_capacity(out.len() * range.clone().count());
        for prefix in &out {
            for k in range.clone() {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn haar_grids(grid_exponent: u32) -> (Vec<f64>, Vec<f64>) {
    let n = 1usize << grid_exponent;
    let half = n / 2;
    let father = (0..=n).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
    let mother = (0..=n)
        .map(|i| {
            if i < half {
                1.0
            } else if i < n {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    (father, mother)
}

/// φ at every dyadic point `i · 2^-G` of `[0, L]`.
///
/// Integer-point values come from the eigenvector of the refinement matrix
/// `M[a][b] = √2 h_{2a-b}` for eigenvalue 1, normalized to sum 1. Each finer
/// dyadic level is then filled from the one above with the refinement
/// equation, which leaves already computed nodes untouched.
fn cascade(filter: &[f64], grid_exponent: u32) -> Vec<f64> {
    let len = filter.len() - 1;
    let scale = 1usize << grid_exponent;
    let mut grid = vec![0.0; len * scale + 1];

    let interior = len - 1;
    let sqrt2 = std::f64::consts::SQRT_2;
    let tap = |m: isize| -> f64 {
        if m < 0 || m as usize > len {
            0.0
        } else {
            filter[m as usize]
        }
    };
    let mut v = vec![1.0 / interior as f64; interior];
    for _ in 0..200 {
        let mut next = vec![0.0; interior];
        for (a, slot) in next.iter_mut().enumerate() {
            let xa = a as isize + 1;
            *slot = (0..interior)
                .map(|b| sqrt2 * tap(2 * xa - (b as isize + 1)) * v[b])
                .sum();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if delta < 1e-17 {
            break;
        }
    }
    for (a, value) in v.iter().enumerate() {
        grid[(a + 1) * scale] = *value;
    }

    for level in 1..=grid_exponent {
        let stride = scale >> level;
        let parent = stride * 2;
        let mut i = stride;
        while i < len * scale {
            // φ(x) = √2 Σ h_m φ(2x - m); 2x - m sits on the parent grid.
            let mut acc = 0.0;
            for (m, &h) in filter.iter().enumerate() {
                let pos = 2 * i as isize - (m * scale) as isize;
                if pos > 0 && (pos as usize) < len * scale {
                    debug_assert_eq!(pos as usize % parent, 0);
                    acc += h * grid[pos as usize];
                }
            }
            grid[i] = sqrt2 * acc;
            i += parent;
        }
    }
    grid
}

fn mother_from_father(filter: &[f64], father: &[f64], grid_exponent: u32) -> Vec<f64> {
    let len = filter.len() - 1;
    let scale = 1usize << grid_exponent;
    let sqrt2 = std::f64::consts::SQRT_2;
    let highpass: Vec<f64> = (0..=len)
        .map(|m| if m % 2 == 0 { filter[len - m] } else { -filter[len - m] })
        .collect();
    (0..father.len())
        .map(|i| {
            let mut acc = 0.0;
            for (m, &g) in highpass.iter().enumerate() {
                let pos = 2 * i as isize - (m * scale) as isize;
                if pos > 0 && (pos as usize) < len * scale {
                    acc += g * father[pos as usize];
                }
            }
            sqrt2 * acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haar() -> WaveletBasis {
        WaveletBasis::build(Family::Haar, 8).unwrap()
    }

    fn db2() -> WaveletBasis {
        WaveletBasis::build(Family::Daubechies(2), 12).unwrap()
    }

    fn trapezoid(values: &[f64], step: f64) -> f64 {
        let inner: f64 = values[1..values.len() - 1].iter().sum();
        step * (inner + 0.5 * (values[0] + values[values.len() - 1]))
    }

    #[test]
    fn family_parsing() {
        assert_eq!("haar".parse::<Family>().unwrap(), Family::Haar);
        assert_eq!("daubechies-4".parse::<Family>().unwrap(), Family::Daubechies(4));
        assert_eq!("db10".parse::<Family>().unwrap(), Family::Daubechies(10));
        assert!("daubechies-11".parse::<Family>().is_err());
        assert!("coiflet-2".parse::<Family>().is_err());
    }

    #[test]
    fn grid_exponent_range() {
        assert!(matches!(WaveletBasis::build(Family::Haar, 5), Err(Error::GridExponent(5))));
        assert!(matches!(WaveletBasis::build(Family::Haar, 17), Err(Error::GridExponent(17))));
        assert!(WaveletBasis::build(Family::Haar, 6).is_ok());
    }

    #[test]
    fn haar_closed_form() {
        let b = haar();
        assert_eq!(b.support_half_width(), 1.0);
        assert_eq!(b.phi(0.0), 1.0);
        assert_eq!(b.phi(0.999), 1.0);
        assert_eq!(b.phi(1.0), 0.0);
        assert_eq!(b.psi(0.25), 1.0);
        assert_eq!(b.psi(0.75), -1.0);
        assert_eq!(b.psi(-0.1), 0.0);
    }

    #[test]
    fn db2_filter_matches_closed_form() {
        let b = db2();
        let s3 = 3f64.sqrt();
        let denom = 4.0 * std::f64::consts::SQRT_2;
        let expected = [(1.0 + s3) / denom, (3.0 + s3) / denom, (3.0 - s3) / denom, (1.0 - s3) / denom];
        for (h, e) in b.filter().iter().zip(expected) {
            assert!((h - e).abs() < 1e-15, "{h} vs {e}");
        }
        assert_eq!(b.support_length(), 3);
        assert_eq!(b.support_half_width(), 3.0);
        let energy: f64 = b.filter().iter().map(|h| h * h).sum();
        assert!((energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_sum_rules_all_orders() {
        for n in 2..=10u8 {
            let b = WaveletBasis::build(Family::Daubechies(n), 8).unwrap();
            let h = b.filter();
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12, "db{n} sum {sum}");
            for shift in 0..n as usize {
                let dot: f64 = (0..h.len() - 2 * shift).map(|m| h[m] * h[m + 2 * shift]).sum();
                let target = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-12, "db{n} shift {shift}: {dot}");
            }
        }
    }

    #[test]
    fn integrals_on_grid() {
        for family in [Family::Haar, Family::Daubechies(2), Family::Daubechies(5)] {
            let b = WaveletBasis::build(family, 12).unwrap();
            let tol = 10.0 * b.grid_step();
            let phi_int = trapezoid(b.father_grid(), b.grid_step());
            let psi_int = trapezoid(b.mother_grid(), b.grid_step());
            assert!((phi_int - 1.0).abs() < tol, "{family}: ∫φ = {phi_int}");
            assert!(psi_int.abs() < tol, "{family}: ∫ψ = {psi_int}");
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let b = db2();
        for x in [-0.5, -1e-9, 3.0, 3.5, 10.0] {
            assert_eq!(b.phi(x), 0.0);
            assert_eq!(b.psi(x), 0.0);
        }
        let last = b.father_grid().len() - 1;
        assert!(b.father_grid()[0].abs() < 1e-14);
        assert!(b.father_grid()[last].abs() < 1e-14);
        assert!(b.mother_grid()[last].abs() < 1e-14);
    }

    #[test]
    fn refinement_identity_on_grid() {
        let b = db2();
        let h = b.filter();
        let step = b.grid_step();
        let sqrt2 = std::f64::consts::SQRT_2;
        for i in (0..b.father_grid().len()).step_by(7) {
            let x = i as f64 * step;
            let rhs: f64 = h.iter().enumerate().map(|(m, hm)| hm * b.phi(2.0 * x - m as f64)).sum();
            assert!((b.phi(x) - sqrt2 * rhs).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn db2_father_at_one() {
        // φ(1) = (1 + √3)/2 for DB2.
        let b = db2();
        let expected = (1.0 + 3f64.sqrt()) / 2.0;
        let value = b.evaluate_father(&[0], &[1.0]);
        assert!((value - expected).abs() < 1e-12, "{value}");
        let h = b.filter();
        let rhs: f64 =
            std::f64::consts::SQRT_2 * h.iter().enumerate().map(|(m, hm)| hm * b.phi(2.0 - m as f64)).sum::<f64>();
        assert!((value - rhs).abs() < 1e-6);
    }

    #[test]
    fn evaluate_mother_haar_examples() {
        let b = haar();
        assert_eq!(b.evaluate_mother(&WaveletIndex::d1(0, 0), &[0.25]), 1.0);
        assert_eq!(b.evaluate_mother(&WaveletIndex::d1(2, 1), &[0.3]), 2.0);
        // 2^2 x - 1 outside [0, 1)
        for x in [0.0, 0.2, 0.5, 0.9, -0.3] {
            assert_eq!(b.evaluate_mother(&WaveletIndex::d1(2, 1), &[x]), 0.0);
        }
    }

    #[test]
    fn evaluate_father_haar_examples() {
        let b = haar();
        assert_eq!(b.evaluate_father(&[0], &[0.5]), 1.0);
        assert_eq!(b.evaluate_father(&[3], &[0.5]), 0.0);
        assert_eq!(b.evaluate_father(&[0, 1], &[0.5, 1.5]), 1.0);
    }

    #[test]
    fn tensor_product_in_two_dimensions() {
        let b = db2();
        let idx = WaveletIndex::new(1, vec![0, -1], 0b01);
        let x = [0.7, 0.2];
        let expected = 2.0 * b.psi(2.0 * 0.7) * b.phi(2.0 * 0.2 + 1.0);
        assert!((b.evaluate_mother(&idx, &x) - expected).abs() < 1e-15);
    }

    #[test]
    fn active_indices_examples() {
        let b = haar();
        let idx = b.active_indices(0, 1.0, 1);
        let ks: Vec<i64> = idx.iter().map(|i| i.translate[0]).collect();
        assert_eq!(ks, vec![-1, 0]);
        assert_eq!(b.active_indices(3, 1.0, 1).len(), 16);
        assert_eq!(b.active_indices(1, 1.0, 2).len(), 4 * 4 * 3);

        // DB2 at level 0: support [k, k + 3] meets (-1, 1) iff -4 < k < 1.
        let d = db2();
        let ks: Vec<i64> = d.active_indices(0, 1.0, 1).iter().map(|i| i.translate[0]).collect();
        let brute: Vec<i64> = (-20..20)
            .filter(|&k| {
                let (lo, hi) = (k as f64, k as f64 + 3.0);
                lo < 1.0 && hi > -1.0
            })
            .collect();
        assert_eq!(ks, brute);
    }

    #[test]
    fn active_count_grows_like_two_to_the_level() {
        let b = db2();
        let counts: Vec<usize> = (0..8).map(|j| b.active_indices(j, 1.0, 1).len()).collect();
        for j in 1..8 {
            let ratio = counts[j] as f64 / (2f64.powi(j as i32));
            assert!(ratio > 1.0 && ratio < 6.0, "{counts:?}");
        }
    }

    #[test]
    fn index_location_round_trip() {
        let idx = WaveletIndex::new(3, vec![-5, 2], 0b10);
        let loc = idx.location();
        assert_eq!(loc, vec![-5.0 / 8.0, 2.0 / 8.0 + 1.0 / 16.0]);
        assert_eq!(WaveletIndex::from_location(3, &loc), idx);
    }

    #[test]
    fn sup_norms_are_positive() {
        let b = db2();
        assert!(b.father_sup_norm() > 1.0 && b.father_sup_norm() < 1.5);
        assert!(b.mother_sup_norm() > 1.0 && b.mother_sup_norm() < 2.5);
    }
}
