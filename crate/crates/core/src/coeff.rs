//! Coefficient-space representation of functions and the Besov IPM.
//!
//! A function is stored as its father block `{α_k}` and mother coefficients
//! `{β_λ}` up to a finite level `j_max`. Besov norms and the exact dual IPM
//! are closed-form sequence norms on this representation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{self, conjugate, holder_witness, lp_norm, recip};
use crate::wavelet::{WaveletBasis, WaveletIndex};

/// Closed Besov ball `B^σ_{p,q}(L)` on `R^D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovBall {
    pub sigma: f64,
    #[serde(with = "util::serde_exponent")]
    pub p: f64,
    #[serde(with = "util::serde_exponent")]
    pub q: f64,
    pub radius: f64,
    pub dim: usize,
}

impl BesovBall {
    pub fn new(sigma: f64, p: f64, q: f64, radius: f64, dim: usize) -> Self {
        BesovBall { sigma, p, q, radius, dim }
    }

    /// `2^{j(σ + D(1/2 - 1/p))}`, the weight of level `j` in the norm.
    pub fn level_weight(&self, level: u32) -> f64 {
        let d = self.dim as f64;
        (level as f64 * (self.sigma + d * (0.5 - recip(self.p)))).exp2()
    }

    pub fn p_conjugate(&self) -> f64 {
        conjugate(self.p)
    }

    pub fn q_conjugate(&self) -> f64 {
        conjugate(self.q)
    }

    pub fn contains(&self, tree: &CoefficientTree, slack: f64) -> bool {
        besov_norm(tree, self) <= self.radius * (1.0 + slack)
    }
}

/// Sparse father/mother coefficient map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientTree {
    dim: usize,
    j_max: u32,
    fathers: BTreeMap<Vec<i64>, f64>,
    mothers: BTreeMap<WaveletIndex, f64>,
}

impl CoefficientTree {
    pub fn new(dim: usize, j_max: u32) -> Self {
        CoefficientTree { dim, j_max, fathers: BTreeMap::new(), mothers: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    /// Sets `α_k`; zero values are removed.
    pub fn set_father(&mut self, translate: Vec<i64>, value: f64) {
        debug_assert_eq!(translate.len(), self.dim);
        if value == 0.0 {
            self.fathers.remove(&translate);
        } else {
            self.fathers.insert(translate, value);
        }
    }

    /// Sets `β_λ`, raising `j_max` if needed; zero values are removed.
    pub fn set_mother(&mut self, index: WaveletIndex, value: f64) {
        debug_assert_eq!(index.dim(), self.dim);
        self.j_max = self.j_max.max(index.level);
        if value == 0.0 {
            self.mothers.remove(&index);
        } else {
            self.mothers.insert(index, value);
        }
    }

    pub fn father(&self, translate: &[i64]) -> f64 {
        self.fathers.get(translate).copied().unwrap_or(0.0)
    }

    pub fn mother(&self, index: &WaveletIndex) -> f64 {
        self.mothers.get(index).copied().unwrap_or(0.0)
    }

    pub fn fathers(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.fathers.iter().map(|(k, v)| (k, *v))
    }

    pub fn mothers(&self) -> impl Iterator<Item = (&WaveletIndex, f64)> {
        self.mothers.iter().map(|(k, v)| (k, *v))
    }

    pub fn mothers_at(&self, level: u32) -> impl Iterator<Item = (&WaveletIndex, f64)> {
        let lo = WaveletIndex { level, translate: Vec::new(), orientation: 0 };
        self.mothers
            .range(lo..)
            .take_while(move |(idx, _)| idx.level == level)
            .map(|(k, v)| (k, *v))
    }

    pub fn nnz(&self) -> usize {
        self.fathers.len() + self.mothers.len()
    }

    pub fn is_zero(&self) -> bool {
        self.fathers.values().all(|v| *v == 0.0) && self.mothers.values().all(|v| *v == 0.0)
    }

    /// Drops mother levels above `level` and sets `j_max = level`.
    pub fn truncated(&self, level: u32) -> Self {
        CoefficientTree {
            dim: self.dim,
            j_max: level,
            fathers: self.fathers.clone(),
            mothers: self.mothers.iter().filter(|(k, _)| k.level <= level).map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }

    /// Keeps the entries accepted by `keep`.
    pub fn filter_mothers<F: FnMut(&WaveletIndex, f64) -> bool>(&self, mut keep: F) -> Self {
        CoefficientTree {
            dim: self.dim,
            j_max: self.j_max,
            fathers: self.fathers.clone(),
            mothers: self.mothers.iter().filter(|(k, v)| keep(k, **v)).map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = CoefficientTree::new(self.dim, self.j_max);
        for (k, v) in self.fathers() {
            out.set_father(k.clone(), v * factor);
        }
        for (k, v) in self.mothers() {
            out.set_mother(k.clone(), v * factor);
        }
        out
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut out = self.clone();
        out.j_max = self.j_max.max(other.j_max);
        for (k, v) in other.fathers() {
            let sum = out.father(k) + factor * v;
            out.set_father(k.clone(), sum);
        }
        for (k, v) in other.mothers() {
            let sum = out.mother(k) + factor * v;
            out.set_mother(k.clone(), sum);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `⟨self, other⟩` over fathers and mothers.
    pub fn pairing(&self, other: &Self) -> f64 {
        let fathers: f64 = self.fathers().map(|(k, v)| v * other.father(k)).sum();
        let mothers: f64 = self.mothers().map(|(k, v)| v * other.mother(k)).sum();
        fathers + mothers
    }

    /// Plain `l²` norm of all coefficients.
    pub fn l2_norm(&self) -> f64 {
        lp_norm(self.fathers.values().chain(self.mothers.values()).copied(), 2.0)
    }

    /// Stable 64-bit fingerprint of the stored entries.
    pub fn fingerprint(&self) -> u64 {
        let mut h = util::mix64(self.dim as u64 ^ ((self.j_max as u64) << 32));
        for (k, v) in self.fathers() {
            for &t in k {
                h = util::mix64(h ^ t as u64);
            }
            h = util::mix64(h ^ v.to_bits());
        }
        for (k, v) in self.mothers() {
            h = util::mix64(h ^ k.level as u64 ^ ((k.orientation as u64) << 40));
            for &t in &k.translate {
                h = util::mix64(h ^ t as u64);
            }
            h = util::mix64(h ^ v.to_bits());
        }
        h
    }

    /// Line-oriented text form: a header, then `F k α` and `M j k ε β` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("# besov-tree dim={} jmax={}\n", self.dim, self.j_max);
        let join = |k: &[i64]| k.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
        for (k, v) in self.fathers() {
            let _ = writeln!(out, "F {} {:.16e}", join(k), v);
        }
        for (idx, v) in self.mothers() {
            let _ = writeln!(out, "M {} {} {} {:.16e}", idx.level, join(&idx.translate), idx.orientation, v);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut j_max = 0u32;
        let mut fathers = Vec::new();
        let mut mothers = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let bad = |msg: String| Error::Parse { line, msg };
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("dim=") {
                        dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?);
                    } else if let Some(v) = field.strip_prefix("jmax=") {
                        j_max = v.parse::<u32>().map_err(|e| bad(e.to_string()))?;
                    }
                }
                continue;
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            let parse_k = |s: &str| -> Result<Vec<i64>> {
                s.split(',').map(|t| t.parse::<i64>().map_err(|e| bad(format!("translate {s:?}: {e}")))).collect()
            };
            let parse_v = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| bad(format!("value {s:?}: {e}"))) };
            match parts.as_slice() {
                ["F", k, v] => fathers.push((line, parse_k(k)?, parse_v(v)?)),
                ["M", j, k, e, v] => {
                    let level = j.parse::<u32>().map_err(|e| bad(e.to_string()))?;
                    let orientation = e.parse::<u8>().map_err(|e| bad(e.to_string()))?;
                    mothers.push((line, WaveletIndex { level, translate: parse_k(k)?, orientation }, parse_v(v)?));
                }
                _ => return Err(bad(format!("unrecognized line {trimmed:?}"))),
            }
        }
        let dim = dim
            .or_else(|| fathers.first().map(|f| f.1.len()))
            .or_else(|| mothers.first().map(|m| m.1.dim()))
            .unwrap_or(1);
        let mut tree = CoefficientTree::new(dim, j_max);
        for (line, k, v) in fathers {
            if k.len() != dim {
                return Err(Error::Parse { line, msg: format!("translate has {} entries, expected {dim}", k.len()) });
            }
            tree.set_father(k, v);
        }
        for (line, idx, v) in mothers {
            if idx.dim() != dim || idx.orientation == 0 || (idx.orientation as u32) >= 1u32 << dim {
                return Err(Error::Parse { line, msg: "malformed wavelet index".into() });
            }
            tree.set_mother(idx, v);
        }
        Ok(tree)
    }

    fn level_norms(&self, p: f64) -> Vec<f64> {
        let mut per_level = vec![Vec::new(); self.j_max as usize + 1];
        for (idx, v) in self.mothers() {
            per_level[idx.level as usize].push(v);
        }
        per_level.into_iter().map(|vals| lp_norm(vals, p)).collect()
    }
}

/// `‖α‖_p + ‖{2^{j(σ+D(1/2-1/p))} ‖β_j‖_p}_j‖_q`.
pub fn besov_norm(tree: &CoefficientTree, ball: &BesovBall) -> f64 {
    let ball = BesovBall { dim: tree.dim, ..*ball };
    let father = lp_norm(tree.fathers.values().copied(), ball.p);
    let levels = tree
        .level_norms(ball.p)
        .into_iter()
        .enumerate()
        .map(|(j, n)| ball.level_weight(j as u32) * n);
    father + lp_norm(levels, ball.q)
}

/// `sup { ⟨γ, diff⟩ : besov_norm(γ) ≤ L }` over trees supported where `diff` is.
pub fn dual_ipm(diff: &CoefficientTree, ball: &BesovBall) -> Result<f64> {
    if diff.dim != ball.dim {
        return Err(Error::DimensionMismatch { expected: ball.dim, got: diff.dim });
    }
    let (father, mother) = dual_parts(diff, ball);
    Ok(ball.radius * father.max(mother))
}

fn dual_parts(diff: &CoefficientTree, ball: &BesovBall) -> (f64, f64) {
    let pc = ball.p_conjugate();
    let father = lp_norm(diff.fathers.values().copied(), pc);
    let levels = diff
        .level_norms(pc)
        .into_iter()
        .enumerate()
        .map(|(j, n)| n / ball.level_weight(j as u32));
    (father, lp_norm(levels, ball.q_conjugate()))
}

/// A discriminator on the ball boundary attaining [`dual_ipm`].
pub fn extremal_witness(diff: &CoefficientTree, ball: &BesovBall) -> Result<CoefficientTree> {
    if diff.dim != ball.dim {
        return Err(Error::DimensionMismatch { expected: ball.dim, got: diff.dim });
    }
    if diff.is_zero() {
        return Err(Error::ZeroInput);
    }
    let (father, mother) = dual_parts(diff, ball);
    let mut out = CoefficientTree::new(diff.dim, diff.j_max);
    if father >= mother {
        let keys: Vec<&Vec<i64>> = diff.fathers.keys().collect();
        let vals: Vec<f64> = diff.fathers.values().copied().collect();
        for (k, u) in keys.into_iter().zip(holder_witness(&vals, ball.p)) {
            out.set_father(k.clone(), ball.radius * u);
        }
        return Ok(out);
    }

    let pc = ball.p_conjugate();
    let levels = diff.j_max as usize + 1;
    let mut keys: Vec<Vec<&WaveletIndex>> = vec![Vec::new(); levels];
    let mut vals: Vec<Vec<f64>> = vec![Vec::new(); levels];
    for (idx, v) in diff.mothers() {
        keys[idx.level as usize].push(idx);
        vals[idx.level as usize].push(v);
    }
    let scaled: Vec<f64> =
        vals.iter().enumerate().map(|(j, v)| lp_norm(v.iter().copied(), pc) / ball.level_weight(j as u32)).collect();
    let t = holder_witness(&scaled, ball.q);
    for j in 0..levels {
        if t[j] == 0.0 {
            continue;
        }
        let amplitude = ball.radius * t[j] / ball.level_weight(j as u32);
        for (idx, u) in keys[j].iter().zip(holder_witness(&vals[j], ball.p)) {
            out.set_mother((*idx).clone(), amplitude * u);
        }
    }
    Ok(out)
}

/// `4 A ‖w‖_∞ L (1 - 2^{-(σ - D/p) q'})^{-1/q'}`.
///
/// `‖w‖_∞` is the larger of the sup norms of φ and ψ, raised to the power
/// `D` for tensor products, and `A` is raised to `D` as well; both reduce to
/// the usual one-dimensional constants when `D = 1`.
pub fn sup_norm_bound(ball: &BesovBall, basis: &WaveletBasis) -> Result<f64> {
    let d = ball.dim as f64;
    let d_over_p = d * recip(ball.p);
    if ball.sigma <= d_over_p {
        return Err(Error::BoundInapplicable { sigma: ball.sigma, d_over_p });
    }
    let qc = ball.q_conjugate();
    let gap = ball.sigma - d_over_p;
    let geometric = if qc.is_infinite() { 1.0 } else { (1.0 - (-gap * qc).exp2()).powf(-1.0 / qc) };
    let sup = basis.father_sup_norm().max(basis.mother_sup_norm()).powi(ball.dim as i32);
    let a = basis.support_half_width().powi(ball.dim as i32);
    Ok(4.0 * a * sup * ball.radius * geometric)
}

/// Equally spaced points `start + i · step`, `i < len`, shared by every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    /// `cells + 1` nodes from `lo` to `hi` inclusive.
    pub fn nodes(lo: f64, hi: f64, cells: usize) -> Self {
        UniformGrid { start: lo, step: (hi - lo) / cells as f64, len: cells + 1 }
    }

    /// Midpoints of `cells` equal cells of `[lo, hi]`.
    pub fn midpoints(lo: f64, hi: f64, cells: usize) -> Self {
        let step = (hi - lo) / cells as f64;
        UniformGrid { start: lo + 0.5 * step, step, len: cells }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    /// Indices whose points fall in `[lo, hi]`.
    fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = ((lo - self.start) / self.step).ceil().max(0.0);
        let b = ((hi - self.start) / self.step).floor() + 1.0;
        let b = b.min(self.len as f64).max(0.0);
        let a = a.min(b);
        a as usize..b as usize
    }
}

/// Evaluates `Σ α_k φ_k + Σ β_λ ψ_λ` on the grid (row-major product grid for `D = 2`).
pub fn reconstruct(tree: &CoefficientTree, basis: &WaveletBasis, grid: &UniformGrid) -> Result<Vec<f64>> {
    let dim = tree.dim;
    if !(1..=2).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let len = basis.support_length() as f64;
    let mut out = vec![0.0; grid.len.pow(dim as u32)];

    let mut add = |level: Option<u32>, translate: &[i64], orientation: u8, coeff: f64| {
        let (scale, amp) = match level {
            Some(j) => ((j as f64).exp2(), (0.5 * j as f64).exp2()),
            None => (1.0, 1.0),
        };
        let axes: Vec<(std::ops::Range<usize>, Vec<f64>)> = translate
            .iter()
            .enumerate()
            .map(|(d, &k)| {
                let lo = k as f64 / scale;
                let hi = (k as f64 + len) / scale;
                let range = grid.index_range(lo, hi);
                let is_psi = level.is_some() && orientation >> d & 1 == 1;
                let vals = range
                    .clone()
                    .map(|i| {
                        let u = scale * grid.point(i) - k as f64;
                        amp * if is_psi { basis.psi(u) } else { basis.phi(u) }
                    })
                    .collect();
                (range, vals)
            })
            .collect();
        if dim == 1 {
            let (range, vals) = &axes[0];
            for (i, v) in range.clone().zip(vals) {
                out[i] += coeff * v;
            }
        } else {
            let (r0, v0) = &axes[0];
            let (r1, v1) = &axes[1];
            for (i0, a) in r0.clone().zip(v0) {
                if *a == 0.0 {
                    continue;
                }
                let row = i0 * grid.len;
                for (i1, b) in r1.clone().zip(v1) {
                    out[row + i1] += coeff * a * b;
                }
            }
        }
    };

    for (k, v) in tree.fathers() {
        add(None, k, 0, v);
    }
    for (idx, v) in tree.mothers() {
        add(Some(idx.level), &idx.translate, idx.orientation, v);
    }
    Ok(out)
}

/// Wavelet coefficients of `f` (taken as zero outside `[-T, T]^D`) by the
/// composite midpoint rule at step `2^-quad_exponent`, for every index
/// active on `[-T, T]^D` up to `j_max`.
pub fn decompose<F>(
    f: F,
    basis: &WaveletBasis,
    dim: usize,
    j_max: u32,
    half_width: f64,
    quad_exponent: u32,
) -> Result<CoefficientTree>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(1..=2).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let needed = j_max + 2;
    if quad_exponent < needed {
        return Err(Error::QuadratureTooCoarse { quad: quad_exponent, j_max, needed });
    }
    let cells = (2.0 * half_width * (quad_exponent as f64).exp2()).round() as usize;
    let grid = UniformGrid::midpoints(-half_width, half_width, cells);
    let cell_volume = grid.step.powi(dim as i32);

    let values: Vec<f64> = if dim == 1 {
        grid.points().into_par_iter().map(|x| f(&[x])).collect()
    } else {
        (0..cells * cells)
            .into_par_iter()
            .map(|i| f(&[grid.point(i / cells), grid.point(i % cells)]))
            .collect()
    };

    let len = basis.support_length() as f64;
    let integrate = |level: Option<u32>, translate: &[i64], orientation: u8| -> f64 {
        let (scale, amp) = match level {
            Some(j) => ((j as f64).exp2(), (0.5 * j as f64).exp2()),
            None => (1.0, 1.0),
        };
        let axis = |d: usize, k: i64| -> (std::ops::Range<usize>, Vec<f64>) {
            let range = grid.index_range(k as f64 / scale, (k as f64 + len) / scale);
            let is_psi = level.is_some() && orientation >> d & 1 == 1;
            let vals = range
                .clone()
                .map(|i| {
                    let u = scale * grid.point(i) - k as f64;
                    if is_psi {
                        basis.psi(u)
                    } else {
                        basis.phi(u)
                    }
                })
                .collect();
            (range, vals)
        };
        let total = if dim == 1 {
            let (r, w) = axis(0, translate[0]);
            r.zip(w).map(|(i, w)| values[i] * w).sum::<f64>()
        } else {
            let (r0, w0) = axis(0, translate[0]);
            let (r1, w1) = axis(1, translate[1]);
            let mut acc = 0.0;
            for (i0, a) in r0.zip(&w0) {
                if *a == 0.0 {
                    continue;
                }
                let row = &values[i0 * cells..(i0 + 1) * cells];
                let inner: f64 = r1.clone().zip(&w1).map(|(i1, b)| row[i1] * b).sum();
                acc += a * inner;
            }
            acc
        };
        amp * total * cell_volume
    };

    let mut tree = CoefficientTree::new(dim, j_max);
    let fathers: Vec<(Vec<i64>, f64)> = basis
        .active_father_translates(half_width, dim)
        .into_par_iter()
        .map(|k| {
            let v = integrate(None, &k, 0);
            (k, v)
        })
        .collect();
    for (k, v) in fathers {
        tree.set_father(k, v);
    }
    for j in 0..=j_max {
        let coeffs: Vec<(WaveletIndex, f64)> = basis
            .active_indices(j, half_width, dim)
            .into_par_iter()
            .map(|idx| {
                let v = integrate(Some(j), &idx.translate, idx.orientation);
                (idx, v)
            })
            .collect();
        for (idx, v) in coeffs {
            tree.set_mother(idx, v);
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::Family;

    fn haar() -> WaveletBasis {
        WaveletBasis::build(Family::Haar, 8).unwrap()
    }

    #[test]
    fn besov_norm_examples() {
        let ball = BesovBall::new(1.0, 2.0, 2.0, 1.0, 1);
        assert_eq!(besov_norm(&CoefficientTree::new(1, 3), &ball), 0.0);

        let mut t = CoefficientTree::new(1, 0);
        t.set_father(vec![0], 1.0);
        assert_eq!(besov_norm(&t, &ball), 1.0);

        let mut t = CoefficientTree::new(1, 2);
        t.set_mother(WaveletIndex::d1(2, 0), 1.0);
        let ball = BesovBall::new(1.0, 2.0, 3.0, 1.0, 1);
        assert!((besov_norm(&t, &ball) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dual_ipm_examples() {
        let ball = BesovBall::new(1.0, 2.0, 2.0, 1.0, 1);
        assert_eq!(dual_ipm(&CoefficientTree::new(1, 3), &ball).unwrap(), 0.0);
        let mut t = CoefficientTree::new(1, 3);
        t.set_mother(WaveletIndex::d1(3, 2), 0.5);
        assert!((dual_ipm(&t, &ball).unwrap() - 0.0625).abs() < 1e-15);
        let wrong_dim = BesovBall { dim: 2, ..ball };
        assert!(matches!(dual_ipm(&t, &wrong_dim), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_entry_witness() {
        let ball = BesovBall::new(1.0, 2.0, 2.0, 1.5, 1);
        let mut t = CoefficientTree::new(1, 3);
        let idx = WaveletIndex::d1(3, -1);
        t.set_mother(idx.clone(), -0.25);
        let w = extremal_witness(&t, &ball).unwrap();
        assert_eq!(w.nnz(), 1);
        let expected = -1.5 * (-3.0f64 * (1.0 + 0.5 - 0.5)).exp2();
        assert!((w.mother(&idx) - expected).abs() < 1e-15);
        assert!((w.pairing(&t) - dual_ipm(&t, &ball).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn one_level_witness_shapes() {
        let mut t = CoefficientTree::new(1, 2);
        let vals = [0.3, -0.1, 0.2, -0.3];
        for (k, v) in vals.iter().enumerate() {
            t.set_mother(WaveletIndex::d1(2, k as i64), *v);
        }
        // p = ∞ (p' = 1): full sign pattern at the boundary amplitude.
        let ball = BesovBall::new(0.5, f64::INFINITY, 2.0, 1.0, 1);
        let w = extremal_witness(&t, &ball).unwrap();
        let amp = 1.0 / ball.level_weight(2);
        for (k, v) in vals.iter().enumerate() {
            assert!((w.mother(&WaveletIndex::d1(2, k as i64)) - amp * v.signum()).abs() < 1e-15);
        }
        // p = 1 (p' = ∞): concentrated on the first largest entry.
        let ball = BesovBall::new(0.5, 1.0, 2.0, 1.0, 1);
        let w = extremal_witness(&t, &ball).unwrap();
        assert_eq!(w.nnz(), 1);
        assert!(w.mother(&WaveletIndex::d1(2, 0)) > 0.0);
        assert!((w.pairing(&t) - dual_ipm(&t, &ball).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn witness_rejects_zero() {
        let ball = BesovBall::new(1.0, 2.0, 2.0, 1.0, 1);
        assert!(matches!(extremal_witness(&CoefficientTree::new(1, 2), &ball), Err(Error::ZeroInput)));
    }

    #[test]
    fn witness_prefers_father_block_on_tie() {
        let ball = BesovBall::new(0.0, 2.0, 2.0, 1.0, 1);
        let mut t = CoefficientTree::new(1, 0);
        t.set_father(vec![0], 1.0);
        t.set_mother(WaveletIndex::d1(0, 0), 1.0);
        let w = extremal_witness(&t, &ball).unwrap();
        assert_eq!(w.father(&[0]), 1.0);
        assert_eq!(w.mothers().count(), 0);
    }

    #[test]
    fn sup_norm_bound_examples() {
        let ball = BesovBall::new(1.0, 2.0, 2.0, 1.0, 1);
        let b = sup_norm_bound(&ball, &haar()).unwrap();
        assert!((b - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        let big = BesovBall::new(200.0, 2.0, 2.0, 1.0, 1);
        assert!((sup_norm_bound(&big, &haar()).unwrap() - 4.0).abs() < 1e-12);
        let low = BesovBall::new(0.5, 2.0, 2.0, 1.0, 1);
        assert!(matches!(sup_norm_bound(&low, &haar()), Err(Error::BoundInapplicable { .. })));
        let q1 = BesovBall::new(1.0, 2.0, 1.0, 1.0, 1);
        assert_eq!(sup_norm_bound(&q1, &haar()).unwrap(), 4.0);
    }

    #[test]
    fn decompose_haar_father_and_mother() {
        let b = haar();
        let t = decompose(|x: &[f64]| b.phi(x[0]), &b, 1, 3, 1.0, 10).unwrap();
        assert!((t.father(&[0]) - 1.0).abs() < 1e-10);
        assert!(t.fathers().filter(|(k, _)| k[0] != 0).all(|(_, v)| v.abs() < 1e-10));
        assert!(t.mothers().all(|(_, v)| v.abs() < 1e-10));

        let idx = WaveletIndex::d1(2, 1);
        let t = decompose(|x: &[f64]| b.evaluate_mother(&idx, x), &b, 1, 3, 1.0, 10).unwrap();
        assert!((t.mother(&idx) - 1.0).abs() < 1e-10);
        assert!(t.mothers().filter(|(k, _)| **k != idx).all(|(_, v)| v.abs() < 1e-10));
        assert!(t.fathers().all(|(_, v)| v.abs() < 1e-10));
    }

    #[test]
    fn decompose_rejects_coarse_quadrature() {
        let b = haar();
        let err = decompose(|_: &[f64]| 1.0, &b, 1, 6, 1.0, 7).unwrap_err();
        assert!(matches!(err, Error::QuadratureTooCoarse { needed: 8, .. }));
        assert!(matches!(decompose(|_: &[f64]| 1.0, &b, 3, 1, 1.0, 8), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn reconstruct_zero_and_round_trip() {
        let b = WaveletBasis::build(Family::Daubechies(2), 14).unwrap();
        let grid = UniformGrid::nodes(-1.0, 4.0, 500);
        let zero = reconstruct(&CoefficientTree::new(1, 2), &b, &grid).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));

        let t = decompose(|x: &[f64]| b.phi(x[0]), &b, 1, 3, 4.0, 14).unwrap();
        let r = reconstruct(&t, &b, &grid).unwrap();
        let err = grid.points().iter().zip(&r).fold(0.0f64, |m, (x, v)| m.max((v - b.phi(*x)).abs()));
        assert!(err < 1e-6, "sup error {err}");
    }

    #[test]
    fn text_round_trip() {
        let mut t = CoefficientTree::new(2, 3);
        t.set_father(vec![0, -1], 0.125);
        t.set_mother(WaveletIndex::new(2, vec![3, -4], 3), -1.0 / 3.0);
        t.set_mother(WaveletIndex::new(0, vec![0, 0], 1), 1e-300);
        let text = t.to_text();
        assert!(text.starts_with("# besov-tree dim=2 jmax=3\n"));
        assert_eq!(CoefficientTree::from_text(&text).unwrap(), t);
        let err = CoefficientTree::from_text("# besov-tree dim=1 jmax=0\nX 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn mothers_at_selects_level() {
        let mut t = CoefficientTree::new(1, 3);
        for j in 0..4 {
            t.set_mother(WaveletIndex::d1(j, 0), j as f64 + 1.0);
            t.set_mother(WaveletIndex::d1(j, -2), -(j as f64) - 1.0);
        }
        let at2: Vec<f64> = t.mothers_at(2).map(|(_, v)| v).collect();
        assert_eq!(at2, vec![-3.0, 3.0]);
        assert_eq!(t.truncated(1).nnz(), 4);
    }
}
