//! Lower-bound instance families: sparse and dense wavelet perturbations of
//! a base density, Varshamov–Gilbert codebooks, KL and membership audits,
//! and the resulting Fano bound.
//!
//! Members are `g₀ + c_g Σ_λ τ_λ ψ_λ` over a grid of level-`j` translates
//! spaced `2A` apart, so the perturbation wavelets have disjoint supports and
//! all live where `g₀` equals its plateau value `c`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeff::{besov_norm, decompose, dual_ipm, CoefficientTree};
use crate::error::{Error, Result};
use crate::rates::ProblemSpec;
use crate::util::{lp_norm, recip};
use crate::wavelet::{Family, WaveletBasis, WaveletIndex};

/// Seed of the codebook search.
pub const CODEBOOK_SEED: u64 = 0x5EED_C0DE_B00C_0001;
/// Width of the polynomial roll-off of the smoothed plateau.
const ROLL_OFF: f64 = 1.0;

/// `{−(2^j − 1)A + 2lA : l = 0..2^j − 1}^D`.
pub fn translate_grid(level: u32, half_width: f64, dim: usize) -> Vec<Vec<i64>> {
    let count = 1i64 << level;
    let axis: Vec<i64> =
        (0..count).map(|l| (-((count - 1) as f64) * half_width + 2.0 * l as f64 * half_width).round() as i64).collect();
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&k| {
                    let mut v = prefix.clone();
                    v.push(k);
                    v
                })
            })
            .collect();
    }
    out
}

/// Binary code with pairwise Hamming distance at least `⌈m/8⌉`.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub length: usize,
    words: Vec<Vec<u64>>,
    /// Smallest pairwise distance and a pair attaining it.
    pub min_distance: usize,
    pub min_pair: (usize, usize),
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn bit(&self, word: usize, position: usize) -> bool {
        self.words[word][position / 64] >> (position % 64) & 1 == 1
    }

    pub fn word(&self, word: usize) -> Vec<bool> {
        (0..self.length).map(|i| self.bit(word, i)).collect()
    }

    pub fn hamming(&self, a: usize, b: usize) -> usize {
        hamming(&self.words[a], &self.words[b])
    }
}

fn hamming(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

/// Varshamov–Gilbert code of length `m ≥ 8` with at least `2^{m/8} + 1`
/// words (the all-zeros word first), built by seeded randomized greedy search.
///
/// Candidates flip `⌈m/8⌉` random bits of a random accepted word and are kept
/// when they sit at distance `≥ ⌈m/8⌉` from every accepted word, so the
/// certified minimum distance is exactly the lemma's `⌈m/8⌉`.
pub fn vg_codebook(m: usize) -> Result<Codebook> {
    if m < 8 {
        return Err(Error::CodebookTooShort(m));
    }
    if m > 128 {
        return Err(Error::CodebookTooLarge(m));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Codebook>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(code) = cache.lock().expect("codebook cache poisoned").get(&m) {
        return Ok(code.clone());
    }
    let code = greedy_codebook(m);
    cache.lock().expect("codebook cache poisoned").insert(m, code.clone());
    Ok(code)
}

fn greedy_codebook(m: usize) -> Codebook {
    let target = (m as f64 / 8.0).exp2().ceil() as usize + 1;
    let min_dist = m.div_ceil(8);
    let limbs = m.div_ceil(64);
    for attempt in 0u64.. {
        let mut rng = ChaCha8Rng::seed_from_u64(CODEBOOK_SEED.wrapping_add(attempt));
        let mut words = vec![vec![0u64; limbs]];
        let mut best = (usize::MAX, (0, 0));
        let budget = 64 * target + 1024;
        for _ in 0..budget {
            if words.len() >= target {
                break;
            }
            let mut candidate = words[rng.gen_range(0..words.len())].clone();
            for bit in rand::seq::index::sample(&mut rng, m, min_dist) {
                candidate[bit / 64] ^= 1u64 << (bit % 64);
            }
            let closest = words
                .par_iter()
                .enumerate()
                .map(|(i, w)| (hamming(w, &candidate), i))
                .min()
                .expect("codebook is never empty");
            if closest.0 >= min_dist {
                if closest.0 < best.0 {
                    best = (closest.0, (closest.1, words.len()));
                }
                words.push(candidate);
            }
        }
        if words.len() >= target {
            return Codebook { length: m, words, min_distance: best.0, min_pair: best.1 };
        }
    }
    unreachable!()
}

/// `g₀`: constant `c` on `[−A, A]^D`, vanishing outside `[−B, B]^D`.
///
/// With a Haar basis this is the box `[−A, A]^D` (father coefficients only).
/// For Daubechies bases each axis rolls off to zero over `[A, A + 1]` with a
/// quintic smoothstep.
#[derive(Debug, Clone)]
pub struct BaseDensity {
    pub plateau: f64,
    pub half_width: f64,
    pub support: f64,
    pub dim: usize,
    roll_off: f64,
    pub tree: CoefficientTree,
}

impl BaseDensity {
    pub fn new(basis: &WaveletBasis, dim: usize, j_max: u32) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let a = basis.support_half_width();
        let roll_off = if basis.family() == Family::Haar { 0.0 } else { ROLL_OFF };
        let plateau = 1.0 / (2.0 * a + roll_off).powi(dim as i32);
        let support = a + roll_off;
        let mut base =
            BaseDensity { plateau, half_width: a, support, dim, roll_off, tree: CoefficientTree::new(dim, j_max) };
        if roll_off == 0.0 {
            let k = a as i64;
            let translates = if dim == 1 {
                (-k..k).map(|t| vec![t]).collect::<Vec<_>>()
            } else {
                (-k..k).flat_map(|s| (-k..k).map(move |t| vec![s, t])).collect()
            };
            for t in translates {
                base.tree.set_father(t, plateau);
            }
        } else {
            let quad = (j_max + 4).max(if dim == 1 { 13 } else { 9 });
            let probe = base.clone();
            base.tree = decompose(|x: &[f64]| probe.value(x), basis, dim, j_max, support, quad)?;
        }
        Ok(base)
    }

    fn profile(&self, x: f64) -> f64 {
        let r = x.abs();
        if r <= self.half_width {
            1.0
        } else if r >= self.support || self.roll_off == 0.0 {
            0.0
        } else {
            let t = 1.0 - (r - self.half_width) / self.roll_off;
            t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.roll_off == 0.0 {
            // Half-open box, matching the Haar father functions.
            let inside = x.iter().all(|&v| v >= -self.half_width && v < self.half_width);
            return if inside { self.plateau } else { 0.0 };
        }
        x.iter().map(|&v| self.profile(v)).product::<f64>() * self.plateau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Sparse,
    Dense,
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FamilyKind::Sparse => "sparse",
            FamilyKind::Dense => "dense",
        })
    }
}

/// The candidate bounds on `c_g`; the family uses the smallest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeCaps {
    /// `c / (2‖ψ_ε‖_∞) · 2^{−Dj/2}`: keeps members above `c/2`.
    pub positivity: f64,
    /// Keeps members inside the generator ball.
    pub ball: f64,
    /// Keeps `n · KL ≤ log|T| / 16` through the L² perturbation bound.
    pub kl: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AdversarialFamily {
    pub kind: FamilyKind,
    pub level: u32,
    pub base: BaseDensity,
    pub c_g: f64,
    pub c_d: f64,
    pub caps: AmplitudeCaps,
    pub translates: Vec<Vec<i64>>,
    /// Sign vectors `τ`, one per member.
    taus: Vec<Vec<i8>>,
    codebook: Option<Codebook>,
    pub spec: ProblemSpec,
    pub basis: Arc<WaveletBasis>,
}

/// `j` with `2^j ≈ (n / ln n)^{1/(2σ_g + D − 2D/p_g)}`, at least 1.
pub fn sparse_level(n: u64, spec: &ProblemSpec) -> u32 {
    let d = spec.dim as f64;
    let den = 2.0 * spec.sigma_g + d - 2.0 * d * recip(spec.p_g);
    let n = n as f64;
    ((n / n.ln()).log2() / den).round().max(1.0) as u32
}

/// `j` with `2^j ≈ n^{1/(2σ_g + D)}`, raised so that `2^{Dj} ≥ 8`.
pub fn dense_level(n: u64, spec: &ProblemSpec) -> u32 {
    let d = spec.dim as f64;
    let j = ((n as f64).log2() / (2.0 * spec.sigma_g + d)).round() as u32;
    j.max((3.0 / d).ceil() as u32)
}

pub fn sparse_family(level: u32, spec: &ProblemSpec, basis: Arc<WaveletBasis>) -> Result<AdversarialFamily> {
    build_family(FamilyKind::Sparse, level, spec, basis)
}

pub fn dense_family(level: u32, spec: &ProblemSpec, basis: Arc<WaveletBasis>) -> Result<AdversarialFamily> {
    build_family(FamilyKind::Dense, level, spec, basis)
}

fn build_family(kind: FamilyKind, level: u32, spec: &ProblemSpec, basis: Arc<WaveletBasis>) -> Result<AdversarialFamily> {
    let dim = spec.dim;
    let d = dim as f64;
    if spec.sigma_g < d * recip(spec.p_g) {
        return Err(Error::Hypothesis(format!("sigma_g = {} is below D/p_g = {}", spec.sigma_g, d * recip(spec.p_g))));
    }
    let base = BaseDensity::new(&basis, dim, level)?;
    let base_norm = besov_norm(&base.tree, &spec.generator());
    if base_norm > spec.l_g / 2.0 {
        return Err(Error::Hypothesis(format!(
            "base density norm {base_norm:.6} exceeds L_g/2 = {}; increase l_g",
            spec.l_g / 2.0
        )));
    }
    let translates = translate_grid(level, basis.support_half_width(), dim);
    let m = translates.len();
    let jf = level as f64;

    let (taus, codebook) = match kind {
        FamilyKind::Sparse => {
            let taus: Vec<Vec<i8>> = (0..m)
                .map(|i| {
                    let mut t = vec![0i8; m];
                    t[i] = 1;
                    t
                })
                .collect();
            (taus, None)
        }
        FamilyKind::Dense => {
            let code = vg_codebook(m)?;
            let taus: Vec<Vec<i8>> = (0..code.len())
                .map(|w| (0..m).map(|i| if code.bit(w, i) { 1i8 } else { -1i8 }).collect())
                .collect();
            (taus, Some(code))
        }
    };

    let sup = basis.mother_sup_norm() * basis.father_sup_norm().powi(dim as i32 - 1);
    let positivity = base.plateau / (2.0 * sup) * (-d * jf / 2.0).exp2();
    let (ball_exp, disc_exp) = match kind {
        FamilyKind::Sparse => (
            spec.sigma_g + d / 2.0 - d * recip(spec.p_g),
            spec.sigma_d + d / 2.0 - d * recip(spec.p_d),
        ),
        FamilyKind::Dense => (spec.sigma_g + d / 2.0, spec.sigma_d + d / 2.0),
    };
    let ball = (spec.l_g - base_norm) * (-jf * ball_exp).exp2();
    let kl = spec.n.map(|n| {
        // The log-cardinality is the guaranteed one: exact for the sparse
        // grid, `(m/8) ln 2 ≤ ln|T|` for the codebook.
        let (tau_sq, log_t) = match kind {
            FamilyKind::Sparse => (1.0, (m as f64).ln()),
            FamilyKind::Dense => (m as f64, m as f64 / 8.0 * std::f64::consts::LN_2),
        };
        (base.plateau * log_t / (32.0 * n as f64 * tau_sq)).sqrt()
    });
    let caps = AmplitudeCaps { positivity, ball, kl };
    let c_g = positivity.min(ball).min(kl.unwrap_or(f64::INFINITY));
    let c_d = spec.l_d * (-jf * disc_exp).exp2();

    Ok(AdversarialFamily { kind, level, base, c_g, c_d, caps, translates, taus, codebook, spec: *spec, basis })
}

/// Outcome of a KL check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlReport {
    pub kl_per_sample: f64,
    /// `(2 / c_min) ‖member − g₀‖²_{L²}`, `c_min` the floor of `g₀` where they differ.
    pub bound: f64,
    pub fano_ok: bool,
}

/// `KL(member ‖ g₀)` by the midpoint rule on `2^quad` cells per axis of
/// `region`, with the L² perturbation bound and the Fano condition
/// `n · KL ≤ ln(family_size) / 16`.
pub fn kl_check<M, G>(
    member: M,
    base: G,
    region: &[(f64, f64)],
    n: u64,
    quad_exponent: u32,
    family_size: usize,
) -> Result<KlReport>
where
    M: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let dim = region.len();
    let cells = 1usize << quad_exponent;
    let steps: Vec<f64> = region.iter().map(|(lo, hi)| (hi - lo) / cells as f64).collect();
    let volume: f64 = steps.iter().product();
    let mut kl = 0.0;
    let mut l2 = 0.0;
    let mut floor = f64::INFINITY;
    let mut x = vec![0.0; dim];
    for flat in 0..cells.pow(dim as u32) {
        let mut rest = flat;
        for d in (0..dim).rev() {
            x[d] = region[d].0 + ((rest % cells) as f64 + 0.5) * steps[d];
            rest /= cells;
        }
        let g = member(&x);
        let g0 = base(&x);
        let h = g - g0;
        if h == 0.0 {
            continue;
        }
        if !(g > 0.0) {
            return Err(Error::NonpositiveDensity { x: x[0], value: g });
        }
        if !(g0 > 0.0) {
            return Err(Error::NonpositiveDensity { x: x[0], value: g0 });
        }
        kl += g * (g / g0).ln() * volume;
        l2 += h * h * volume;
        floor = floor.min(g0);
    }
    let bound = if l2 == 0.0 { 0.0 } else { 2.0 / floor * l2 };
    let fano_ok = n as f64 * kl <= (family_size as f64).ln() / 16.0;
    Ok(KlReport { kl_per_sample: kl, bound, fano_ok })
}

/// Results of auditing every member of a family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyAudit {
    pub members: usize,
    pub max_norm: f64,
    pub min_value: f64,
    pub max_mass_error: f64,
    pub max_kl: f64,
    pub kl_bound: f64,
    /// `ln|T| / (16 n)` when `n` is known.
    pub kl_allowance: Option<f64>,
    pub disjoint: bool,
    pub discriminators_in_ball: bool,
    pub passed: bool,
    pub per_member: Vec<MemberAudit>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MemberAudit {
    pub norm: f64,
    pub mass: f64,
    pub min_value: f64,
    pub kl: f64,
}

impl AdversarialFamily {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn tau(&self, member: usize) -> &[i8] {
        &self.taus[member]
    }

    pub fn codebook(&self) -> Option<&Codebook> {
        self.codebook.as_ref()
    }

    /// Perturbation index for slot `i` of the translate grid (orientation ε₁).
    pub fn index(&self, slot: usize) -> WaveletIndex {
        WaveletIndex { level: self.level, translate: self.translates[slot].clone(), orientation: 1 }
    }

    /// Coefficient tree of `g₀ + c_g Σ τ_λ ψ_λ`.
    pub fn member_tree(&self, member: usize) -> CoefficientTree {
        let mut tree = self.base.tree.clone();
        for (slot, &t) in self.taus[member].iter().enumerate() {
            if t != 0 {
                let idx = self.index(slot);
                let v = tree.mother(&idx) + self.c_g * t as f64;
                tree.set_mother(idx, v);
            }
        }
        tree
    }

    /// Pointwise value of a member.
    pub fn member_value(&self, member: usize, x: &[f64]) -> f64 {
        let mut v = self.base.value(x);
        for (slot, &t) in self.taus[member].iter().enumerate() {
            if t != 0 {
                v += self.c_g * t as f64 * self.basis.evaluate_mother(&self.index(slot), x);
            }
        }
        v
    }

    /// Discriminator `c_d Σ τ_λ ψ_λ` from the matching class `Ω_d`.
    pub fn discriminator(&self, member: usize) -> CoefficientTree {
        let mut tree = CoefficientTree::new(self.spec.dim, self.level);
        for (slot, &t) in self.taus[member].iter().enumerate() {
            if t != 0 {
                tree.set_mother(self.index(slot), self.c_d * t as f64);
            }
        }
        tree
    }

    fn difference(&self, a: usize, b: usize) -> CoefficientTree {
        let mut diff = CoefficientTree::new(self.spec.dim, self.level);
        for (slot, (&ta, &tb)) in self.taus[a].iter().zip(&self.taus[b]).enumerate() {
            if ta != tb {
                diff.set_mother(self.index(slot), self.c_g * (ta - tb) as f64);
            }
        }
        diff
    }

    /// Exact Besov-IPM distance between two members.
    pub fn separation(&self, a: usize, b: usize) -> Result<f64> {
        dual_ipm(&self.difference(a, b), &self.spec.discriminator())
    }

    /// Smallest pairwise separation and a pair attaining it.
    ///
    /// Members differ only at level `j`, by `±2c_g` (dense) or `c_g` on two
    /// slots (sparse), so the IPM is increasing in the Hamming distance and
    /// the minimum sits at the closest pair of codewords.
    pub fn min_separation(&self) -> Result<(f64, (usize, usize))> {
        if self.len() < 2 {
            return Err(Error::FanoUnmet("family has a single member, log|T| = 0".into()));
        }
        let pair = match &self.codebook {
            Some(code) => code.min_pair,
            None => (0, 1),
        };
        Ok((self.separation(pair.0, pair.1)?, pair))
    }

    /// Separation certified by the `Ω_d` witness, `‖ψ‖²_{L²} c_g c_d` per differing slot.
    pub fn witness_separation(&self, a: usize, b: usize) -> f64 {
        let disc = self.discriminator(a);
        disc.pairing(&self.difference(a, b))
    }

    /// Minimum over a perturbation support of `g₀ + s c_g ψ_λ`, and the KL
    /// report for that single-slot perturbation.
    fn slot_profile(&self, sign: f64, n: u64, quad: u32) -> Result<(f64, KlReport)> {
        let idx = self.index(0);
        let region = self.basis.mother_support(&idx);
        let member = |x: &[f64]| self.base.value(x) + sign * self.c_g * self.basis.evaluate_mother(&idx, x);
        let report = kl_check(member, |x: &[f64]| self.base.value(x), &region, n, quad, self.len().max(2))?;
        let cells = 1usize << quad;
        let dim = region.len();
        let mut min = f64::INFINITY;
        let mut x = vec![0.0; dim];
        for flat in 0..cells.pow(dim as u32) {
            let mut rest = flat;
            for d in (0..dim).rev() {
                let (lo, hi) = region[d];
                x[d] = lo + ((rest % cells) as f64 + 0.5) * (hi - lo) / cells as f64;
                rest /= cells;
            }
            min = min.min(member(&x));
        }
        Ok((min, report))
    }

    /// Membership, positivity, mass, disjointness and KL audit of every member.
    pub fn audit(&self) -> Result<FamilyAudit> {
        let dim = self.spec.dim;
        let n = self.spec.n.unwrap_or(1);
        let quad = if dim == 1 { 14 } else { 8 };
        let (min_plus, kl_plus) = self.slot_profile(1.0, n, quad)?;
        let (min_minus, kl_minus) = self.slot_profile(-1.0, n, quad)?;

        let generator = self.spec.generator();
        let base_mass = self.base.tree.fathers().map(|(_, v)| v).sum::<f64>();
        // ∫ψ_λ on the tabulated basis: 2^{−Dj/2} ∫ψ ∏∫φ.
        let psi_integral = integral(self.basis.mother_grid(), self.basis.grid_step())
            * integral(self.basis.father_grid(), self.basis.grid_step()).powi(dim as i32 - 1)
            * (-(dim as f64) * self.level as f64 / 2.0).exp2();
        let per_member: Vec<MemberAudit> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let tau = &self.taus[i];
                let plus = tau.iter().filter(|&&t| t > 0).count();
                let minus = tau.iter().filter(|&&t| t < 0).count();
                let mut min_value = f64::INFINITY;
                if plus > 0 {
                    min_value = min_value.min(min_plus);
                }
                if minus > 0 {
                    min_value = min_value.min(min_minus);
                }
                let sum: i64 = tau.iter().map(|&t| t as i64).sum();
                MemberAudit {
                    norm: self.member_norm(tau, &generator),
                    mass: base_mass + self.c_g * sum as f64 * psi_integral,
                    min_value,
                    kl: plus as f64 * kl_plus.kl_per_sample + minus as f64 * kl_minus.kl_per_sample,
                }
            })
            .collect();

        let max_norm = per_member.iter().fold(0.0f64, |m, a| m.max(a.norm));
        let min_value = per_member.iter().fold(f64::INFINITY, |m, a| m.min(a.min_value));
        let max_mass_error = per_member.iter().fold(0.0f64, |m, a| m.max((a.mass - 1.0).abs()));
        let max_kl = per_member.iter().fold(0.0f64, |m, a| m.max(a.kl));
        let slots = self.taus.iter().map(|t| t.iter().filter(|&&v| v != 0).count()).max().unwrap_or(0) as f64;
        let kl_bound = slots * kl_plus.bound.max(kl_minus.bound);
        let kl_allowance = self.spec.n.map(|n| (self.len() as f64).ln() / (16.0 * n as f64));

        let disjoint = self.supports_disjoint();
        let discriminator = self.spec.discriminator();
        let probe = [0, self.len() / 2, self.len() - 1];
        let discriminators_in_ball =
            probe.iter().all(|&i| besov_norm(&self.discriminator(i), &discriminator) <= self.spec.l_d * (1.0 + 1e-12));

        let floor = self.base.plateau / 2.0;
        let passed = max_norm <= self.spec.l_g * (1.0 + 1e-12)
            && min_value >= floor * (1.0 - 1e-9)
            && max_mass_error <= 1e-8
            && disjoint
            && discriminators_in_ball
            && max_kl <= kl_bound * (1.0 + 1e-9) + 1e-300
            && kl_allowance.is_none_or(|a| max_kl <= a);
        Ok(FamilyAudit {
            members: self.len(),
            max_norm,
            min_value,
            max_mass_error,
            max_kl,
            kl_bound,
            kl_allowance,
            disjoint,
            discriminators_in_ball,
            passed,
            per_member,
        })
    }

    fn member_norm(&self, tau: &[i8], generator: &crate::coeff::BesovBall) -> f64 {
        // Only level j differs from g₀; recombine per-level norms directly.
        let p = generator.p;
        let father = lp_norm(self.base.tree.fathers().map(|(_, v)| v), p);
        let levels = (0..=self.level).map(|j| {
            let mut vals: Vec<f64> = self
                .base
                .tree
                .mothers_at(j)
                .filter(|(idx, _)| j != self.level || !self.is_slot(idx))
                .map(|(_, v)| v)
                .collect();
            if j == self.level {
                for (slot, &t) in tau.iter().enumerate() {
                    vals.push(self.base.tree.mother(&self.index(slot)) + self.c_g * t as f64);
                }
            }
            generator.level_weight(j) * lp_norm(vals, p)
        });
        father + lp_norm(levels, generator.q)
    }

    fn is_slot(&self, idx: &WaveletIndex) -> bool {
        idx.orientation == 1 && self.translates.binary_search(&idx.translate).is_ok()
    }

    /// Whether the perturbation supports are pairwise disjoint (up to shared boundaries).
    pub fn supports_disjoint(&self) -> bool {
        let boxes: Vec<Vec<(f64, f64)>> =
            (0..self.translates.len()).map(|s| self.basis.mother_support(&self.index(s))).collect();
        for a in 0..boxes.len() {
            for b in a + 1..boxes.len() {
                let overlap = boxes[a].iter().zip(&boxes[b]).all(|(x, y)| x.0 < y.1 && y.0 < x.1);
                if overlap {
                    return false;
                }
            }
        }
        true
    }
}

fn integral(values: &[f64], step: f64) -> f64 {
    // Left Riemann sum: exact for the half-open Haar steps, trapezoid for
    // continuous grids that vanish at both ends.
    values[..values.len() - 1].iter().sum::<f64>() * step
}

/// `s / 16` with `s` the minimum pairwise separation, provided the Fano KL
/// condition holds for every member at sample size `n`.
pub fn fano_bound(family: &AdversarialFamily, n: u64) -> Result<f64> {
    if family.len() < 2 {
        return Err(Error::FanoUnmet("family has a single member, log|T| = 0".into()));
    }
    let mut spec = family.spec;
    spec.n = Some(n);
    let probe = AdversarialFamily { spec, ..family.clone() };
    let audit = probe.audit()?;
    let allowance = audit.kl_allowance.expect("n is set");
    if audit.max_kl > allowance {
        return Err(Error::FanoUnmet(format!("n KL = {:.3e} exceeds ln|T|/16 = {:.3e}", audit.max_kl * n as f64, allowance * n as f64)));
    }
    let (s, _) = family.min_separation()?;
    Ok(s / 16.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haar() -> Arc<WaveletBasis> {
        Arc::new(WaveletBasis::build(Family::Haar, 10).unwrap())
    }

    fn spec(n: u64) -> ProblemSpec {
        let mut s = ProblemSpec::new(1, 0.5, 2.0, 1.0, 2.0);
        s.l_g = 4.0;
        s.n = Some(n);
        s
    }

    #[test]
    fn translate_grid_examples() {
        assert_eq!(translate_grid(0, 1.0, 1), vec![vec![0]]);
        assert_eq!(translate_grid(1, 1.0, 1), vec![vec![-1], vec![1]]);
        assert_eq!(translate_grid(2, 1.0, 2).len(), 16);
        assert_eq!(translate_grid(1, 3.0, 1), vec![vec![-3], vec![3]]);
    }

    #[test]
    fn codebook_guarantees() {
        assert!(matches!(vg_codebook(7), Err(Error::CodebookTooShort(7))));
        for (m, count, dist) in [(8, 2, 1), (16, 4, 2), (32, 16, 4)] {
            let c = vg_codebook(m).unwrap();
            assert!(c.len() >= count, "m={m}");
            assert!(c.word(0).iter().all(|b| !b));
            let mut min = usize::MAX;
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    min = min.min(c.hamming(a, b));
                }
            }
            assert!(min >= dist);
            assert_eq!(min, c.min_distance);
            assert_eq!(c.hamming(c.min_pair.0, c.min_pair.1), min);
        }
        let a = vg_codebook(24).unwrap();
        let b = vg_codebook(24).unwrap();
        assert_eq!(a.words, b.words);
    }

    #[test]
    fn haar_base_is_box() {
        let b = haar();
        let base = BaseDensity::new(&b, 1, 3).unwrap();
        assert_eq!(base.plateau, 0.5);
        assert_eq!(base.tree.father(&[-1]), 0.5);
        assert_eq!(base.tree.father(&[0]), 0.5);
        assert_eq!(base.tree.mothers().count(), 0);
        assert_eq!(base.value(&[0.99]), 0.5);
        assert_eq!(base.value(&[1.0]), 0.0);
    }

    #[test]
    fn sparse_family_audit() {
        let fam = sparse_family(3, &spec(1 << 12), haar()).unwrap();
        assert_eq!(fam.len(), 8);
        let audit = fam.audit().unwrap();
        assert!(audit.passed, "{audit:?}");
        assert!(audit.min_value >= 0.25);
        let (s, _) = fam.min_separation().unwrap();
        // Ω_d witness gives ‖ψ‖² c_g c_d; the full dual ball gives 2^{1/p_d'} times that.
        let w = fam.witness_separation(0, 1);
        assert!((w - fam.c_g * fam.c_d).abs() < 1e-12);
        assert!((s - 2f64.sqrt() * w).abs() < 1e-12);
        for a in 0..fam.len() {
            for b in 0..a {
                assert!((fam.separation(a, b).unwrap() - s).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sparse_witness_separation_by_quadrature() {
        let fam = sparse_family(2, &spec(1 << 10), haar()).unwrap();
        let disc = fam.index(0);
        let cells = 1 << 14;
        let h = 2.0 / cells as f64;
        let integral: f64 = (0..cells)
            .map(|i| {
                let x = -1.0 + (i as f64 + 0.5) * h;
                let f = fam.c_d * fam.basis.evaluate_mother(&disc, &[x]);
                f * (fam.member_value(0, &[x]) - fam.member_value(1, &[x])) * h
            })
            .sum();
        assert!((integral - fam.c_g * fam.c_d).abs() < 1e-6);
    }

    #[test]
    fn dense_family_audit_and_separation() {
        let fam = dense_family(4, &spec(1 << 12), haar()).unwrap();
        assert!(fam.len() >= 5);
        let audit = fam.audit().unwrap();
        assert!(audit.passed, "{audit:?}");
        let (s, _) = fam.min_separation().unwrap();
        let m = 16.0;
        for a in 0..fam.len() {
            for b in 0..a {
                let sep = fam.separation(a, b).unwrap();
                assert!(sep >= s - 1e-15);
                assert!(sep >= fam.c_g * fam.c_d * m / 8.0);
            }
        }
    }

    #[test]
    fn brute_force_member_checks() {
        let fam = dense_family(3, &spec(1 << 10), haar()).unwrap();
        let audit = fam.audit().unwrap();
        for (i, row) in audit.per_member.iter().enumerate() {
            let tree = fam.member_tree(i);
            assert!((besov_norm(&tree, &fam.spec.generator()) - row.norm).abs() < 1e-12);
            let cells = 4096;
            let h = 2.0 / cells as f64;
            let values: Vec<f64> = (0..cells).map(|c| fam.member_value(i, &[-1.0 + (c as f64 + 0.5) * h])).collect();
            let mass: f64 = values.iter().sum::<f64>() * h;
            assert!((mass - 1.0).abs() < 1e-8);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= fam.base.plateau / 2.0 - 1e-12);
        }
    }

    #[test]
    fn kl_check_examples() {
        let base = |x: &[f64]| if x[0].abs() < 1.0 { 0.5 } else { 0.0 };
        let same = kl_check(base, base, &[(-1.0, 1.0)], 1 << 20, 10, 4).unwrap();
        assert_eq!(same.kl_per_sample, 0.0);
        assert!(same.fano_ok);

        let b = haar();
        let idx = WaveletIndex::d1(2, 1);
        let c_g = 0.05;
        let member = |x: &[f64]| base(x) + c_g * b.evaluate_mother(&idx, x);
        let r = kl_check(member, base, &b.mother_support(&idx), 1, 12, 4).unwrap();
        assert!(r.kl_per_sample > 0.0);
        assert!(r.kl_per_sample <= r.bound + 1e-8);
        assert!((r.bound - 2.0 / 0.5 * c_g * c_g).abs() < 1e-12);

        let negative = |x: &[f64]| base(x) + 1.0 * b.evaluate_mother(&idx, x);
        assert!(matches!(
            kl_check(negative, base, &b.mother_support(&idx), 1, 8, 4),
            Err(Error::NonpositiveDensity { .. })
        ));
    }

    #[test]
    fn fano_bound_requires_two_members() {
        let fam = sparse_family(0, &spec(1 << 10), haar()).unwrap();
        assert_eq!(fam.len(), 1);
        assert!(matches!(fano_bound(&fam, 1 << 10), Err(Error::FanoUnmet(_))));
    }

    #[test]
    fn fano_condition_fails_without_kl_cap() {
        let mut s = spec(1 << 10);
        s.n = None;
        let fam = sparse_family(2, &s, haar()).unwrap();
        assert!(fam.caps.kl.is_none());
        assert!(matches!(fano_bound(&fam, 1 << 20), Err(Error::FanoUnmet(_))));
        let ok = sparse_family(2, &spec(1 << 20), haar()).unwrap();
        assert!(fano_bound(&ok, 1 << 20).unwrap() > 0.0);
    }

    #[test]
    fn hypothesis_and_ball_checks() {
        let mut s = spec(1 << 10);
        s.sigma_g = 0.2;
        assert!(matches!(sparse_family(2, &s, haar()), Err(Error::Hypothesis(_))));
        let mut s = spec(1 << 10);
        s.l_g = 0.5;
        assert!(matches!(dense_family(3, &s, haar()), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn daubechies_family_in_two_dimensions() {
        let b = Arc::new(WaveletBasis::build(Family::Daubechies(2), 10).unwrap());
        let mut s = ProblemSpec::new(2, 0.5, 2.0, 1.5, 2.0);
        s.l_g = 50.0;
        s.n = Some(1 << 12);
        let fam = sparse_family(1, &s, b).unwrap();
        assert_eq!(fam.len(), 4);
        assert!(fam.supports_disjoint());
        let audit = fam.audit().unwrap();
        assert!(audit.passed, "{audit:?}");
    }
}
