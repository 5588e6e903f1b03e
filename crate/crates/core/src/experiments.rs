//! Monte-Carlo convergence harness: sample from exact coefficient-space
//! truths, run the estimators, measure the dual-norm risk and fit log-log
//! slopes against the theoretical exponents.
//!
//! Truths live in the Haar basis on `[0, 1]`, so each recipe is an exact
//! piecewise-constant density whose sampler and loss carry no discretization
//! error.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{besov_norm, dual_ipm, extremal_witness, reconstruct, BesovBall, CoefficientTree, UniformGrid};
use crate::error::{Error, Result};
use crate::estimation::{default_levels, estimate, linear_optimal_level, EstimatorConfig, EstimatorKind};
use crate::rates::{classify_regime, EstimatorClass, ProblemSpec, Regime};
use crate::sampling::{tabulate, TabulatedDensity};
use crate::util::{mean, mix64, ols_slope, recip, std_dev, trial_seed};
use crate::wavelet::{Family, WaveletBasis, WaveletIndex};

pub const MIN_TRIALS: usize = 10;
/// Allowed distance between a fitted slope and `−exponent`.
pub const SLOPE_TOLERANCE: f64 = 0.1;
pub const BOOTSTRAP_REPLICATES: usize = 2000;
/// Seed of the dense-profile sign stream.
const SIGN_SEED: u64 = 0x0005_1685_D3A5_E0F1;
/// Default truth depth is the loss level plus this many levels.
const TRUTH_EXTRA_LEVELS: u32 = 3;
/// Dense truths have `2^j` coefficients per level; keep them tabulatable.
const DENSE_MAX_DEPTH: u32 = 16;
/// Estimators use the Haar support `[−1, 1]`, which covers the truths on `[0, 1]`.
const HALF_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthRecipe {
    /// `β_{j,k} = ±a 2^{−j(σ_g + 1/2)}` on every translate in `[0, 1]`.
    DenseProfile,
    /// One coefficient `c 2^{−j(σ_g + 1/2 − 1/p_g)}` per level `j ≥ 1`, at
    /// `k = 2^j − 2`, so the spikes have disjoint supports.
    SparseSpike,
    /// Uniform density plus one mid-level wavelet.
    UniformPerturbed,
}

impl fmt::Display for TruthRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthRecipe::DenseProfile => "dense-profile",
            TruthRecipe::SparseSpike => "sparse-spike",
            TruthRecipe::UniformPerturbed => "uniform-perturbed",
        })
    }
}

impl std::str::FromStr for TruthRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-profile" => Ok(TruthRecipe::DenseProfile),
            "sparse-spike" => Ok(TruthRecipe::SparseSpike),
            "uniform-perturbed" => Ok(TruthRecipe::UniformPerturbed),
            other => Err(Error::InvalidConfig(format!("unknown truth recipe {other:?}"))),
        }
    }
}

/// Truth recipe with optional amplitude and depth overrides. Deserializes
/// from either a bare recipe name or an object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TruthInput")]
pub struct TruthConfig {
    pub recipe: TruthRecipe,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TruthInput {
    Name(TruthRecipe),
    Full {
        recipe: TruthRecipe,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        depth: Option<u32>,
    },
}

impl From<TruthInput> for TruthConfig {
    fn from(t: TruthInput) -> Self {
        match t {
            TruthInput::Name(recipe) => TruthConfig { recipe, amplitude: None, depth: None },
            TruthInput::Full { recipe, amplitude, depth } => TruthConfig { recipe, amplitude, depth },
        }
    }
}

impl From<TruthRecipe> for TruthConfig {
    fn from(recipe: TruthRecipe) -> Self {
        TruthConfig { recipe, amplitude: None, depth: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub truth: TruthConfig,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Loss truncation level; defaults to `j₁(n_max) + 2`.
    #[serde(default)]
    pub j_max: Option<u32>,
    /// Report path prefix; `.csv` and `.svg` are appended.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Thresholded]
}

fn default_k_grid() -> Vec<f64> {
    vec![1.0]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.problem.dim != 1 {
            return Err(Error::UnsupportedDimension(self.problem.dim));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidConfig(format!("trials = {} is below {MIN_TRIALS}", self.trials)));
        }
        if self.n_grid.len() < 3 {
            return Err(Error::InvalidConfig("n grid needs at least 3 sizes for a slope fit".into()));
        }
        if self.n_grid[0] < 2 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("n grid must be strictly increasing and start at 2 or more".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators listed".into()));
        }
        let mut seen = self.estimators.clone();
        seen.sort_by_key(|k| *k as u8);
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::InvalidConfig("estimator listed twice".into()));
        }
        if self.estimators.contains(&EstimatorKind::Thresholded)
            && (self.k_grid.is_empty() || self.k_grid.iter().any(|k| !(*k >= 0.0)))
        {
            return Err(Error::InvalidConfig("k grid must be nonempty with nonnegative entries".into()));
        }
        Ok(())
    }

    fn arms(&self) -> Vec<Arm> {
        let mut arms = Vec::new();
        for &kind in &self.estimators {
            match kind {
                EstimatorKind::Linear => arms.push(Arm { label: "linear".into(), kind, k: 0.0 }),
                EstimatorKind::Thresholded => {
                    for &k in &self.k_grid {
                        let label =
                            if self.k_grid.len() == 1 { "thresholded".to_string() } else { format!("thresholded-K{k}") };
                        arms.push(Arm { label, kind, k });
                    }
                }
            }
        }
        arms
    }
}

#[derive(Debug, Clone)]
struct Arm {
    label: String,
    kind: EstimatorKind,
    k: f64,
}

impl Arm {
    fn config(&self, basis: &Arc<WaveletBasis>, spec: &ProblemSpec, n: usize) -> Result<EstimatorConfig> {
        let cap = (n as f64).log2().floor() as u32;
        Ok(match self.kind {
            EstimatorKind::Linear => {
                let j = match linear_optimal_level(n, spec.sigma_g, spec.p_g, spec.p_d, 1) {
                    Ok(j) => j,
                    Err(_) => default_levels(n, spec.sigma_g, spec.p_g, 1)?.0,
                };
                EstimatorConfig::linear(basis.clone(), j.min(cap), HALF_WIDTH)
            }
            EstimatorKind::Thresholded => {
                let (j0, j1) = default_levels(n, spec.sigma_g, spec.p_g, 1)?;
                EstimatorConfig::thresholded(basis.clone(), j0, j1, self.k, HALF_WIDTH)
            }
        })
    }

    fn class(&self) -> EstimatorClass {
        match self.kind {
            EstimatorKind::Linear => EstimatorClass::Linear,
            EstimatorKind::Thresholded => EstimatorClass::General,
        }
    }
}

/// Coefficient tree of a truth recipe on `[0, 1]` down to level `depth`.
pub fn truth_tree(truth: &TruthConfig, spec: &ProblemSpec, depth: u32) -> Result<CoefficientTree> {
    let sigma = spec.sigma_g;
    let inv_p = recip(spec.p_g);
    let mut tree = CoefficientTree::new(1, depth);
    tree.set_father(vec![0], 1.0);
    match truth.recipe {
        TruthRecipe::DenseProfile => {
            // Σ_j a 2^{−jσ} ≤ 1/2 keeps the density above 1/2.
            let a = truth.amplitude.unwrap_or(0.5 * (1.0 - (-sigma).exp2()));
            for j in 0..=depth {
                let mut rng = ChaCha8Rng::seed_from_u64(SIGN_SEED ^ mix64(j as u64));
                let size = a * (-(j as f64) * (sigma + 0.5)).exp2();
                for k in 0..1i64 << j {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    tree.set_mother(WaveletIndex::d1(j, k), sign * size);
                }
            }
        }
        TruthRecipe::SparseSpike => {
            if sigma < inv_p {
                return Err(Error::Hypothesis(format!("sparse spikes need sigma_g >= 1/p_g, got {sigma} < {inv_p}")));
            }
            let c = truth.amplitude.unwrap_or(0.5);
            for j in 1..=depth {
                let size = c * (-(j as f64) * (sigma + 0.5 - inv_p)).exp2();
                tree.set_mother(WaveletIndex::d1(j, (1i64 << j) - 2), size);
            }
        }
        TruthRecipe::UniformPerturbed => {
            let j = depth.min(3);
            let c = truth.amplitude.unwrap_or(0.5);
            let size = (c * (-(j as f64) * (sigma + 0.5 - inv_p)).exp2()).min(0.5 * (-(j as f64) / 2.0).exp2());
            tree.set_mother(WaveletIndex::d1(j, 1i64 << j.saturating_sub(1)), size);
        }
    }
    Ok(tree)
}

/// A truth with its sampler.
#[derive(Debug, Clone)]
pub struct Truth {
    pub config: TruthConfig,
    pub tree: CoefficientTree,
    pub density: TabulatedDensity,
}

impl Truth {
    /// Builds the recipe to `depth` and tabulates it exactly on `[0, 1]`.
    pub fn build(config: TruthConfig, spec: &ProblemSpec, depth: u32, basis: &WaveletBasis) -> Result<Self> {
        let depth = if config.recipe == TruthRecipe::DenseProfile { depth.min(DENSE_MAX_DEPTH) } else { depth };
        let tree = truth_tree(&config, spec, depth)?;
        let density = tabulate(&tree, basis, (0.0, 1.0), (depth + 1).max(10))?;
        Ok(Truth { config, tree, density })
    }
}

pub fn haar_basis() -> Result<Arc<WaveletBasis>> {
    Ok(Arc::new(WaveletBasis::build(Family::Haar, 10)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskRow {
    pub estimator: String,
    pub n: usize,
    pub mean_risk: f64,
    pub stderr: f64,
    pub risks: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub estimator: String,
    pub slope: f64,
    pub slope_se: f64,
    pub theory_exponent: f64,
    pub regime: Regime,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFitResult {
    pub config: ExperimentConfig,
    /// Estimator-major, then by `n`.
    pub rows: Vec<RiskRow>,
    pub fits: Vec<SlopeFit>,
    pub j_max: u32,
    pub truth_depth: u32,
    /// Exact dual-norm size of the truth above `j_max`, dropped by the loss.
    pub tail: f64,
    pub truth_norm: f64,
    pub truth_fingerprint: u64,
}

impl RateFitResult {
    pub fn rows_for<'a>(&'a self, estimator: &'a str) -> impl Iterator<Item = &'a RiskRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }

    pub fn row(&self, estimator: &str, n: usize) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.n == n)
    }

    pub fn fit(&self, estimator: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.estimator == estimator)
    }

    /// `(estimator, n)` pairs where the mean risk rose by more than two
    /// standard errors over the previous `n`.
    pub fn monotonicity_violations(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for fit in &self.fits {
            let rows: Vec<&RiskRow> = self.rows_for(&fit.estimator).collect();
            for w in rows.windows(2) {
                let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
                if w[1].mean_risk > w[0].mean_risk + slack {
                    out.push((fit.estimator.clone(), w[1].n));
                }
            }
        }
        out
    }

    /// Report CSV: `#` metadata lines, header, one row per `(estimator, n)`
    /// and one `fit` row per estimator.
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "# truth={} seed={} trials={} j_max={} truth_depth={}", c.truth.recipe, c.seed, c.trials, self.j_max, self.truth_depth);
        let _ = writeln!(
            out,
            "# problem: D={} sigma_d={} p_d={} q_d={} sigma_g={} p_g={} q_g={}",
            c.problem.dim, c.problem.sigma_d, c.problem.p_d, c.problem.q_d, c.problem.sigma_g, c.problem.p_g, c.problem.q_g
        );
        let _ = writeln!(out, "# truncation tail above j_max: {:.6e}", self.tail);
        let _ = writeln!(out, "# truth generator-ball norm: {:.6e}; fingerprint {:016x}", self.truth_norm, self.truth_fingerprint);
        let _ = writeln!(
            out,
            "# risk is measured at one fixed truth, which lower-bounds the supremum over the generator ball"
        );
        out.push_str("estimator,n,mean_risk,stderr,slope,slope_se,theory_exponent,regime,pass\n");
        for fit in &self.fits {
            for r in self.rows_for(&fit.estimator) {
                let _ = writeln!(
                    out,
                    "{},{},{:.10e},{:.10e},,,{:.10},{},",
                    r.estimator, r.n, r.mean_risk, r.stderr, fit.theory_exponent, fit.regime
                );
            }
        }
        for fit in &self.fits {
            let _ = writeln!(
                out,
                "{},fit,,,{:.10},{:.10},{:.10},{},{}",
                fit.estimator, fit.slope, fit.slope_se, fit.theory_exponent, fit.regime, fit.pass
            );
        }
        out
    }

    /// Log-log risk plot with a dashed theory line per estimator.
    pub fn to_svg(&self) -> String {
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
        let (w, h, m) = (640.0, 480.0, 60.0);
        let points: Vec<(f64, f64)> =
            self.rows.iter().map(|r| ((r.n as f64).log2(), r.mean_risk.max(f64::MIN_POSITIVE).log2())).collect();
        let (x_lo, x_hi) = extent(points.iter().map(|p| p.0));
        let (y_lo, y_hi) = extent(points.iter().map(|p| p.1));
        let (y_lo, y_hi) = (y_lo - 0.5, y_hi + 0.5);
        let sx = |x: f64| m + (x - x_lo) / (x_hi - x_lo).max(1e-12) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y_lo) / (y_hi - y_lo).max(1e-12) * (h - 2.0 * m);

        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(out, "<title>risk vs n ({} truth)</title>", self.config.truth.recipe);
        let _ = writeln!(
            out,
            r##"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="#000"/>"##,
            w - 2.0 * m,
            h - 2.0 * m
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">log2 n</text>"#, w / 2.0, h - 15.0);
        let _ = writeln!(
            out,
            r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">log2 mean risk</text>"#,
            h / 2.0,
            h / 2.0
        );
        for (i, fit) in self.fits.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> = self
                .rows_for(&fit.estimator)
                .map(|r| ((r.n as f64).log2(), r.mean_risk.max(f64::MIN_POSITIVE).log2()))
                .collect();
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline class="risk" data-estimator="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                fit.estimator,
                path.join(" ")
            );
            let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
            let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
            let at = |x: f64| cy - fit.theory_exponent * (x - cx);
            let _ = writeln!(
                out,
                r#"<line class="theory" data-estimator="{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6,4"/>"#,
                fit.estimator,
                sx(x_lo),
                sy(at(x_lo)),
                sx(x_hi),
                sy(at(x_hi))
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{color}">{}: slope {:.3} (theory {:.3})</text>"#,
                m + 10.0,
                m + 20.0 + 18.0 * i as f64,
                fit.estimator,
                fit.slope,
                -fit.theory_exponent
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

/// Writes the report to `path`.
pub fn emit_report(result: &RateFitResult, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => result.to_csv(),
        ReportFormat::Svg => result.to_svg(),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Loss truncation level: the configured one, else `j₁(n_max) + 2`, raised
/// to cover every estimator's top level.
fn loss_level(config: &ExperimentConfig, arms: &[Arm], basis: &Arc<WaveletBasis>) -> Result<u32> {
    let n_max = *config.n_grid.last().expect("validated");
    let mut top = 0;
    for arm in arms {
        top = top.max(arm.config(basis, &config.problem, n_max)?.top_level());
    }
    Ok(match config.j_max {
        Some(j) => j.max(top),
        None => (default_levels(n_max, config.problem.sigma_g, config.problem.p_g, 1)?.1 + 2).max(top),
    })
}

/// Samples, estimates and scores every `(n, trial)`; deterministic for any
/// worker count. On failure the completed sizes are written to the output
/// path (if any) before the error is returned.
pub fn run_convergence(config: &ExperimentConfig) -> Result<RateFitResult> {
    config.validate()?;
    let basis = haar_basis()?;
    let spec = config.problem;
    let arms = config.arms();
    let j_max = loss_level(config, &arms, &basis)?;
    let depth = config.truth.depth.unwrap_or(j_max + TRUTH_EXTRA_LEVELS);
    let truth = Truth::build(config.truth, &spec, depth, &basis)?;
    let loss_ball = spec.discriminator();
    let loss_truth = truth.tree.truncated(j_max);
    let tail = dual_ipm(&truth.tree.sub(&loss_truth)?, &loss_ball)?;

    let mut per_n: Vec<Vec<Vec<f64>>> = Vec::new();
    for &n in &config.n_grid {
        let configs: Vec<EstimatorConfig> =
            arms.iter().map(|a| a.config(&basis, &spec, n)).collect::<Result<_>>()?;
        let trials: Result<Vec<Vec<f64>>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let samples = truth.density.sample(n, trial_seed(config.seed, n as u64, t as u64));
                configs
                    .iter()
                    .map(|c| {
                        let est = estimate(&samples, c)?;
                        dual_ipm(&loss_truth.sub(&est)?.truncated(j_max), &loss_ball)
                    })
                    .collect()
            })
            .collect();
        match trials {
            Ok(t) => per_n.push(t),
            Err(e) => {
                if let Some(path) = &config.output {
                    let partial = assemble(config, &arms, &per_n, j_max, depth, tail, &truth, &spec);
                    let _ = std::fs::write(path.with_extension("partial.csv"), partial.to_csv());
                }
                return Err(e);
            }
        }
    }
    let result = assemble(config, &arms, &per_n, j_max, depth, tail, &truth, &spec);
    if let Some(path) = &config.output {
        emit_report(&result, ReportFormat::Csv, &path.with_extension("csv"))?;
        emit_report(&result, ReportFormat::Svg, &path.with_extension("svg"))?;
    }
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    config: &ExperimentConfig,
    arms: &[Arm],
    per_n: &[Vec<Vec<f64>>],
    j_max: u32,
    depth: u32,
    tail: f64,
    truth: &Truth,
    spec: &ProblemSpec,
) -> RateFitResult {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (a, arm) in arms.iter().enumerate() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, trials) in per_n.iter().enumerate() {
            let n = config.n_grid[i];
            let risks: Vec<f64> = trials.iter().map(|t| t[a]).collect();
            let m = mean(&risks);
            xs.push((n as f64).log2());
            ys.push(m.log2());
            rows.push(RiskRow {
                estimator: arm.label.clone(),
                n,
                mean_risk: m,
                stderr: std_dev(&risks) / (risks.len() as f64).sqrt(),
                risks,
            });
        }
        let (rate, _) = classify_regime(spec, arm.class());
        let (slope, slope_se) = if xs.len() >= 2 {
            let (s, se, _) = ols_slope(&xs, &ys);
            (s, se)
        } else {
            (f64::NAN, f64::NAN)
        };
        fits.push(SlopeFit {
            estimator: arm.label.clone(),
            slope,
            slope_se,
            theory_exponent: rate.exponent,
            regime: rate.regime,
            pass: (slope + rate.exponent).abs() <= SLOPE_TOLERANCE,
        });
    }
    RateFitResult {
        config: config.clone(),
        rows,
        fits,
        j_max,
        truth_depth: depth,
        tail,
        truth_norm: besov_norm(&truth.tree, &spec.generator()),
        truth_fingerprint: truth.tree.fingerprint(),
    }
}

/// Fraction of paired bootstrap replicates in which the mean of
/// `first − second` is positive.
pub fn bootstrap_confidence(first: &[f64], second: &[f64], replicates: usize, seed: u64) -> f64 {
    let diffs: Vec<f64> = first.iter().zip(second).map(|(a, b)| a - b).collect();
    let n = diffs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0usize;
    for _ in 0..replicates {
        let s: f64 = (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum();
        if s > 0.0 {
            wins += 1;
        }
    }
    wins as f64 / replicates as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub linear: f64,
    pub thresholded: f64,
    /// Paired bootstrap confidence that the thresholded risk is lower.
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub result: RateFitResult,
    pub thresholded_label: String,
    pub rows: Vec<ComparisonRow>,
    pub linear_slope: (f64, f64),
    pub thresholded_slope: (f64, f64),
    /// `slope_linear − slope_thresholded`: positive when thresholding decays faster.
    pub slope_gap: f64,
    pub joint_se: f64,
    pub thresholded_faster: bool,
    pub slopes_agree: bool,
}

impl Comparison {
    pub fn row(&self, n: usize) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# linear slope {:.6} ± {:.6}; {} slope {:.6} ± {:.6}; gap {:.6}, joint se {:.6}; thresholded_faster={} slopes_agree={}",
            self.linear_slope.0,
            self.linear_slope.1,
            self.thresholded_label,
            self.thresholded_slope.0,
            self.thresholded_slope.1,
            self.slope_gap,
            self.joint_se,
            self.thresholded_faster,
            self.slopes_agree
        );
        out.push_str("n,linear_risk,thresholded_risk,confidence\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.10e},{:.10e},{:.4}", r.n, r.linear, r.thresholded, r.confidence);
        }
        out
    }
}

/// Runs the linear and (first) thresholded estimator on the same samples
/// and compares risks per `n` and fitted slopes.
pub fn compare_estimators(config: &ExperimentConfig) -> Result<Comparison> {
    if !(config.estimators.contains(&EstimatorKind::Linear) && config.estimators.contains(&EstimatorKind::Thresholded)) {
        return Err(Error::InvalidConfig("comparison needs both the linear and the thresholded estimator".into()));
    }
    let result = run_convergence(config)?;
    let thresholded_label = config.arms().into_iter().find(|a| a.kind == EstimatorKind::Thresholded).expect("listed").label;
    let rows = config
        .n_grid
        .iter()
        .map(|&n| {
            let lin = result.row("linear", n).expect("row");
            let thr = result.row(&thresholded_label, n).expect("row");
            ComparisonRow {
                n,
                linear: lin.mean_risk,
                thresholded: thr.mean_risk,
                confidence: bootstrap_confidence(&lin.risks, &thr.risks, BOOTSTRAP_REPLICATES, config.seed ^ mix64(n as u64)),
            }
        })
        .collect();
    let lin = result.fit("linear").expect("fit");
    let thr = result.fit(&thresholded_label).expect("fit");
    let gap = lin.slope - thr.slope;
    let joint_se = (lin.slope_se.powi(2) + thr.slope_se.powi(2)).sqrt();
    Ok(Comparison {
        linear_slope: (lin.slope, lin.slope_se),
        thresholded_slope: (thr.slope, thr.slope_se),
        slope_gap: gap,
        joint_se,
        thresholded_faster: gap > joint_se,
        slopes_agree: gap.abs() < 2.0 * joint_se,
        rows,
        thresholded_label,
        result,
    })
}

/// Dual-norm value of `diff` and the quadrature `∫ f* · diff` of its
/// extremal witness `f*`, on `2^grid_exponent` midpoint cells of `support`.
pub fn witness_pairing_check(
    diff: &CoefficientTree,
    ball: &BesovBall,
    basis: &WaveletBasis,
    support: (f64, f64),
    grid_exponent: u32,
) -> Result<(f64, f64)> {
    let value = dual_ipm(diff, ball)?;
    let witness = extremal_witness(diff, ball)?;
    let cells = 1usize << grid_exponent;
    let grid = UniformGrid::midpoints(support.0, support.1, cells);
    let f = reconstruct(&witness, basis, &grid)?;
    let g = reconstruct(diff, basis, &grid)?;
    let integral = f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() * grid.step;
    Ok((value, integral))
}
