//! Closed-form minimax rate exponents and phase diagrams.
//!
//! All exponents are for rates of the form `n^{-α}`. Integrability powers
//! may be infinite (`1/∞ = 0`); the fine indices `q` never enter.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::BesovBall;
use crate::error::{Error, Result};
use crate::util::{self, conjugate, recip};

/// Tolerance used to break ties between rate terms.
const TIE: f64 = 1e-12;

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// A full problem instance: dimension, discriminator and generator balls,
/// support half-width and optionally the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dim: usize,
    pub sigma_d: f64,
    #[serde(with = "util::serde_exponent")]
    pub p_d: f64,
    #[serde(with = "util::serde_exponent", default = "two")]
    pub q_d: f64,
    #[serde(default = "one")]
    pub l_d: f64,
    pub sigma_g: f64,
    #[serde(with = "util::serde_exponent")]
    pub p_g: f64,
    #[serde(with = "util::serde_exponent", default = "two")]
    pub q_g: f64,
    #[serde(default = "one")]
    pub l_g: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default)]
    pub n: Option<u64>,
}

impl ProblemSpec {
    /// Instance with `q = 2`, unit radii and `T = 1`.
    pub fn new(dim: usize, sigma_d: f64, p_d: f64, sigma_g: f64, p_g: f64) -> Self {
        ProblemSpec {
            dim,
            sigma_d,
            p_d,
            q_d: 2.0,
            l_d: 1.0,
            sigma_g,
            p_g,
            q_g: 2.0,
            l_g: 1.0,
            half_width: 1.0,
            n: None,
        }
    }

    /// Checks the domain: exponents in `[1, ∞]`, nonnegative smoothness,
    /// positive radii and half-width, `D ≥ 1`.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        for (name, v) in [("p_d", self.p_d), ("q_d", self.q_d), ("p_g", self.p_g), ("q_g", self.q_g)] {
            if !(v >= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must lie in [1, inf]")));
            }
        }
        for (name, v) in [("sigma_d", self.sigma_d), ("sigma_g", self.sigma_g)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        for (name, v) in [("l_d", self.l_d), ("l_g", self.l_g), ("half_width", self.half_width)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn discriminator(&self) -> BesovBall {
        BesovBall::new(self.sigma_d, self.p_d, self.q_d, self.l_d, self.dim)
    }

    pub fn generator(&self) -> BesovBall {
        BesovBall::new(self.sigma_g, self.p_g, self.q_g, self.l_g, self.dim)
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }

    pub fn hypotheses(&self) -> Hypotheses {
        let d = self.d();
        Hypotheses {
            sigma_g_at_least_d_over_p_g: self.sigma_g >= d * recip(self.p_g),
            p_d_conjugate_at_least_p_g: conjugate(self.p_d) >= self.p_g,
            sparse_denominator_positive: 2.0 * self.sigma_g + d * (1.0 - 2.0 * recip(self.p_g)) > 0.0,
            total_smoothness: self.sigma_d + self.sigma_g > d * (recip(self.p_d) + recip(self.p_g) - 1.0),
            linear_total_smoothness: self.sigma_d + self.sigma_g > d * (recip(self.p_d) + recip(self.p_g)),
        }
    }
}

/// Which theorem preconditions hold for a [`ProblemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hypotheses {
    pub sigma_g_at_least_d_over_p_g: bool,
    pub p_d_conjugate_at_least_p_g: bool,
    pub sparse_denominator_positive: bool,
    /// `σ_d + σ_g > D(1/p_d + 1/p_g − 1)`.
    pub total_smoothness: bool,
    /// `σ_d + σ_g > D(1/p_d + 1/p_g)`, needed by linear estimators.
    pub linear_total_smoothness: bool,
}

impl Hypotheses {
    /// Preconditions of the general upper and lower bounds.
    pub fn general(&self) -> bool {
        self.sigma_g_at_least_d_over_p_g && self.p_d_conjugate_at_least_p_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Parametric,
    Dense,
    Sparse,
    Infeasible,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Parametric => "parametric",
            Regime::Dense => "dense",
            Regime::Sparse => "sparse",
            Regime::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorClass {
    General,
    Linear,
}

impl fmt::Display for EstimatorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorClass::General => "general",
            EstimatorClass::Linear => "linear",
        })
    }
}

impl std::str::FromStr for EstimatorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "general" | "nonlinear" => Ok(EstimatorClass::General),
            "linear" => Ok(EstimatorClass::Linear),
            other => Err(Error::InvalidConfig(format!("unknown estimator class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    /// `α` clamped to `[0, 1/2]`; zero when infeasible.
    pub exponent: f64,
    /// Unclamped minimum of the rate terms.
    pub raw: f64,
    pub regime: Regime,
    /// The three rate terms (parametric, dense, sparse). A sparse term with
    /// a nonpositive denominator is reported as `+∞` and excluded.
    pub terms: [f64; 3],
    /// Whether the known matching bounds differ by a polylogarithmic factor.
    pub log_factor: bool,
    pub hypotheses: Hypotheses,
}

fn classify(terms: [f64; 3], infeasible: bool, hypotheses: Hypotheses) -> RateResult {
    let raw = terms.iter().copied().fold(f64::INFINITY, f64::min);
    let regime = if infeasible || raw <= 0.0 {
        Regime::Infeasible
    } else if terms[0] - raw <= TIE {
        Regime::Parametric
    } else if terms[1] - raw <= TIE {
        Regime::Dense
    } else {
        Regime::Sparse
    };
    let exponent = if regime == Regime::Infeasible { 0.0 } else { raw.clamp(0.0, 0.5) };
    RateResult {
        exponent,
        raw,
        regime,
        terms,
        log_factor: matches!(regime, Regime::Dense | Regime::Sparse),
        hypotheses,
    }
}

fn dense_term(spec: &ProblemSpec) -> f64 {
    (spec.sigma_g + spec.sigma_d) / (2.0 * spec.sigma_g + spec.d())
}

fn general_sparse_term(spec: &ProblemSpec) -> f64 {
    let d = spec.d();
    let den = 2.0 * spec.sigma_g + d * (1.0 - 2.0 * recip(spec.p_g));
    if den <= 0.0 {
        return f64::INFINITY;
    }
    (spec.sigma_g + spec.sigma_d + d * (1.0 - recip(spec.p_g) - recip(spec.p_d))) / den
}

fn linear_sparse_term(spec: &ProblemSpec) -> f64 {
    let d = spec.d();
    let inv_pdc = recip(conjugate(spec.p_d));
    let den = 2.0 * spec.sigma_g + d - 2.0 * d * recip(spec.p_g) + 2.0 * d * inv_pdc;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    (spec.sigma_g + spec.sigma_d - d * recip(spec.p_g) + d * inv_pdc) / den
}

/// `α = min{1/2, (σ_g+σ_d)/(2σ_g+D), (σ_g+σ_d+D(1−1/p_g−1/p_d))/(2σ_g+D(1−2/p_g))}`.
///
/// The formula value is returned even when the hypotheses fail; check
/// [`RateResult::hypotheses`].
pub fn minimax_exponent(spec: &ProblemSpec) -> RateResult {
    let terms = [0.5, dense_term(spec), general_sparse_term(spec)];
    classify(terms, false, spec.hypotheses())
}

/// Exponent `η` of the GAN upper bound: the same as [`minimax_exponent`].
pub fn gan_exponent(spec: &ProblemSpec) -> f64 {
    minimax_exponent(spec).exponent
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBounds {
    pub dense: f64,
    pub sparse: f64,
    /// The sparse bound is in terms of `n / log n` rather than `n`.
    pub sparse_has_log: bool,
}

/// Exponents of the dense and sparse lower-bound constructions.
pub fn lower_bound_exponents(spec: &ProblemSpec) -> Result<LowerBounds> {
    let d = spec.d();
    if spec.sigma_g < d * recip(spec.p_g) {
        return Err(Error::Hypothesis(format!(
            "sigma_g = {} is below D/p_g = {}",
            spec.sigma_g,
            d * recip(spec.p_g)
        )));
    }
    let sparse = (spec.sigma_g + spec.sigma_d + d - d * recip(spec.p_g) - d * recip(spec.p_d))
        / (2.0 * spec.sigma_g + d - 2.0 * d * recip(spec.p_g));
    Ok(LowerBounds { dense: dense_term(spec), sparse, sparse_has_log: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearRate {
    pub rate: RateResult,
    /// `σ_g − D(1/p_g + 1/p_d)` as printed in the effective-smoothness form.
    pub effective_sigma_g: f64,
    /// `(σ_g′ + σ_d)/(2σ_g′ + D)` with the printed `σ_g′`.
    pub effective_exponent: f64,
}

/// Minimax exponent over linear estimators.
///
/// Infeasible whenever `σ_d + σ_g ≤ D(1/p_d + 1/p_g)`, the total-smoothness
/// requirement for linear estimators, in addition to `α ≤ 0`.
///
/// The effective-smoothness rewrite is reported verbatim. Substituting
/// `σ_g′ + D` rather than `σ_g′` into the dense formula is what reproduces
/// the third term; see the tests.
pub fn linear_exponent(spec: &ProblemSpec) -> LinearRate {
    let hypotheses = spec.hypotheses();
    let terms = [0.5, dense_term(spec), linear_sparse_term(spec)];
    let rate = classify(terms, !hypotheses.linear_total_smoothness, hypotheses);
    let d = spec.d();
    let effective_sigma_g = spec.sigma_g - d * (recip(spec.p_g) + recip(spec.p_d));
    let effective_exponent = (effective_sigma_g + spec.sigma_d) / (2.0 * effective_sigma_g + d);
    LinearRate { rate, effective_sigma_g, effective_exponent }
}

/// Signed distances to the regime boundaries (positive on the feasible /
/// dense / non-parametric side respectively).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `σ_d + σ_g − D(1/p_d + 1/p_g − 1)`, or the linear threshold for linear.
    pub infeasible_margin: f64,
    /// Sparse term minus dense term: positive when the dense term governs.
    pub sparse_dense_margin: f64,
    /// `1/2 − min(dense, sparse)`: positive when the rate is slower than parametric.
    pub parametric_margin: f64,
}

/// Regime with boundary diagnostics for either estimator class.
pub fn classify_regime(spec: &ProblemSpec, class: EstimatorClass) -> (RateResult, Diagnostics) {
    let d = spec.d();
    let total = spec.sigma_d + spec.sigma_g;
    let (rate, threshold) = match class {
        EstimatorClass::General => {
            let mut rate = minimax_exponent(spec);
            if !rate.hypotheses.total_smoothness {
                rate.regime = Regime::Infeasible;
                rate.exponent = 0.0;
                rate.log_factor = false;
            }
            (rate, d * (recip(spec.p_d) + recip(spec.p_g) - 1.0))
        }
        EstimatorClass::Linear => (linear_exponent(spec).rate, d * (recip(spec.p_d) + recip(spec.p_g))),
    };
    let diagnostics = Diagnostics {
        infeasible_margin: total - threshold,
        sparse_dense_margin: rate.terms[2] - rate.terms[1],
        parametric_margin: 0.5 - rate.terms[1].min(rate.terms[2]),
    };
    (rate, diagnostics)
}

/// Grid of regimes over `(σ_d, σ_g)`.
#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub dim: usize,
    pub p_d: f64,
    pub p_g: f64,
    pub class: EstimatorClass,
    /// Cell centres along each axis.
    pub sigma_d: Vec<f64>,
    pub sigma_g: Vec<f64>,
    /// Row-major in `σ_d` (outer) then `σ_g` (inner).
    pub cells: Vec<(RateResult, Diagnostics)>,
}

/// Evaluates cell centres of a `resolution × resolution` grid over
/// `(lo, hi]` in each of `σ_d` and `σ_g`.
pub fn phase_diagram(
    dim: usize,
    p_d: f64,
    p_g: f64,
    sigma_d_range: (f64, f64),
    sigma_g_range: (f64, f64),
    resolution: usize,
    class: EstimatorClass,
) -> Result<PhaseDiagram> {
    if resolution == 0 || resolution > 2048 {
        return Err(Error::InvalidConfig(format!("resolution {resolution} outside 1..=2048")));
    }
    let centres = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let step = (hi - lo) / resolution as f64;
        (0..resolution).map(|i| lo + (i as f64 + 0.5) * step).collect()
    };
    let sigma_d = centres(sigma_d_range);
    let sigma_g = centres(sigma_g_range);
    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|i| {
            let spec = ProblemSpec::new(dim, sigma_d[i / resolution], p_d, sigma_g[i % resolution], p_g);
            classify_regime(&spec, class)
        })
        .collect();
    Ok(PhaseDiagram { dim, p_d, p_g, class, sigma_d, sigma_g, cells })
}

impl PhaseDiagram {
    pub fn cell(&self, i_d: usize, i_g: usize) -> &(RateResult, Diagnostics) {
        &self.cells[i_d * self.sigma_g.len() + i_g]
    }

    pub fn count(&self, regime: Regime) -> usize {
        self.cells.iter().filter(|(r, _)| r.regime == regime).count()
    }

    /// CSV with header `sigma_d,sigma_g,exponent,regime`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma_d,sigma_g,exponent,regime\n");
        for (i, sd) in self.sigma_d.iter().enumerate() {
            for (j, sg) in self.sigma_g.iter().enumerate() {
                let (r, _) = self.cell(i, j);
                let _ = writeln!(out, "{sd:.6},{sg:.6},{:.12},{}", r.exponent, r.regime);
            }
        }
        out
    }

    /// Heat map of the exponent with the analytic regime boundaries overlaid.
    pub fn to_svg(&self) -> String {
        let size = 480.0;
        let margin = 50.0;
        let nd = self.sigma_d.len();
        let ng = self.sigma_g.len();
        let cw = size / nd as f64;
        let ch = size / ng as f64;
        let (d_lo, d_hi) = axis_extent(&self.sigma_d);
        let (g_lo, g_hi) = axis_extent(&self.sigma_g);
        let to_x = |sd: f64| margin + (sd - d_lo) / (d_hi - d_lo) * size;
        let to_y = |sg: f64| margin + size - (sg - g_lo) / (g_hi - g_lo) * size;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = size + 2.0 * margin,
            h = size + 2.0 * margin
        );
        let _ = writeln!(
            out,
            r#"<title>{} phase diagram, D={}, p_d={}, p_g={}</title>"#,
            self.class, self.dim, self.p_d, self.p_g
        );
        for i in 0..nd {
            for j in 0..ng {
                let (r, _) = self.cell(i, j);
                let fill = if r.regime == Regime::Infeasible {
                    "#808080".to_string()
                } else {
                    let t = (r.exponent / 0.5).clamp(0.0, 1.0);
                    let red = (68.0 + t * (253.0 - 68.0)) as u8;
                    let green = (1.0 + t * (231.0 - 1.0)) as u8;
                    let blue = (84.0 + t * (37.0 - 84.0)) as u8;
                    format!("#{red:02x}{green:02x}{blue:02x}")
                };
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                    margin + i as f64 * cw,
                    margin + size - (j as f64 + 1.0) * ch,
                    cw + 0.05,
                    ch + 0.05
                );
            }
        }
        for line in self.boundary_lines() {
            let pts: Vec<String> = line.iter().map(|(sd, sg)| format!("{:.3},{:.3}", to_x(*sd), to_y(*sg))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">sigma_d</text>"#,
            margin + size / 2.0,
            size + 1.7 * margin
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{:.1}" text-anchor="middle" font-size="14" transform="rotate(-90 15 {:.1})">sigma_g</text>"#,
            margin + size / 2.0,
            margin + size / 2.0
        );
        out.push_str("</svg>\n");
        out
    }

    /// Analytic boundaries clipped to the plotted range, as polylines in
    /// `(σ_d, σ_g)` coordinates.
    pub fn boundary_lines(&self) -> Vec<Vec<(f64, f64)>> {
        let d = self.dim as f64;
        let (d_lo, d_hi) = axis_extent(&self.sigma_d);
        let (g_lo, g_hi) = axis_extent(&self.sigma_g);
        let samples = 200;
        let mut lines = Vec::new();
        let mut trace = |f: &dyn Fn(f64) -> (f64, f64)| {
            let pts: Vec<(f64, f64)> = (0..=samples)
                .map(|i| f(g_lo + (g_hi - g_lo) * i as f64 / samples as f64))
                .filter(|(sd, sg)| *sd >= d_lo && *sd <= d_hi && *sg >= g_lo && *sg <= g_hi)
                .collect();
            if pts.len() >= 2 {
                lines.push(pts);
            }
        };
        let threshold = match self.class {
            EstimatorClass::General => d * (recip(self.p_d) + recip(self.p_g) - 1.0),
            EstimatorClass::Linear => d * (recip(self.p_d) + recip(self.p_g)),
        };
        trace(&|sg| (threshold - sg, sg));
        // Boundaries where two rate terms coincide, found by bisection in σ_d.
        let (p_d, p_g, dim, class) = (self.p_d, self.p_g, self.dim, self.class);
        let sparse = move |sd: f64, sg: f64| {
            let spec = ProblemSpec::new(dim, sd, p_d, sg, p_g);
            match class {
                EstimatorClass::General => general_sparse_term(&spec),
                EstimatorClass::Linear => linear_sparse_term(&spec),
            }
        };
        let dense = move |sd: f64, sg: f64| dense_term(&ProblemSpec::new(dim, sd, p_d, sg, p_g));
        if class == EstimatorClass::General {
            trace(&|sg| (bisect(|sd| sparse(sd, sg) - dense(sd, sg), d_lo, d_hi), sg));
        }
        trace(&|sg| (bisect(|sd| sparse(sd, sg).min(dense(sd, sg)) - 0.5, d_lo, d_hi), sg));
        lines
    }
}

fn axis_extent(centres: &[f64]) -> (f64, f64) {
    let step = if centres.len() > 1 { centres[1] - centres[0] } else { 1.0 };
    (centres[0] - 0.5 * step, centres[centres.len() - 1] + 0.5 * step)
}

/// Root of `f` on `[lo, hi]` by bisection; NaN when there is no sign change.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let (mut flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return f64::NAN;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn wasserstein_example() {
        let r = minimax_exponent(&ProblemSpec::new(4, 1.0, INF, 0.0, INF));
        assert!((r.exponent - 0.25).abs() < 1e-15);
        assert_eq!(r.regime, Regime::Dense);
        assert!((r.terms[2] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn l2_density_example() {
        let r = minimax_exponent(&ProblemSpec::new(1, 0.0, 2.0, 2.0, 2.0));
        assert!((r.exponent - 0.4).abs() < 1e-15);
        assert_eq!(r.regime, Regime::Dense);
        assert!((r.terms[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sobolev_dense_term() {
        for (sd, sg) in [(0.5, 1.0), (1.0, 3.0), (0.0, 0.7)] {
            let r = minimax_exponent(&ProblemSpec::new(1, sd, 2.0, sg, 2.0));
            assert!((r.terms[1] - (sg + sd) / (2.0 * sg + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn lower_bound_examples() {
        let spec = ProblemSpec::new(1, 0.0, 2.0, 2.0, 2.0);
        let lb = lower_bound_exponents(&spec).unwrap();
        assert!((lb.dense - 0.4).abs() < 1e-15 && (lb.sparse - 0.5).abs() < 1e-15 && lb.sparse_has_log);
        assert!((lb.sparse - minimax_exponent(&spec).terms[2]).abs() < 1e-15);

        let inf = ProblemSpec::new(2, 0.3, 1.5, 1.2, INF);
        let lb = lower_bound_exponents(&inf).unwrap();
        // Same denominator as the dense term.
        assert!((lb.sparse * (2.0 * 1.2 + 2.0) - (1.2 + 0.3 + 2.0 - 2.0 / 1.5)).abs() < 1e-12);

        assert!(lower_bound_exponents(&ProblemSpec::new(1, 0.0, 2.0, 0.2, 2.0)).is_err());
    }

    #[test]
    fn linear_examples() {
        let spec = ProblemSpec::new(1, 0.5, INF, 2.0, 1.5);
        let lin = linear_exponent(&spec);
        let expected = (2.0 + 0.5 - 1.0 / 1.5 + 1.0) / (4.0 + 1.0 - 2.0 / 1.5 + 2.0);
        assert!((lin.rate.terms[2] - expected).abs() < 1e-15);

        // Donoho's linear rate at σ_d = 0.
        for (sg, pg) in [(1.0, 1.0), (2.0, 1.5), (3.0, 4.0)] {
            let lin = linear_exponent(&ProblemSpec::new(1, 0.0, INF, sg, pg));
            let donoho = (sg - 1.0 / pg + 1.0) / (2.0 * sg + 1.0 - 2.0 / pg + 2.0);
            assert!((lin.rate.terms[2] - donoho).abs() < 1e-15);
        }
    }

    #[test]
    fn effective_smoothness_form_is_off_by_d() {
        for (d, sd, pd, sg, pg) in [(1, 0.5, 2.0, 2.0, 1.5), (4, 1.0, 1.2, 5.0, 2.0), (2, 0.0, 3.0, 3.0, 1.0)] {
            let spec = ProblemSpec::new(d, sd, pd, sg, pg);
            let lin = linear_exponent(&spec);
            let shifted = lin.effective_sigma_g + d as f64;
            let via_dense_form = (shifted + sd) / (2.0 * shifted + d as f64);
            assert!((via_dense_form - lin.rate.terms[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn parametric_for_very_smooth_discriminators() {
        for sg in [1.0, 2.0, 5.0] {
            let r = minimax_exponent(&ProblemSpec::new(1, 1.5, 2.0, sg, 2.0));
            assert_eq!(r.regime, Regime::Parametric);
            assert_eq!(r.exponent, 0.5);
        }
    }

    #[test]
    fn figure_one_examples() {
        let (r, diag) = classify_regime(&ProblemSpec::new(4, 0.5, 1.2, 0.5, 2.0), EstimatorClass::General);
        assert_eq!(r.regime, Regime::Infeasible);
        assert!(diag.infeasible_margin < 0.0);
        // Sparse/dense boundary σ_g + 3σ_d = 4.
        for sd in [0.2, 0.5, 0.9] {
            let sg = 4.0 - 3.0 * sd;
            let (_, diag) = classify_regime(&ProblemSpec::new(4, sd, 1.2, sg, 2.0), EstimatorClass::General);
            assert!(diag.sparse_dense_margin.abs() < 1e-12, "{diag:?}");
        }
    }

    #[test]
    fn infeasible_below_total_smoothness() {
        let r = minimax_exponent(&ProblemSpec::new(4, 0.1, 1.2, 0.1, 2.0));
        assert_eq!(r.regime, Regime::Infeasible);
        assert_eq!(r.exponent, 0.0);
        assert!(r.raw < 0.0);
    }

    #[test]
    fn degenerate_sparse_denominator_is_excluded() {
        let spec = ProblemSpec::new(2, 0.5, 2.0, 0.5, 1.0);
        let r = minimax_exponent(&spec);
        assert!(r.terms[2].is_infinite());
        assert!(!r.hypotheses.sparse_denominator_positive);
        assert_eq!(r.regime, Regime::Dense);
    }

    #[test]
    fn phase_diagram_limits() {
        assert!(phase_diagram(4, 1.2, 2.0, (0.0, 3.0), (0.0, 3.0), 4096, EstimatorClass::General).is_err());
        let pd = phase_diagram(4, 1.2, 2.0, (0.0, 3.0), (0.0, 3.0), 20, EstimatorClass::General).unwrap();
        assert!(pd.cells.iter().all(|(r, _)| (0.0..=0.5).contains(&r.exponent)));
        let csv = pd.to_csv();
        assert!(csv.starts_with("sigma_d,sigma_g,exponent,regime\n"));
        assert_eq!(csv.lines().count(), 401);
        let svg = pd.to_svg();
        assert!(svg.contains("<polyline"));
    }
}
