//! `besov`: rates, phase diagrams, estimation, experiments and lower-bound
//! audits from the command line.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use besov::adversarial::{dense_family, dense_level, fano_bound, sparse_family, sparse_level, FamilyKind};
use besov::estimation::{default_levels, estimate, linear_optimal_level, EstimatorConfig, EstimatorKind};
use besov::experiments::{compare_estimators, emit_report, run_convergence, ExperimentConfig, ReportFormat};
use besov::rates::{classify_regime, phase_diagram, EstimatorClass, ProblemSpec};
use besov::util::parse_exponent;
use besov::{Error, Family, WaveletBasis};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "besov", version, about = "Wavelet density estimation under Besov IPM losses")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "BESOV_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the minimax and linear exponents and regimes for a problem.
    Rate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: RateFormat,
    },
    /// Regime grid over (sigma_d, sigma_g) as CSV and optional SVG.
    PhaseDiagram {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, value_parser = parse_exponent)]
        p_d: f64,
        #[arg(long, value_parser = parse_exponent)]
        p_g: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma_d_max: f64,
        #[arg(long, default_value_t = 6.0)]
        sigma_g_max: f64,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long, value_enum, default_value = "general")]
        class: ClassArg,
        /// CSV path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Estimate a coefficient tree from a one-column CSV of samples.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "thresholded")]
        estimator: String,
        #[arg(long, default_value = "haar")]
        basis: String,
        #[arg(long)]
        sigma_g: f64,
        #[arg(long, value_parser = parse_exponent, default_value = "2")]
        p_g: f64,
        /// Loss integrability, used for the linear estimator's level.
        #[arg(long, value_parser = parse_exponent, default_value = "2")]
        p_d: f64,
        #[arg(long)]
        j0: Option<u32>,
        #[arg(long)]
        j1: Option<u32>,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        /// Tree path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a convergence experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Report prefix; overrides the config's output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build and audit a lower-bound family.
    Adversarial {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: u64,
        /// Perturbation level; defaults to the rate-optimal schedule for n.
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value = "haar")]
        basis: String,
        /// CSV path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    sigma_d: f64,
    #[arg(long, value_parser = parse_exponent)]
    p_d: f64,
    #[arg(long, value_parser = parse_exponent, default_value = "2")]
    q_d: f64,
    #[arg(long, default_value_t = 1.0)]
    l_d: f64,
    #[arg(long)]
    sigma_g: f64,
    #[arg(long, value_parser = parse_exponent)]
    p_g: f64,
    #[arg(long, value_parser = parse_exponent, default_value = "2")]
    q_g: f64,
    #[arg(long, default_value_t = 1.0)]
    l_g: f64,
}

impl ProblemArgs {
    fn spec(&self) -> besov::Result<ProblemSpec> {
        let mut s = ProblemSpec::new(self.dim, self.sigma_d, self.p_d, self.sigma_g, self.p_g);
        s.q_d = self.q_d;
        s.q_g = self.q_g;
        s.l_d = self.l_d;
        s.l_g = self.l_g;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RateFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    General,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sparse,
    Dense,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn write_out(path: &Option<PathBuf>, text: &str) -> besov::Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Returns `Ok(false)` when an audit fails.
fn run(command: Command) -> besov::Result<bool> {
    match command {
        Command::Rate { problem, format } => {
            let spec = problem.spec()?;
            let general = classify_regime(&spec, EstimatorClass::General);
            let linear = classify_regime(&spec, EstimatorClass::Linear);
            let text = match format {
                RateFormat::Json => {
                    let value = serde_json::json!({
                        "general": {"rate": general.0, "diagnostics": general.1},
                        "linear": {"rate": linear.0, "diagnostics": linear.1},
                    });
                    format!("{}\n", serde_json::to_string_pretty(&value)?)
                }
                RateFormat::Csv => {
                    let mut out = String::from("class,exponent,regime,log_factor,parametric_term,dense_term,sparse_term\n");
                    for (class, (r, _)) in [("general", general), ("linear", linear)] {
                        let _ = writeln!(
                            out,
                            "{class},{:.12},{},{},{:.12},{:.12},{:.12}",
                            r.exponent, r.regime, r.log_factor, r.terms[0], r.terms[1], r.terms[2]
                        );
                    }
                    out
                }
            };
            print!("{text}");
            Ok(true)
        }
        Command::PhaseDiagram { dim, p_d, p_g, sigma_d_max, sigma_g_max, resolution, class, output, svg } => {
            let class = match class {
                ClassArg::General => EstimatorClass::General,
                ClassArg::Linear => EstimatorClass::Linear,
            };
            let diagram = phase_diagram(dim, p_d, p_g, (0.0, sigma_d_max), (0.0, sigma_g_max), resolution, class)?;
            write_out(&output, &diagram.to_csv())?;
            if let Some(path) = svg {
                std::fs::write(path, diagram.to_svg())?;
            }
            Ok(true)
        }
        Command::Estimate { input, estimator, basis, sigma_g, p_g, p_d, j0, j1, threshold, half_width, output } => {
            let samples = read_samples(&input)?;
            let kind: EstimatorKind = estimator.parse()?;
            let family: Family = basis.parse()?;
            let basis = Arc::new(WaveletBasis::build(family, besov::wavelet::DEFAULT_GRID_EXPONENT)?);
            let n = samples.len();
            let config = match kind {
                EstimatorKind::Linear => {
                    let j = match j0 {
                        Some(j) => j,
                        None => linear_optimal_level(n, sigma_g, p_g, p_d, 1)?,
                    };
                    EstimatorConfig::linear(basis, j, half_width)
                }
                EstimatorKind::Thresholded => {
                    let (d0, d1) = default_levels(n, sigma_g, p_g, 1)?;
                    EstimatorConfig::thresholded(basis, j0.unwrap_or(d0), j1.unwrap_or(d1), threshold, half_width)
                }
            };
            write_out(&output, &estimate(&samples, &config)?.to_text())?;
            Ok(true)
        }
        Command::Experiment { config, seed, output } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if output.is_some() {
                config.output = output;
            }
            let both = config.estimators.contains(&EstimatorKind::Linear)
                && config.estimators.contains(&EstimatorKind::Thresholded);
            let prefix = config.output.take();
            let (result, comparison) = if both {
                let c = compare_estimators(&config)?;
                (c.result.clone(), Some(c))
            } else {
                (run_convergence(&config)?, None)
            };
            match prefix {
                Some(p) => {
                    emit_report(&result, ReportFormat::Csv, &p.with_extension("csv"))?;
                    emit_report(&result, ReportFormat::Svg, &p.with_extension("svg"))?;
                    if let Some(c) = &comparison {
                        std::fs::write(p.with_extension("comparison.csv"), c.to_csv())?;
                    }
                }
                None => {
                    print!("{}", result.to_csv());
                    if let Some(c) = &comparison {
                        print!("{}", c.to_csv());
                    }
                }
            }
            Ok(true)
        }
        Command::Adversarial { problem, kind, n, level, basis, output } => {
            let mut spec = problem.spec()?;
            spec.n = Some(n);
            let family: Family = basis.parse()?;
            let basis = Arc::new(WaveletBasis::build(family, besov::wavelet::DEFAULT_GRID_EXPONENT)?);
            let fam = match kind {
                KindArg::Sparse => sparse_family(level.unwrap_or_else(|| sparse_level(n, &spec)), &spec, basis)?,
                KindArg::Dense => dense_family(level.unwrap_or_else(|| dense_level(n, &spec)), &spec, basis)?,
            };
            let audit = fam.audit()?;
            let bound = match fano_bound(&fam, n) {
                Ok(b) => b,
                Err(Error::FanoUnmet(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            let mut out = String::new();
            let _ = writeln!(
                out,
                "# kind={} level={} members={} c_g={:.10e} c_d={:.10e} fano_bound={:.10e} passed={}",
                fam.kind,
                fam.level,
                fam.len(),
                fam.c_g,
                fam.c_d,
                bound,
                audit.passed
            );
            let _ = writeln!(
                out,
                "# max_norm={:.10e} min_value={:.10e} max_mass_error={:.3e} max_kl={:.10e} kl_bound={:.10e} disjoint={} discriminators_in_ball={}",
                audit.max_norm,
                audit.min_value,
                audit.max_mass_error,
                audit.max_kl,
                audit.kl_bound,
                audit.disjoint,
                audit.discriminators_in_ball
            );
            out.push_str("row,a,b,norm,mass,min_value,kl,separation\n");
            for (i, m) in audit.per_member.iter().enumerate() {
                let _ = writeln!(out, "member,{i},,{:.10e},{:.10e},{:.10e},{:.10e},", m.norm, m.mass, m.min_value, m.kl);
            }
            for (a, b) in audit_pairs(&fam) {
                let _ = writeln!(out, "pair,{a},{b},,,,,{:.10e}", fam.separation(a, b)?);
            }
            write_out(&output, &out)?;
            Ok(audit.passed && bound.is_finite())
        }
    }
}

/// All pairs for small families; otherwise neighbouring members plus the
/// closest pair, since the separation only depends on the Hamming distance.
fn audit_pairs(fam: &besov::adversarial::AdversarialFamily) -> Vec<(usize, usize)> {
    const ALL_PAIRS_LIMIT: usize = 256;
    let m = fam.len();
    if m <= ALL_PAIRS_LIMIT {
        return (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    }
    let mut pairs: Vec<(usize, usize)> = (0..m - 1).map(|a| (a, a + 1)).collect();
    if fam.kind == FamilyKind::Dense {
        if let Some(code) = fam.codebook() {
            let (a, b) = code.min_pair;
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs
}

fn read_samples(path: &PathBuf) -> besov::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse { line: i + 1, msg: format!("{field:?}: {e}") }),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out)
}
