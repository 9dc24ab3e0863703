//! `qbd`: stochastic UL/LU block factorization of QBD transition matrices,
//! Darboux transforms, spectral verification and urn-model simulation.
//!
//! Exit codes: 0 success, 2 parameter error, 3 numerical failure
//! (singularity / invertibility chain), 4 verification failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qbd::blockmat::{
    matrix_from_json, matrix_to_json, truncate_dense, validate_stochastic, Block, BlockSequence,
    StochasticityReport,
};
use qbd::darboux::{darboux_from_lu, darboux_from_ul};
use qbd::factorization::{factorization_residual, lu_factorize, ul_factorize, TauStrategy};
use qbd::jacobi::{self, JacobiParams, RegionCaseKind};
use qbd::spectral::{self, WeightSpec};
use qbd::urnsim::{self, Experiment, UrnChainSpec};
use qbd::Error;

#[derive(Parser)]
#[command(
    name = "qbd",
    version,
    about = "Stochastic UL/LU block factorization of quasi-birth-and-death chains",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor the chain into stochastic bidiagonal block factors
    Factorize(FactorizeArgs),
    /// Reverse a factorization into its Darboux transform
    Darboux(DarbouxArgs),
    /// Run the cross-module identity suite for a parameter triple
    Verify(VerifyArgs),
    /// Scan a seed-parameter region for stochastic factorizability
    Region(RegionArgs),
    /// Compare Karlin-McGregor n-step blocks against truncated powers
    Kmcg(KmcgArgs),
    /// Invariant measure blocks and their stationarity residuals
    Invariant(InvariantArgs),
    /// Simulate the urn experiments and compare against factor entries
    Urn(UrnArgs),
    /// Emit the spectral weight, optionally Geronimus/Christoffel transformed
    Weights(WeightsArgs),
}

#[derive(Args)]
struct JacobiArgs {
    /// Family parameter alpha (> -1)
    #[arg(long)]
    alpha: f64,
    /// Family parameter beta (> -1)
    #[arg(long)]
    beta: f64,
    /// Family parameter k (0 < k < beta+1)
    #[arg(long)]
    k: f64,
    /// Block dimension
    #[arg(long, default_value_t = 2)]
    d: usize,
}

impl JacobiArgs {
    fn params(&self) -> Result<JacobiParams, Error> {
        JacobiParams::new(self.alpha, self.beta, self.k, self.d)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Ul,
    Lu,
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    jacobi: ChainSource,
    /// Factorization order: P = P_U P_L (ul) or P = P_L~ P_U~ (lu)
    #[arg(long, value_enum, default_value_t = Mode::Ul)]
    mode: Mode,
    /// Seed alpha0: paper | case1:S21,S11 | case2a:S11,S12 | file:PATH
    #[arg(long, default_value = "paper")]
    alpha0: String,
    /// Tau strategy: paper | lower-triangular | file:PATH
    #[arg(long, default_value = "paper")]
    tau: String,
    /// Levels of the chain to reproduce
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Stochasticity tolerance for the report
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Either explicit Jacobi parameters or a block-sequence JSON file.
#[derive(Args)]
struct ChainSource {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Block-sequence JSON file to factor instead of the Jacobi chain
    #[arg(long)]
    chain: Option<PathBuf>,
}

impl ChainSource {
    fn resolve(&self) -> Result<(BlockSequence, Option<JacobiParams>), Error> {
        if let Some(path) = &self.chain {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            return Ok((BlockSequence::from_json_value(&value)?, None));
        }
        match (self.alpha, self.beta, self.k) {
            (Some(alpha), Some(beta), Some(k)) => {
                let p = JacobiParams::new(alpha, beta, k, self.d)?;
                Ok((jacobi::tridiagonal_chain(&p)?, Some(p)))
            }
            _ => Err(Error::InvalidParameter(
                "need either --alpha/--beta/--k or --chain FILE".into(),
            )),
        }
    }
}

#[derive(Args)]
struct DarbouxArgs {
    #[command(flatten)]
    factorize: FactorizeArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    jacobi: JacobiArgs,
    /// Levels used by the factorization checks
    #[arg(long, default_value_t = 20)]
    n: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum RegionCaseArg {
    #[value(name = "1")]
    Case1,
    #[value(name = "2a")]
    Case2a,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    jacobi: JacobiArgs,
    /// Which seed family to scan
    #[arg(long, value_enum)]
    case: RegionCaseArg,
    /// Grid points per axis
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Positivity horizon for the pipeline scan
    #[arg(long = "n-check", default_value_t = 50)]
    n_check: usize,
    /// Upper bound of the first axis (defaults frame the analytic region)
    #[arg(long = "s-a-max")]
    s_a_max: Option<f64>,
    /// Upper bound of the second axis
    #[arg(long = "s-b-max")]
    s_b_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KmcgArgs {
    #[command(flatten)]
    jacobi: JacobiArgs,
    /// Largest step count n
    #[arg(long, default_value_t = 6)]
    steps: usize,
    /// Largest level index i, j
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Truncation for the matrix-power reference
    #[arg(long, default_value_t = 15)]
    truncation: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvariantArgs {
    #[command(flatten)]
    jacobi: JacobiArgs,
    /// Blocks of the invariant measure to report
    #[arg(long, default_value_t = 8)]
    blocks: usize,
    /// Blocks used to compute pi before checking stationarity
    #[arg(long, default_value_t = 15)]
    truncation: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum ExperimentArg {
    Exp1,
    Exp2,
    #[value(alias = "composed_P")]
    ComposedP,
    #[value(alias = "composed_Ptilde")]
    ComposedPtilde,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Exp1 => Experiment::Exp1,
            ExperimentArg::Exp2 => Experiment::Exp2,
            ExperimentArg::ComposedP => Experiment::ComposedP,
            ExperimentArg::ComposedPtilde => Experiment::ComposedPtilde,
        }
    }
}

#[derive(Args)]
struct UrnArgs {
    #[command(flatten)]
    jacobi: JacobiArgs,
    /// Which experiment (or composition) to simulate
    #[arg(long, value_enum)]
    experiment: ExperimentArg,
    /// Start state on the flattened chain
    #[arg(long, default_value_t = 0)]
    start: u64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// z threshold for the per-target binomial test
    #[arg(long, default_value_t = 3.0)]
    z: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum TransformArg {
    None,
    Geronimus,
    Christoffel,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    jacobi: JacobiArgs,
    #[arg(long, value_enum, default_value_t = TransformArg::None)]
    transform: TransformArg,
    /// Seed for the Geronimus point mass (same grammar as factorize)
    #[arg(long, default_value = "paper")]
    alpha0: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Factorize(args) => cmd_factorize(&args, false),
        Command::Darboux(args) => cmd_factorize(&args.factorize, true),
        Command::Verify(args) => cmd_verify(&args),
        Command::Region(args) => cmd_region(&args),
        Command::Kmcg(args) => cmd_kmcg(&args),
        Command::Invariant(args) => cmd_invariant(&args),
        Command::Urn(args) => cmd_urn(&args),
        Command::Weights(args) => cmd_weights(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit(&e))
        }
    }
}

fn error_exit(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_)
        | Error::Format(_)
        | Error::Unsupported(_)
        | Error::Validation(_)
        | Error::DimensionMismatch(_)
        | Error::BandMismatch(_) => 2,
        Error::Singular(_)
        | Error::Generator { .. }
        | Error::InsufficientExactness { .. }
        | Error::QuadratureVerification(_) => 3,
    }
}

const EXIT_VERIFICATION: u8 = 4;

/// JSON with every f64 printed at 17 significant digits so outputs are
/// byte-identical across runs.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn render_json(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("in-memory serialization");
    let mut s = String::from_utf8(out).expect("json is utf8");
    s.push('\n');
    s
}

fn write_output(path: Option<&PathBuf>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::InvalidParameter(format!("cannot write stdout: {e}")))
        }
    }
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_alpha0(src: &str, params: Option<&JacobiParams>) -> Result<Block, Error> {
    let need_params = || {
        params.copied().ok_or_else(|| {
            Error::InvalidParameter(format!("--alpha0 {src} needs Jacobi parameters"))
        })
    };
    if src == "paper" {
        return jacobi::alpha0_paper(&need_params()?);
    }
    if let Some(rest) = src.strip_prefix("case1:") {
        let (s21, s11) = parse_pair(rest)?;
        return jacobi::d2::alpha0_case1(&need_params()?, s21, s11);
    }
    if let Some(rest) = src.strip_prefix("case2a:") {
        let (s11, s12) = parse_pair(rest)?;
        return jacobi::d2::alpha0_case2a(&need_params()?, s11, s12);
    }
    if let Some(path) = src.strip_prefix("file:") {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {path}: {e}")))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{path}: {e}")))?;
        return matrix_from_json(&value);
    }
    Err(Error::InvalidParameter(format!(
        "unknown alpha0 source '{src}' (expected paper | case1:s21,s11 | case2a:s11,s12 | file:PATH)"
    )))
}

fn parse_pair(s: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidParameter(format!("expected two comma-separated numbers, got '{s}'")));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad number '{}': {e}", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad number '{}': {e}", parts[1])))?;
    Ok((a, b))
}

fn parse_tau(src: &str, params: Option<&JacobiParams>) -> Result<TauStrategy, Error> {
    match src {
        "paper" => {
            let p = params.copied().ok_or_else(|| {
                Error::InvalidParameter("--tau paper needs Jacobi parameters".into())
            })?;
            Ok(TauStrategy::JacobiPaper(p))
        }
        "lower-triangular" => Ok(TauStrategy::LowerTriangularYUpper),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParameter(format!("cannot read {path}: {e}")))?;
                let value: Value =
                    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{path}: {e}")))?;
                let arr = value
                    .as_array()
                    .ok_or_else(|| Error::Format("expected an array of matrices".into()))?;
                let taus = arr.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
                Ok(TauStrategy::Explicit(taus))
            } else {
                Err(Error::InvalidParameter(format!(
                    "unknown tau strategy '{other}' (expected paper | lower-triangular | file:PATH)"
                )))
            }
        }
    }
}

fn report_json(rep: &StochasticityReport) -> Value {
    json!({
        "passed": rep.passed,
        "max_negative_entry": rep.max_negative_entry,
        "max_row_sum_deviation": rep.max_row_sum_deviation,
        "offending_level": rep.offending_level,
    })
}

fn seq_json(seq: &BlockSequence, levels: usize) -> Result<Value, Error> {
    seq.to_json_value(levels)
}

fn cmd_factorize(args: &FactorizeArgs, darboux: bool) -> Result<ExitCode, Error> {
    let (chain, params) = args.jacobi.resolve()?;
    let strategy = parse_tau(&args.tau, params.as_ref())?;
    let n = args.n;
    if n < 2 {
        return Err(Error::InvalidParameter("--n must be at least 2".into()));
    }
    let (doc, passed) = match args.mode {
        Mode::Ul => {
            let alpha0 = parse_alpha0(&args.alpha0, params.as_ref())?;
            let fac = ul_factorize(&chain, alpha0, &strategy, n)?;
            let residual = factorization_residual(&chain, &fac.upper, &fac.lower, n)?;
            let up = validate_stochastic(&fac.upper, n, args.tol)?;
            let lo = validate_stochastic(&fac.lower, n + 1, args.tol)?;
            let passed = up.passed && lo.passed && residual <= args.tol;
            let sidecar = json!({
                "alpha0": matrix_to_json(&fac.alpha0),
                "tau": fac.tau.iter().map(matrix_to_json).collect::<Vec<_>>(),
            });
            if darboux {
                let res = darboux_from_ul(&fac.upper, &fac.lower, n)?;
                let rep = validate_stochastic(&res.transformed, n, args.tol)?;
                let doc = json!({
                    "source": "from_ul",
                    "transformed": seq_json(&res.transformed, n)?,
                    "sidecar": sidecar,
                    "report": { "stochastic": report_json(&rep) },
                });
                (doc, rep.passed)
            } else {
                let doc = json!({
                    "order": "ul",
                    "upper": seq_json(&fac.upper, n)?,
                    "lower": seq_json(&fac.lower, n + 1)?,
                    "sidecar": sidecar,
                    "report": {
                        "residual": residual,
                        "stochastic_upper": report_json(&up),
                        "stochastic_lower": report_json(&lo),
                    },
                });
                (doc, passed)
            }
        }
        Mode::Lu => {
            let fac = lu_factorize(&chain, &strategy, n)?;
            let residual = factorization_residual(&chain, &fac.lower, &fac.upper, n)?;
            let lo = validate_stochastic(&fac.lower, n + 1, args.tol)?;
            let up = validate_stochastic(&fac.upper, n + 1, args.tol)?;
            let passed = up.passed && lo.passed && residual <= args.tol;
            let sidecar = json!({
                "tau": fac.tau.iter().map(matrix_to_json).collect::<Vec<_>>(),
            });
            if darboux {
                let res = darboux_from_lu(&fac.upper, &fac.lower, n)?;
                let rep = validate_stochastic(&res.transformed, n, args.tol)?;
                let doc = json!({
                    "source": "from_lu",
                    "transformed": seq_json(&res.transformed, n)?,
                    "sidecar": sidecar,
                    "report": { "stochastic": report_json(&rep) },
                });
                (doc, rep.passed)
            } else {
                let doc = json!({
                    "order": "lu",
                    "lower": seq_json(&fac.lower, n + 1)?,
                    "upper": seq_json(&fac.upper, n + 1)?,
                    "sidecar": sidecar,
                    "report": {
                        "residual": residual,
                        "stochastic_lower": report_json(&lo),
                        "stochastic_upper": report_json(&up),
                    },
                });
                (doc, passed)
            }
        }
    };
    write_output(args.out.as_ref(), &render_json(&doc))?;
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification failed: see the report field");
        Ok(ExitCode::from(EXIT_VERIFICATION))
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, Error> {
    let p = args.jacobi.params()?;
    let report = qbd::verify::run(&p, args.n)?;
    for c in &report.checks {
        println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VERIFICATION))
    }
}

fn cmd_region(args: &RegionArgs) -> Result<ExitCode, Error> {
    let p = args.jacobi.params()?;
    let kind = match args.case {
        RegionCaseArg::Case1 => RegionCaseKind::Case1,
        RegionCaseArg::Case2a => RegionCaseKind::Case2a,
    };
    let (da, db) = jacobi::default_scan_bounds(&p, kind)?;
    let s_a_max = args.s_a_max.unwrap_or(da);
    let s_b_max = args.s_b_max.unwrap_or(db);
    let rows = jacobi::region_scan(&p, kind, args.grid, args.n_check, s_a_max, s_b_max)?;
    let mut out = String::from("s_a,s_b,analytic_inside,stochastic_ok,M_psd\n");
    for row in &rows {
        let psd = match row.result.m_psd {
            Some(true) => "true",
            Some(false) => "false",
            None => "n/a",
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f(row.s_a),
            f(row.s_b),
            row.result.analytic_inside,
            row.result.stochastic_factorization,
            psd
        ));
    }
    write_output(args.out.as_ref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_kmcg(args: &KmcgArgs) -> Result<ExitCode, Error> {
    let p = args.jacobi.params()?;
    let chain = jacobi::tridiagonal_chain(&p)?;
    let w = WeightSpec::jacobi(&p)?;
    let d = p.d;
    if (args.levels + 1) + args.steps > args.truncation {
        return Err(Error::InvalidParameter(format!(
            "truncation {} too small for levels {} and steps {}",
            args.truncation, args.levels, args.steps
        )));
    }
    let trunc = truncate_dense(&chain, args.truncation)?;
    let mut out = String::from("n,i,j,row,col,kmcg,power,abs_error\n");
    let mut power = Block::identity(d * args.truncation, d * args.truncation);
    let mut worst = 0.0_f64;
    for n in 0..=args.steps {
        for i in 0..=args.levels {
            for j in 0..=args.levels {
                let km = spectral::kmcg_entry(&chain, &w, n, i, j)?;
                for r in 0..d {
                    for c in 0..d {
                        let reference = power[(i * d + r, j * d + c)];
                        let err = (km[(r, c)] - reference).abs();
                        worst = worst.max(err);
                        out.push_str(&format!(
                            "{n},{i},{j},{r},{c},{},{},{}\n",
                            f(km[(r, c)]),
                            f(reference),
                            f(err)
                        ));
                    }
                }
            }
        }
        power = &power * &trunc;
    }
    write_output(args.out.as_ref(), &out)?;
    eprintln!("max |kmcg - power| = {worst:.3e}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_invariant(args: &InvariantArgs) -> Result<ExitCode, Error> {
    let p = args.jacobi.params()?;
    if args.blocks + 2 > args.truncation {
        return Err(Error::InvalidParameter(format!(
            "truncation {} too small for {} blocks",
            args.truncation, args.blocks
        )));
    }
    let chain = jacobi::tridiagonal_chain(&p)?;
    let w = WeightSpec::jacobi(&p)?;
    let pi = spectral::invariant_measure(&chain, &w, args.truncation)?;
    let residuals = qbd::verify::stationarity_residuals(&chain, &w, args.blocks, args.truncation)?;
    let mut out = String::from("block,component,pi,block_residual\n");
    for (m, resid) in residuals.iter().enumerate() {
        for (c, v) in pi[m].iter().enumerate() {
            out.push_str(&format!("{m},{c},{},{}\n", f(*v), f(*resid)));
        }
    }
    write_output(args.out.as_ref(), &out)?;
    eprintln!(
        "max stationarity residual over {} blocks = {:.3e}",
        args.blocks,
        residuals.iter().fold(0.0_f64, |a, b| a.max(*b))
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_urn(args: &UrnArgs) -> Result<ExitCode, Error> {
    let p = args.jacobi.params()?;
    let spec = UrnChainSpec::new(p, args.experiment.into())?;
    let kernel = urnsim::empirical_kernel(&spec, args.start, args.trials, args.seed)?;
    let reference = urnsim::reference_row(&spec, args.start)?;
    let report = urnsim::kernel_vs_matrix(&kernel, &reference, args.z)?;
    let mut out = String::from("start,target,count,trials,empirical_p,reference_p,z\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            args.start,
            row.target,
            row.count,
            args.trials,
            f(row.empirical_p),
            f(row.reference_p),
            f(row.z)
        ));
    }
    write_output(args.out.as_ref(), &out)?;
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification failed: some targets exceed z = {}", args.z);
        Ok(ExitCode::from(EXIT_VERIFICATION))
    }
}

fn cmd_weights(args: &WeightsArgs) -> Result<ExitCode, Error> {
    let p = args.jacobi.params()?;
    let w = WeightSpec::jacobi(&p)?;
    let spec = match args.transform {
        TransformArg::None => w,
        TransformArg::Christoffel => spectral::christoffel_transform(&w),
        TransformArg::Geronimus => {
            let alpha0 = parse_alpha0(&args.alpha0, Some(&p))?;
            let moments = jacobi::moments_d2(&p)?;
            spectral::geronimus_transform(&w, &alpha0, &moments)?
        }
    };
    write_output(args.out.as_ref(), &render_json(&spec.to_json_value()))?;
    Ok(ExitCode::SUCCESS)
}
