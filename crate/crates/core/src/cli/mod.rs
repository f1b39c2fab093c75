//! Command-line interface binding the solver, certification, diagnostics,
//! and experiment harnesses into one reproducible batch tool.
//!
//! Every command reads headerless CSV / JSON inputs, writes a JSON document
//! carrying a [`RunManifest`] (command, input digests, resolved
//! configuration, toolkit version, wall-clock duration), and exits with:
//! 0 on success, 1 on usage or input errors, 2 on non-convergence or failed
//! certification, 3 on diagnostic infeasibility. Tabular results also get a
//! flat CSV mirror for plotting. `GRPLQ_THREADS` caps experiment
//! parallelism.

mod io;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::certify::{kkt_check, reduce_to_compact, KktCertificate};
use crate::diagnostics::{self, lambda_schedule, ReBudget};
use crate::error::{Error, Result};
use crate::experiments::{
    self, simlasso_coefficients, simlasso_lambda, simlasso_objective, simlasso_reduce,
    ExperimentConfig, McReport,
};
use crate::model::{center_columns, objective, Coefficients, GroupedDesign, PenaltySpec, Q};
use crate::solver::{
    default_lambda_grid, fit, fit_path, lambda_max, FitResult, PathResult, SolverOptions,
};

pub use io::RunManifest;

const EXIT_OK: i32 = 0;
const EXIT_INPUT: i32 = 1;
const EXIT_NOT_CONVERGED: i32 = 2;
const EXIT_INFEASIBLE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "grplq",
    version,
    about = "Grouped sparse regression with l1-lq penalties: fitting, certification, diagnostics, and Monte Carlo studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one penalized regression and certify the solution.
    Fit(FitArgs),
    /// Fit a warm-started path over a decreasing lambda grid.
    Path(PathArgs),
    /// Evaluate the design conditions behind selection consistency.
    Diagnose(DiagnoseArgs),
    /// Certify a provided coefficient vector; optionally reduce it to at
    /// most n active groups.
    Certify(CertifyArgs),
    /// Run a seeded Monte Carlo study.
    Experiment(ExperimentArgs),
    /// Solve a multi-response joint-sparsity problem via the stacked
    /// grouped formulation.
    Simlasso(SimlassoArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Design matrix CSV (rows = observations).
    #[arg(long = "x")]
    x: PathBuf,
    /// Group sizes JSON: {"sizes": [d_1, ..., d_p]}.
    #[arg(long)]
    groups: PathBuf,
    /// Rescale columns so (1/n)||x_k||^2 = 1 (factors recorded in the output).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    standardize: bool,
    /// Subtract column means (and the response mean) first.
    #[arg(long, default_value_t = false)]
    center: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Response CSV (one value per line).
    #[arg(long = "y")]
    y: PathBuf,
    /// Within-group exponent: "1", "2", "inf", or a decimal in (1, inf).
    #[arg(long)]
    q: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Output JSON path.
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "y")]
    y: PathBuf,
    #[arg(long)]
    q: String,
    /// Explicit comma-separated decreasing grid; overrides --grid-size.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long, default_value_t = 50)]
    grid_size: usize,
    /// Smallest grid point as a fraction of lambda_max.
    #[arg(long, default_value_t = 1e-3)]
    grid_min_ratio: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value = "path.json")]
    out: PathBuf,
    /// Optional CSV mirror of the per-lambda summary table.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON list of relevant group indices, e.g. "[0,2,5]".
    #[arg(long)]
    support: Option<String>,
    /// True coefficient CSV; its nonzero groups define the support.
    #[arg(long)]
    beta_star: Option<PathBuf>,
    #[arg(long)]
    q: String,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Schedule factor used when --lambda is not given.
    #[arg(long = "A", default_value_t = 3.0)]
    a_factor: f64,
    /// Penalty level; defaults to the schedule value A*sigma*sqrt(log m/n).
    #[arg(long)]
    lambda: Option<f64>,
    /// Also estimate the restricted eigenvalue over supports of this size.
    #[arg(long)]
    kappa_smax: Option<usize>,
    #[arg(long, default_value = "diagnostics.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "y")]
    y: PathBuf,
    /// Coefficient CSV to certify (one value per line).
    #[arg(long)]
    beta: PathBuf,
    #[arg(long)]
    q: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also reduce the solution to at most n active groups.
    #[arg(long, default_value_t = false)]
    reduce: bool,
    #[arg(long, default_value = "certificate.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// selection | rates | persistency
    #[arg(long)]
    mode: String,
    /// Output prefix: writes <out>.json and <out>.csv.
    #[arg(long, default_value = "experiment")]
    out: PathBuf,
}

#[derive(Args)]
struct SimlassoArgs {
    /// Shared design CSV (n rows, p columns).
    #[arg(long = "x")]
    x: PathBuf,
    /// Multi-column response CSV (n rows, one column per response).
    #[arg(long)]
    ys: PathBuf,
    /// Joint penalty level (applied to the max-norm of each coefficient row).
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value = "simlasso.json")]
    out: PathBuf,
}

/// Entry point: parse, dispatch, map errors to exit codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Path(args) => cmd_path(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Simlasso(args) => cmd_simlasso(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::SingularGram { .. } => EXIT_INFEASIBLE,
        Error::NotConverged(_) | Error::NotOptimal { .. } | Error::BracketFailed { .. } => {
            EXIT_NOT_CONVERGED
        }
        _ => EXIT_INPUT,
    }
}

/// Load, optionally center, and optionally standardize a design (and
/// response) per the shared data flags.
fn load_design(data: &DataArgs, y: Option<&mut DVector<f64>>) -> Result<GroupedDesign> {
    let mut x = io::read_matrix(&data.x)?;
    let sizes = io::read_group_sizes(&data.groups)?;
    if data.center {
        center_columns(&mut x, y);
    }
    if data.standardize {
        GroupedDesign::standardize(x, &sizes)
    } else {
        GroupedDesign::from_raw(x, &sizes)
    }
}

/// Serializable fit payload with plain vectors.
#[derive(Serialize)]
struct FitOutput {
    lambda: f64,
    q: Q,
    converged: bool,
    iterations: usize,
    objective: f64,
    kkt_residual: f64,
    group_sizes: Vec<usize>,
    beta: Vec<f64>,
    active_groups: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column_scales: Option<Vec<f64>>,
    /// Coefficients mapped back to original units when standardized.
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_original_units: Option<Vec<f64>>,
}

impl FitOutput {
    fn build(design: &GroupedDesign, result: &FitResult) -> Result<FitOutput> {
        let beta_original_units = match design.column_scales() {
            Some(_) => {
                Some(design.to_original_units(&result.beta)?.vector().iter().copied().collect())
            }
            None => None,
        };
        Ok(FitOutput {
            lambda: result.lambda,
            q: result.q,
            converged: result.converged,
            iterations: result.iterations,
            objective: result.objective,
            kkt_residual: result.kkt_residual,
            group_sizes: design.layout().sizes().to_vec(),
            beta: result.beta.vector().iter().copied().collect(),
            active_groups: result.beta.active_set(),
            column_scales: design.column_scales().map(|s| s.to_vec()),
            beta_original_units,
        })
    }
}

fn cmd_fit(args: FitArgs) -> Result<i32> {
    let start = Instant::now();
    let mut y = io::read_vector(&args.y)?;
    let design = load_design(&args.data, Some(&mut y))?;
    let q = Q::parse(&args.q)?;
    let spec = PenaltySpec::for_design(q, args.lambda, &design)?;
    let opts = SolverOptions { tol: args.tol, max_iter: args.max_iter, ..Default::default() };
    let result = fit(&design, &y, &spec, &opts, None)?;
    let certificate = kkt_check(&design, &y, &result.beta, &spec, args.tol)?;

    let mut manifest = io::RunManifest::new(
        "fit",
        json!({
            "q": q,
            "lambda": args.lambda,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "standardize": args.data.standardize,
            "center": args.data.center,
        }),
    );
    manifest.record_input(&args.data.x)?;
    manifest.record_input(&args.data.groups)?;
    manifest.record_input(&args.y)?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct Document {
        manifest: io::RunManifest,
        fit: FitOutput,
        certificate: KktCertificate,
    }
    let document =
        Document { manifest, fit: FitOutput::build(&design, &result)?, certificate };
    io::write_text(&args.out, &io::to_json_document(&document)?)?;
    Ok(if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Serialize)]
struct PathFitSummary {
    lambda: f64,
    objective: f64,
    kkt_residual: f64,
    iterations: usize,
    converged: bool,
    active_group_count: usize,
    penalty_value: f64,
    beta: Vec<f64>,
}

fn cmd_path(args: PathArgs) -> Result<i32> {
    let start = Instant::now();
    let mut y = io::read_vector(&args.y)?;
    let design = load_design(&args.data, Some(&mut y))?;
    let q = Q::parse(&args.q)?;
    let opts = SolverOptions { tol: args.tol, max_iter: args.max_iter, ..Default::default() };

    let grid = match &args.lambda_grid {
        Some(text) => text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad lambda value {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?,
        None => {
            let lam_max = lambda_max(&design, &y, q)?;
            if lam_max == 0.0 {
                return Err(Error::InvalidInput(
                    "response is orthogonal to the design; the path is identically zero".into(),
                ));
            }
            default_lambda_grid(lam_max, args.grid_size, args.grid_min_ratio)?
        }
    };

    let path: PathResult = fit_path(&design, &y, q, &grid, &opts)?;
    let summaries: Vec<PathFitSummary> = path
        .fits
        .iter()
        .map(|f| {
            let spec = PenaltySpec::for_design(q, f.lambda, &design)?;
            Ok(PathFitSummary {
                lambda: f.lambda,
                objective: f.objective,
                kkt_residual: f.kkt_residual,
                iterations: f.iterations,
                converged: f.converged,
                active_group_count: f.beta.active_set().len(),
                penalty_value: crate::model::penalty_value(&f.beta, &spec)?,
                beta: f.beta.vector().iter().copied().collect(),
            })
        })
        .collect::<Result<_>>()?;

    let mut manifest = io::RunManifest::new(
        "path",
        json!({
            "q": q,
            "grid": grid,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "standardize": args.data.standardize,
            "center": args.data.center,
        }),
    );
    manifest.record_input(&args.data.x)?;
    manifest.record_input(&args.data.groups)?;
    manifest.record_input(&args.y)?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct Document {
        manifest: io::RunManifest,
        lambdas: Vec<f64>,
        fits: Vec<PathFitSummary>,
    }
    let document = Document { manifest, lambdas: path.lambdas.clone(), fits: summaries };
    io::write_text(&args.out, &io::to_json_document(&document)?)?;

    if let Some(csv_path) = &args.out_csv {
        let mut csv =
            String::from("lambda,objective,kkt_residual,iterations,active_groups,penalty\n");
        for f in &document.fits {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                io::format_float(f.lambda),
                io::format_float(f.objective),
                io::format_float(f.kkt_residual),
                f.iterations,
                f.active_group_count,
                io::format_float(f.penalty_value),
            ));
        }
        io::write_text(csv_path, &csv)?;
    }
    Ok(EXIT_OK)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<i32> {
    let start = Instant::now();
    let design = load_design(&args.data, None)?;
    let q = Q::parse(&args.q)?;
    let lambda = match args.lambda {
        Some(l) => l,
        None => lambda_schedule(args.a_factor, args.sigma, design.m(), design.n())?.lambda,
    };

    let mut report = match (&args.support, &args.beta_star) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput(
                "pass either --support or --beta-star, not both".into(),
            ));
        }
        (Some(text), None) => {
            let support: Vec<usize> = serde_json::from_str(text)
                .map_err(|e| Error::InvalidInput(format!("bad --support list: {e}")))?;
            diagnostics::support_conditions(&design, &support, q, lambda, args.sigma)?
        }
        (None, Some(path)) => {
            let beta = io::read_vector(path)?;
            let beta = Coefficients::from_vector(design.layout().clone(), beta)?;
            diagnostics::selection_conditions(&design, &beta, q, lambda, args.sigma)?
        }
        (None, None) => {
            return Err(Error::InvalidInput("one of --support or --beta-star is required".into()));
        }
    };

    if let Some(s_max) = args.kappa_smax {
        let budget = ReBudget::default();
        report.kappa = Some(diagnostics::restricted_eigenvalue(&design, s_max, 3.0, q, &budget)?);
    }

    let mut manifest = io::RunManifest::new(
        "diagnose",
        json!({
            "q": q,
            "lambda": lambda,
            "sigma": args.sigma,
            "a_factor": args.a_factor,
            "support": args.support,
            "beta_star": args.beta_star.as_ref().map(|p| p.display().to_string()),
            "kappa_smax": args.kappa_smax,
            "standardize": args.data.standardize,
            "center": args.data.center,
        }),
    );
    manifest.record_input(&args.data.x)?;
    manifest.record_input(&args.data.groups)?;
    if let Some(path) = &args.beta_star {
        manifest.record_input(path)?;
    }
    manifest.duration_seconds = start.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct Document {
        manifest: io::RunManifest,
        report: diagnostics::DiagnosticsReport,
    }
    io::write_text(&args.out, &io::to_json_document(&Document { manifest, report })?)?;
    Ok(EXIT_OK)
}

fn cmd_certify(args: CertifyArgs) -> Result<i32> {
    let start = Instant::now();
    let mut y = io::read_vector(&args.y)?;
    let design = load_design(&args.data, Some(&mut y))?;
    let q = Q::parse(&args.q)?;
    let spec = PenaltySpec::for_design(q, args.lambda, &design)?;
    let beta = Coefficients::from_vector(design.layout().clone(), io::read_vector(&args.beta)?)?;
    let certificate = kkt_check(&design, &y, &beta, &spec, args.tol)?;

    #[derive(Serialize)]
    struct ReducedOutput {
        beta: Vec<f64>,
        active_groups: Vec<usize>,
        changed: bool,
        rank_ambiguous: bool,
        objective: f64,
        certificate: KktCertificate,
    }
    let reduced = if args.reduce && certificate.optimal {
        let compacted = reduce_to_compact(&design, &y, &beta, &spec, args.tol)?;
        let cert = kkt_check(&design, &y, &compacted.beta, &spec, args.tol)?;
        Some(ReducedOutput {
            beta: compacted.beta.vector().iter().copied().collect(),
            active_groups: compacted.beta.active_set(),
            changed: compacted.changed,
            rank_ambiguous: compacted.rank_ambiguous,
            objective: objective(&design, &y, &compacted.beta, &spec)?,
            certificate: cert,
        })
    } else {
        None
    };

    let mut manifest = io::RunManifest::new(
        "certify",
        json!({
            "q": q,
            "lambda": args.lambda,
            "tol": args.tol,
            "reduce": args.reduce,
            "standardize": args.data.standardize,
            "center": args.data.center,
        }),
    );
    manifest.record_input(&args.data.x)?;
    manifest.record_input(&args.data.groups)?;
    manifest.record_input(&args.y)?;
    manifest.record_input(&args.beta)?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();

    let optimal = certificate.optimal;
    #[derive(Serialize)]
    struct Document {
        manifest: io::RunManifest,
        objective: f64,
        certificate: KktCertificate,
        #[serde(skip_serializing_if = "Option::is_none")]
        reduced: Option<ReducedOutput>,
    }
    let document = Document {
        manifest,
        objective: objective(&design, &y, &beta, &spec)?,
        certificate,
        reduced,
    };
    io::write_text(&args.out, &io::to_json_document(&document)?)?;
    Ok(if optimal { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// CSV mirror of a Monte Carlo report: one row per sample size, blank
/// fields for statistics the mode does not produce.
fn experiment_csv(report: &McReport) -> String {
    let mut out = String::from(
        "n,m,lambda,replicates,converged,nonconverged,selection_rate,mean_l1_error,mean_pred_error,mean_risk_gap,l1_bound,pred_bound,kappa_estimate,budget\n",
    );
    let fmt = |v: Option<f64>| v.map(io::format_float).unwrap_or_default();
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.n,
            row.m,
            io::format_float(row.lambda),
            row.replicates,
            row.converged,
            row.nonconverged,
            fmt(row.selection_rate),
            fmt(row.mean_l1_error),
            fmt(row.mean_pred_error),
            fmt(row.mean_risk_gap),
            fmt(row.l1_bound),
            fmt(row.pred_bound),
            fmt(row.kappa_estimate),
            fmt(row.budget),
        ));
    }
    out
}

fn cmd_experiment(args: ExperimentArgs) -> Result<i32> {
    let start = Instant::now();
    let text = io::read_text(&args.config)?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", args.config.display())))?;
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(Error::InvalidInput(format!(
            "invalid experiment config:\n  - {}",
            violations.join("\n  - ")
        )));
    }

    if let Ok(threads) = std::env::var("GRPLQ_THREADS") {
        let count: usize = threads.parse().map_err(|_| {
            Error::InvalidInput(format!("GRPLQ_THREADS must be an integer, got {threads:?}"))
        })?;
        // Build the global pool once; later calls fail harmlessly if a
        // pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }

    let report = match args.mode.as_str() {
        "selection" => experiments::run_selection(&config)?,
        "rates" => experiments::run_rates(&config)?,
        "persistency" => experiments::run_persistency(&config)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown mode {other:?}; expected selection, rates, or persistency"
            )));
        }
    };

    let mut manifest = io::RunManifest::new(
        "experiment",
        serde_json::to_value(&config).expect("config serializes"),
    );
    manifest.record_input(&args.config)?;
    manifest.seed = Some(config.seed);
    manifest.duration_seconds = start.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct Document {
        manifest: io::RunManifest,
        report: McReport,
    }
    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    let csv = experiment_csv(&report);
    io::write_text(&json_path, &io::to_json_document(&Document { manifest, report })?)?;
    io::write_text(&csv_path, &csv)?;
    Ok(EXIT_OK)
}

fn cmd_simlasso(args: SimlassoArgs) -> Result<i32> {
    let start = Instant::now();
    let x = io::read_matrix(&args.x)?;
    let ys_matrix = io::read_matrix(&args.ys)?;
    if ys_matrix.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "responses have {} rows but the design has {}",
            ys_matrix.nrows(),
            x.nrows()
        )));
    }
    let responses: Vec<DVector<f64>> =
        (0..ys_matrix.ncols()).map(|k| ys_matrix.column(k).into_owned()).collect();
    let k = responses.len();

    let (stacked, stacked_y) = simlasso_reduce(&x, &responses)?;
    let spec = PenaltySpec::for_design(Q::Inf, simlasso_lambda(args.lambda, k), &stacked)?;
    let opts = SolverOptions { tol: args.tol, max_iter: args.max_iter, ..Default::default() };
    let result = fit(&stacked, &stacked_y, &spec, &opts, None)?;
    let coefficients = simlasso_coefficients(&result.beta, k)?;
    let direct_objective = simlasso_objective(&x, &responses, &coefficients, args.lambda)?;

    let mut manifest = io::RunManifest::new(
        "simlasso",
        json!({
            "lambda": args.lambda,
            "stacked_lambda": simlasso_lambda(args.lambda, k),
            "responses": k,
            "tol": args.tol,
            "max_iter": args.max_iter,
        }),
    );
    manifest.record_input(&args.x)?;
    manifest.record_input(&args.ys)?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();

    #[derive(Serialize)]
    struct Document {
        manifest: io::RunManifest,
        lambda: f64,
        stacked_lambda: f64,
        response_count: usize,
        converged: bool,
        iterations: usize,
        kkt_residual: f64,
        stacked_objective: f64,
        direct_objective: f64,
        /// p rows, one column per response.
        coefficients: Vec<Vec<f64>>,
        active_rows: Vec<usize>,
    }
    let document = Document {
        manifest,
        lambda: args.lambda,
        stacked_lambda: simlasso_lambda(args.lambda, k),
        response_count: k,
        converged: result.converged,
        iterations: result.iterations,
        kkt_residual: result.kkt_residual,
        stacked_objective: result.objective,
        direct_objective,
        coefficients: (0..coefficients.nrows())
            .map(|j| coefficients.row(j).iter().copied().collect())
            .collect(),
        active_rows: result.beta.active_set(),
    };
    io::write_text(&args.out, &io::to_json_document(&document)?)?;
    Ok(if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
