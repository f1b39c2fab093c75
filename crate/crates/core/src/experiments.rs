//! Synthetic instance generation and Monte Carlo harnesses.
//!
//! Three studies are supported: exact support recovery frequency, l1 and
//! prediction error scaling against the closed-form bounds, and the risk
//! gap of the penalty-budget constrained estimator under a misspecified
//! random design. A fourth routine rewrites multi-response joint-sparsity
//! problems as one grouped `q = inf` problem on a stacked design.
//!
//! Determinism: every draw derives from `(seed, purpose, n, replicate)`
//! through the counter-based stream in [`crate::rng`], so reports are
//! reproducible bit-for-bit regardless of thread count. Replicates run in
//! parallel through rayon and are merged in index order.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{lambda_schedule, rate_bounds, restricted_eigenvalue, ReBudget};
use crate::error::{Error, Result};
use crate::model::{Coefficients, GroupedDesign, PenaltySpec, Q};
use crate::rng::Stream;
use crate::solver::{fit, fit_constrained, SolverOptions};

/// Stream purposes; part of the documented derivation scheme.
mod tag {
    pub const DESIGN: u64 = 1;
    pub const SUPPORT: u64 = 2;
    pub const SIGNS: u64 = 3;
    pub const NOISE: u64 = 4;
    /// Pseudo-replicate index for the per-n truth draw.
    pub const TRUTH_REPLICATE: u64 = u64::MAX;
    /// Pseudo-replicate index for the large population-approximation sample.
    pub const POPULATION_REPLICATE: u64 = u64::MAX - 1;
}

/// How the design rows are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesignKind {
    /// Independent standard Gaussian entries.
    GaussianIid,
    /// Columns share a common factor: corr(x_j, x_k) = rho for j != k.
    Equicorrelated { rho: f64 },
    /// Gaussian draw followed by within-group orthonormalization, so every
    /// per-group Gram `(1/n) X_j^T X_j` is exactly the identity.
    Orthonormalized,
}

/// True regression function for the risk (persistency) study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthKind {
    Linear,
    /// Adds `coeff * (x_1^2 - 1)` to the linear part, so the model is
    /// misspecified but E[x y] is untouched under a Gaussian design.
    LinearPlusQuadratic { coeff: f64 },
}

/// Controls for the constrained-risk study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencyConfig {
    /// Budget rule `L_n = scale * (n / log n)^(1/4 - eta)`.
    pub l_scale: f64,
    pub l_eta: f64,
    pub truth: TruthKind,
    /// The population minimizer is approximated on a fresh sample of
    /// `population_factor * max(n_grid)` observations.
    pub population_factor: usize,
}

impl Default for PersistencyConfig {
    fn default() -> Self {
        PersistencyConfig {
            l_scale: 1.0,
            l_eta: 0.05,
            truth: TruthKind::Linear,
            population_factor: 50,
        }
    }
}

/// Full description of a Monte Carlo study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_grid: Vec<usize>,
    pub p: usize,
    pub s: usize,
    /// Group sizes; must have `p` entries.
    pub d_sizes: Vec<usize>,
    pub q: Q,
    /// Factor `A` in the schedule `lambda = A sigma sqrt(log m / n)`.
    pub a_factor: f64,
    pub sigma: f64,
    /// Magnitude of every active coefficient (controls the minimum signal).
    pub beta_magnitude: f64,
    pub design: DesignKind,
    pub replicates: usize,
    pub seed: u64,
    /// Optional dimension-growth sanity exponent: require `m <= exp(n^xi)`.
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub persistency: Option<PersistencyConfig>,
    /// Active-group tolerance for support recovery (default 1e-6): exact
    /// zeros come out of the prox, but inner-solver residue can leave dust.
    #[serde(default)]
    pub active_tol: Option<f64>,
    /// Solver tolerance override (default 1e-8).
    #[serde(default)]
    pub solver_tol: Option<f64>,
}

pub const DEFAULT_ACTIVE_TOL: f64 = 1e-6;

impl ExperimentConfig {
    pub fn m(&self) -> usize {
        self.d_sizes.iter().sum()
    }

    pub fn active_tol(&self) -> f64 {
        self.active_tol.unwrap_or(DEFAULT_ACTIVE_TOL)
    }

    pub fn solver_options(&self) -> SolverOptions {
        match self.solver_tol {
            Some(tol) => SolverOptions::with_tol(tol),
            None => SolverOptions::default(),
        }
    }

    /// All invariant violations, empty when the config is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_grid.is_empty() {
            out.push("n_grid must be nonempty".into());
        }
        if self.n_grid.contains(&0) {
            out.push("every n must be positive".into());
        }
        if self.p == 0 {
            out.push("p must be positive".into());
        }
        if self.s > self.p {
            out.push(format!("s = {} exceeds p = {}", self.s, self.p));
        }
        if self.d_sizes.len() != self.p {
            out.push(format!("d_sizes has {} entries, expected p = {}", self.d_sizes.len(), self.p));
        }
        if self.d_sizes.contains(&0) {
            out.push("every group size must be positive".into());
        }
        if self.replicates == 0 {
            out.push("replicates must be at least 1".into());
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            out.push(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.s > 0 && (self.beta_magnitude.is_nan() || self.beta_magnitude <= 0.0) {
            out.push("beta_magnitude must be positive when s > 0 (the minimum signal would vanish)".into());
        }
        if let DesignKind::Equicorrelated { rho } = self.design {
            if !(0.0..1.0).contains(&rho) {
                out.push(format!("equicorrelation rho must lie in [0, 1), got {rho}"));
            }
        }
        if self.design == DesignKind::Orthonormalized {
            let largest = self.d_sizes.iter().copied().max().unwrap_or(0);
            if let Some(&smallest_n) = self.n_grid.iter().min() {
                if largest > smallest_n {
                    out.push(format!(
                        "orthonormalized design needs n >= every group size; group size {largest} exceeds n = {smallest_n}"
                    ));
                }
            }
        }
        if let Some(xi) = self.xi {
            if xi.is_nan() || xi <= 0.0 || xi >= 1.0 {
                out.push(format!("xi must lie in (0, 1), got {xi}"));
            } else {
                let m = self.m() as f64;
                for &n in &self.n_grid {
                    if m > (n as f64).powf(xi).exp() {
                        out.push(format!(
                            "dimension growth check failed: m = {m} exceeds exp(n^xi) at n = {n}"
                        ));
                    }
                }
            }
        }
        if let Some(pc) = &self.persistency {
            if pc.l_scale.is_nan() || pc.l_scale < 0.0 {
                out.push(format!("persistency l_scale must be nonnegative, got {}", pc.l_scale));
            }
            if pc.l_eta.is_nan() || pc.l_eta < 0.0 || pc.l_eta >= 0.25 {
                out.push(format!("persistency l_eta must lie in [0, 1/4), got {}", pc.l_eta));
            }
            if pc.population_factor == 0 {
                out.push("persistency population_factor must be positive".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(violations.join("; ")))
        }
    }

    /// Budget `L_n = scale * (n / log n)^(1/4 - eta)`.
    pub fn budget_for(&self, n: usize) -> f64 {
        let pc = self.persistency.unwrap_or_default();
        pc.l_scale * ((n as f64) / (n as f64).ln()).powf(0.25 - pc.l_eta)
    }
}

/// A generated problem instance.
pub struct Instance {
    pub design: GroupedDesign,
    pub y: DVector<f64>,
    pub beta_star: Coefficients,
}

/// Draw the raw (unstandardized) design for the given stream.
fn raw_design_matrix(config: &ExperimentConfig, n: usize, stream: &mut Stream) -> DMatrix<f64> {
    let m = config.m();
    match config.design {
        DesignKind::GaussianIid | DesignKind::Orthonormalized => {
            DMatrix::from_vec(n, m, stream.gaussian_vec(n * m))
        }
        DesignKind::Equicorrelated { rho } => {
            let mut x = DMatrix::zeros(n, m);
            for i in 0..n {
                let common = stream.next_gaussian_pair().0;
                for k in 0..m {
                    let own = stream.next_gaussian_pair().0;
                    x[(i, k)] = rho.sqrt() * common + (1.0 - rho).sqrt() * own;
                }
            }
            x
        }
    }
}

/// Gram-Schmidt within each group so `(1/n) X_j^T X_j = I` after
/// standardization. Requires `n >= d_j` for every group.
fn orthonormalize_groups(x: &mut DMatrix<f64>, sizes: &[usize]) {
    let mut start = 0;
    for &d in sizes {
        for k in 0..d {
            let col_idx = start + k;
            let mut col = x.column(col_idx).into_owned();
            for prev in start..col_idx {
                let basis = x.column(prev);
                let coef = basis.dot(&col);
                col -= basis * coef;
            }
            let norm = col.norm();
            assert!(norm > 1e-12, "orthonormalization needs n >= group size");
            col /= norm;
            x.set_column(col_idx, &col);
        }
        start += d;
    }
}

/// Deterministic instance for `(seed, n, replicate)`: standardized design,
/// a coefficient vector with exactly `s` active groups whose entries have
/// magnitude `beta_magnitude` and independent random signs, and
/// `y = X beta* + eps` with Gaussian noise of standard deviation `sigma`.
pub fn gen_instance(config: &ExperimentConfig, n: usize, replicate: u64) -> Result<Instance> {
    config.validate()?;
    let mut design_stream = Stream::derive(config.seed, &[tag::DESIGN, n as u64, replicate]);
    let mut x = raw_design_matrix(config, n, &mut design_stream);
    if config.design == DesignKind::Orthonormalized {
        orthonormalize_groups(&mut x, &config.d_sizes);
    }
    let design = GroupedDesign::standardize(x, &config.d_sizes)?;

    let beta_star = draw_truth(config, &design, n, replicate);
    let y = response_for(config, &design, &beta_star, n, replicate, TruthKind::Linear);
    Ok(Instance { design, y, beta_star })
}

fn draw_truth(
    config: &ExperimentConfig,
    design: &GroupedDesign,
    n: usize,
    replicate: u64,
) -> Coefficients {
    let mut support_stream = Stream::derive(config.seed, &[tag::SUPPORT, n as u64, replicate]);
    let mut signs_stream = Stream::derive(config.seed, &[tag::SIGNS, n as u64, replicate]);
    let mut support = support_stream.choose_indices(config.p, config.s);
    support.sort_unstable();
    let mut beta = Coefficients::zeros(design.layout().clone());
    for &j in &support {
        let d = design.layout().size(j);
        let block = DVector::from_iterator(
            d,
            (0..d).map(|_| {
                let sign = if signs_stream.next_f64() < 0.5 { -1.0 } else { 1.0 };
                sign * config.beta_magnitude
            }),
        );
        beta.set_group(j, &block);
    }
    beta
}

fn response_for(
    config: &ExperimentConfig,
    design: &GroupedDesign,
    beta_star: &Coefficients,
    n: usize,
    replicate: u64,
    truth: TruthKind,
) -> DVector<f64> {
    let mut y = design.matrix() * beta_star.vector();
    if let TruthKind::LinearPlusQuadratic { coeff } = truth {
        for i in 0..design.n() {
            let x1 = design.matrix()[(i, 0)];
            y[i] += coeff * (x1 * x1 - 1.0);
        }
    }
    if config.sigma > 0.0 {
        let mut noise_stream = Stream::derive(config.seed, &[tag::NOISE, n as u64, replicate]);
        let eps = DVector::from_vec(noise_stream.gaussian_vec(design.n()));
        y += eps * config.sigma;
    }
    y
}

/// One row of a Monte Carlo report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub replicates: usize,
    pub converged: usize,
    pub nonconverged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_l1_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_pred_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_risk_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_heuristic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl McRow {
    fn empty(n: usize, m: usize, lambda: f64) -> McRow {
        McRow {
            n,
            m,
            lambda,
            replicates: 0,
            converged: 0,
            nonconverged: 0,
            selection_rate: None,
            mean_l1_error: None,
            mean_pred_error: None,
            mean_risk_gap: None,
            l1_bound: None,
            pred_bound: None,
            kappa_estimate: None,
            kappa_heuristic: None,
            budget: None,
        }
    }
}

/// Full study output: config echo plus one row per sample size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McReport {
    pub mode: String,
    pub config: ExperimentConfig,
    pub active_tol: f64,
    pub rows: Vec<McRow>,
    /// Slope of log(mean l1 error) against log(n) (rates mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_error_slope: Option<f64>,
    /// Size of the fresh sample approximating the population minimizer
    /// (persistency mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population_sample_size: Option<usize>,
}

/// Exact support recovery frequency per sample size.
///
/// Every fit is certified before its statistics count; non-converged fits
/// are tallied separately and excluded from the rate.
pub fn run_selection(config: &ExperimentConfig) -> Result<McReport> {
    config.validate()?;
    let opts = config.solver_options();
    let active_tol = config.active_tol();
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let lambda = lambda_schedule(config.a_factor, config.sigma, config.m(), n)?.lambda;
        let outcomes: Vec<Result<Option<bool>>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                let instance = gen_instance(config, n, rep)?;
                let spec = PenaltySpec::for_design(config.q, lambda, &instance.design)?;
                let fit = fit(&instance.design, &instance.y, &spec, &opts, None)?;
                if !fit.converged {
                    return Ok(None);
                }
                let recovered = fit.beta.active_set_with_tol(active_tol)
                    == instance.beta_star.active_set();
                Ok(Some(recovered))
            })
            .collect();

        let mut row = McRow::empty(n, config.m(), lambda);
        row.replicates = config.replicates;
        let mut hits = 0usize;
        for outcome in outcomes {
            match outcome? {
                Some(recovered) => {
                    row.converged += 1;
                    if recovered {
                        hits += 1;
                    }
                }
                None => row.nonconverged += 1,
            }
        }
        row.selection_rate =
            (row.converged > 0).then(|| hits as f64 / row.converged as f64);
        rows.push(row);
    }
    Ok(McReport {
        mode: "selection".into(),
        config: config.clone(),
        active_tol,
        rows,
        l1_error_slope: None,
        population_sample_size: None,
    })
}

/// Mean l1 and prediction error per sample size, with the closed-form
/// bound values computed from a heuristic restricted-eigenvalue estimate
/// of the first replicate design, and the log-log error slope.
pub fn run_rates(config: &ExperimentConfig) -> Result<McReport> {
    config.validate()?;
    let opts = config.solver_options();
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let lambda = lambda_schedule(config.a_factor, config.sigma, config.m(), n)?.lambda;
        let outcomes: Vec<Result<Option<(f64, f64)>>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                let instance = gen_instance(config, n, rep)?;
                let spec = PenaltySpec::for_design(config.q, lambda, &instance.design)?;
                let fit = fit(&instance.design, &instance.y, &spec, &opts, None)?;
                if !fit.converged {
                    return Ok(None);
                }
                let diff = fit.beta.vector() - instance.beta_star.vector();
                let l1 = diff.iter().map(|v| v.abs()).sum::<f64>();
                let pred = (instance.design.matrix() * diff).norm_squared() / n as f64;
                Ok(Some((l1, pred)))
            })
            .collect();

        let mut row = McRow::empty(n, config.m(), lambda);
        row.replicates = config.replicates;
        let mut sums = (0.0, 0.0);
        for outcome in outcomes {
            match outcome? {
                Some((l1, pred)) => {
                    row.converged += 1;
                    sums.0 += l1;
                    sums.1 += pred;
                }
                None => row.nonconverged += 1,
            }
        }
        if row.converged > 0 {
            row.mean_l1_error = Some(sums.0 / row.converged as f64);
            row.mean_pred_error = Some(sums.1 / row.converged as f64);
        }

        // Bound values from the first replicate design's kappa estimate.
        let instance = gen_instance(config, n, 0)?;
        let budget = ReBudget { max_subsets: 40, starts_per_subset: 2, iterations: 50, seed: config.seed };
        let kappa = restricted_eigenvalue(&instance.design, config.s.max(1), 3.0, config.q, &budget)?;
        row.kappa_estimate = Some(kappa.value);
        row.kappa_heuristic = Some(kappa.heuristic);
        if kappa.value > 0.0 && kappa.value.is_finite() {
            let d_bar = instance.design.layout().max_size();
            let bounds =
                rate_bounds(config.a_factor, config.sigma, kappa.value, config.s, d_bar, config.m(), n)?;
            row.l1_bound = Some(bounds.l1);
            row.pred_bound = Some(bounds.prediction);
        }
        rows.push(row);
    }

    let l1_error_slope = log_log_slope(
        &rows
            .iter()
            .filter_map(|r| r.mean_l1_error.map(|e| (r.n as f64, e)))
            .collect::<Vec<_>>(),
    );
    Ok(McReport {
        mode: "rates".into(),
        config: config.clone(),
        active_tol: config.active_tol(),
        rows,
        l1_error_slope,
        population_sample_size: None,
    })
}

/// Least-squares slope of log(y) on log(x); None with fewer than 2 points.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let cov: f64 = usable.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let var: f64 = usable.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    (var > 0.0).then(|| cov / var)
}

/// Exact population risk for the Gaussian-iid design with the configured
/// truth: `R(b) = ||b - beta*||^2 + 2 coeff^2 + sigma^2`. Follows from
/// `E[x y] = beta*` and `E[y^2] = ||beta*||^2 + 2 coeff^2 + sigma^2` when
/// the quadratic part is `coeff (x_1^2 - 1)` with standard normal `x`.
fn population_risk(beta: &DVector<f64>, beta_star: &DVector<f64>, sigma: f64, truth: TruthKind) -> f64 {
    let quad = match truth {
        TruthKind::Linear => 0.0,
        TruthKind::LinearPlusQuadratic { coeff } => 2.0 * coeff * coeff,
    };
    (beta - beta_star).norm_squared() + quad + sigma * sigma
}

/// Risk gap of the budget-constrained estimator under random design.
///
/// Uses raw (unstandardized) Gaussian designs so estimates live in the same
/// coordinates as the population risk, which is evaluated in closed form.
/// The population minimizer over the budget set is approximated by a
/// constrained fit on one large fresh sample per sample size.
pub fn run_persistency(config: &ExperimentConfig) -> Result<McReport> {
    config.validate()?;
    if config.design != DesignKind::GaussianIid {
        return Err(Error::InvalidInput(
            "the risk study requires the gaussian-iid design (its population risk is known exactly)"
                .into(),
        ));
    }
    let pc = config.persistency.unwrap_or_default();
    let opts = config.solver_options();
    let population_n = pc.population_factor * config.n_grid.iter().copied().max().unwrap_or(1);

    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let budget = config.budget_for(n);
        // Truth for this sample size; fixed across replicates.
        let truth_template = gen_truth_for_population(config, n)?;

        // Population minimizer approximated on one large fresh sample.
        let reference_risk = if budget == 0.0 {
            population_risk(
                &DVector::zeros(config.m()),
                truth_template.vector(),
                config.sigma,
                pc.truth,
            )
        } else {
            let (pop_design, pop_y) =
                raw_instance(config, population_n, tag::POPULATION_REPLICATE, &truth_template, pc.truth)?;
            let pop_fit = fit_constrained(&pop_design, &pop_y, config.q, budget, &opts)?;
            population_risk(pop_fit.beta.vector(), truth_template.vector(), config.sigma, pc.truth)
        };

        let outcomes: Vec<Result<Option<f64>>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                if budget == 0.0 {
                    return Ok(Some(0.0));
                }
                let (design, y) = raw_instance(config, n, rep, &truth_template, pc.truth)?;
                let fit = fit_constrained(&design, &y, config.q, budget, &opts)?;
                if !fit.converged {
                    return Ok(None);
                }
                let risk =
                    population_risk(fit.beta.vector(), truth_template.vector(), config.sigma, pc.truth);
                Ok(Some(risk - reference_risk))
            })
            .collect();

        let mut row = McRow::empty(n, config.m(), 0.0);
        row.replicates = config.replicates;
        row.budget = Some(budget);
        let mut sum = 0.0;
        for outcome in outcomes {
            match outcome? {
                Some(gap) => {
                    row.converged += 1;
                    sum += gap;
                }
                None => row.nonconverged += 1,
            }
        }
        row.mean_risk_gap = (row.converged > 0).then(|| sum / row.converged as f64);
        rows.push(row);
    }
    Ok(McReport {
        mode: "persistency".into(),
        config: config.clone(),
        active_tol: config.active_tol(),
        rows,
        l1_error_slope: None,
        population_sample_size: Some(population_n),
    })
}

/// The per-n truth vector used by the risk study (drawn once, not per
/// replicate, since it defines the population).
fn gen_truth_for_population(config: &ExperimentConfig, n: usize) -> Result<Coefficients> {
    // The layout does not depend on the draw; build against a raw design.
    let layout = crate::model::GroupLayout::new(&config.d_sizes)?;
    let template = Coefficients::zeros(layout);
    let mut support_stream =
        Stream::derive(config.seed, &[tag::SUPPORT, n as u64, tag::TRUTH_REPLICATE]);
    let mut signs_stream =
        Stream::derive(config.seed, &[tag::SIGNS, n as u64, tag::TRUTH_REPLICATE]);
    let mut support = support_stream.choose_indices(config.p, config.s);
    support.sort_unstable();
    let mut beta = template;
    for &j in &support {
        let d = beta.layout().size(j);
        let block = DVector::from_iterator(
            d,
            (0..d).map(|_| {
                let sign = if signs_stream.next_f64() < 0.5 { -1.0 } else { 1.0 };
                sign * config.beta_magnitude
            }),
        );
        beta.set_group(j, &block);
    }
    Ok(beta)
}

/// Raw-design instance sharing a fixed truth vector; used by the risk
/// study where standardization would change the coordinate system.
fn raw_instance(
    config: &ExperimentConfig,
    n: usize,
    replicate: u64,
    beta_star: &Coefficients,
    truth: TruthKind,
) -> Result<(GroupedDesign, DVector<f64>)> {
    let mut design_stream = Stream::derive(config.seed, &[tag::DESIGN, n as u64, replicate]);
    let x = raw_design_matrix(config, n, &mut design_stream);
    let design = GroupedDesign::from_raw(x, &config.d_sizes)?;
    let y = response_for(config, &design, beta_star, n, replicate, truth);
    Ok((design, y))
}

/// Rewrite a multi-response joint-sparsity problem as one grouped design.
///
/// Responses `y^(1..k)` over a shared `n x p` design become a stacked
/// `(n k) x (p k)` block design whose group `j` collects coefficient `j`
/// across all responses. Rows and responses are scaled by `sqrt(k)` so the
/// stacked least-squares term keeps the original `1/(2n)` normalization;
/// with `q = inf` and penalty level `lambda / k` the stacked objective
/// equals the joint objective
///
/// ```text
/// (1/2n) sum_i ||y^(i) - X b^(i)||^2 + lambda sum_j max_i |b^(i)_j|
/// ```
///
/// for every coefficient matrix, not just at optima.
pub fn simlasso_reduce(
    x_shared: &DMatrix<f64>,
    responses: &[DVector<f64>],
) -> Result<(GroupedDesign, DVector<f64>)> {
    if responses.is_empty() {
        return Err(Error::InvalidInput("at least one response is required".into()));
    }
    let n = x_shared.nrows();
    let p = x_shared.ncols();
    if let Some((i, r)) = responses.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "response {i} has length {} but the design has {n} rows",
            r.len()
        )));
    }
    let k = responses.len();
    let scale = (k as f64).sqrt();

    let mut stacked = DMatrix::zeros(n * k, p * k);
    for j in 0..p {
        for response in 0..k {
            let col = j * k + response;
            for i in 0..n {
                stacked[(response * n + i, col)] = scale * x_shared[(i, j)];
            }
        }
    }
    let mut y = DVector::zeros(n * k);
    for (response, r) in responses.iter().enumerate() {
        y.rows_mut(response * n, n).copy_from(&(r * scale));
    }
    let design = GroupedDesign::from_raw(stacked, &vec![k; p])?;
    Ok((design, y))
}

/// Penalty level to use on the stacked problem so it matches the joint
/// objective at level `lambda`.
pub fn simlasso_lambda(lambda: f64, response_count: usize) -> f64 {
    lambda / response_count as f64
}

/// The joint objective evaluated directly: coefficient column `i` belongs
/// to response `i`.
pub fn simlasso_objective(
    x_shared: &DMatrix<f64>,
    responses: &[DVector<f64>],
    coefficients: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    let n = x_shared.nrows();
    let p = x_shared.ncols();
    if coefficients.nrows() != p || coefficients.ncols() != responses.len() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient matrix is {}x{}, expected {}x{}",
            coefficients.nrows(),
            coefficients.ncols(),
            p,
            responses.len()
        )));
    }
    let mut fit = 0.0;
    for (i, r) in responses.iter().enumerate() {
        let pred = x_shared * coefficients.column(i);
        fit += (r - pred).norm_squared();
    }
    let mut penalty = 0.0;
    for j in 0..p {
        penalty += coefficients.row(j).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    }
    Ok(fit / (2.0 * n as f64) + lambda * penalty)
}

/// View a stacked coefficient vector as the `p x k` per-response matrix.
pub fn simlasso_coefficients(beta: &Coefficients, response_count: usize) -> Result<DMatrix<f64>> {
    let k = response_count;
    if beta.layout().sizes().iter().any(|&d| d != k) {
        return Err(Error::InvalidInput(format!(
            "stacked coefficients must have uniform group size {k}"
        )));
    }
    let p = beta.layout().group_count();
    let mut out = DMatrix::zeros(p, k);
    for j in 0..p {
        let block = beta.group(j);
        for i in 0..k {
            out[(j, i)] = block[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::objective;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            n_grid: vec![40],
            p: 6,
            s: 2,
            d_sizes: vec![2; 6],
            q: Q::Two,
            a_factor: 3.0,
            sigma: 0.5,
            beta_magnitude: 1.0,
            design: DesignKind::Orthonormalized,
            replicates: 4,
            seed: 7,
            xi: None,
            persistency: None,
            active_tol: None,
            solver_tol: None,
        }
    }

    #[test]
    fn instances_are_deterministic_and_standardized() {
        let config = base_config();
        let a = gen_instance(&config, 40, 1).unwrap();
        let b = gen_instance(&config, 40, 1).unwrap();
        assert_eq!(a.design.matrix(), b.design.matrix());
        assert_eq!(a.y, b.y);
        assert_eq!(a.beta_star.vector(), b.beta_star.vector());

        for k in 0..a.design.m() {
            let norm_sq = a.design.matrix().column(k).norm_squared() / 40.0;
            assert!((norm_sq - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.beta_star.active_set().len(), config.s);
        // Noiseless responses are exact.
        let mut noiseless = config.clone();
        noiseless.sigma = 0.0;
        let c = gen_instance(&noiseless, 40, 1).unwrap();
        let fitted = c.design.matrix() * c.beta_star.vector();
        assert_eq!(c.y, fitted);
    }

    #[test]
    fn orthonormalized_designs_have_identity_group_grams() {
        let config = base_config();
        let instance = gen_instance(&config, 40, 0).unwrap();
        for j in 0..instance.design.p() {
            let block = instance.design.group(j);
            let gram = block.transpose() * block / 40.0;
            for r in 0..gram.nrows() {
                for c in 0..gram.ncols() {
                    let target = if r == c { 1.0 } else { 0.0 };
                    assert!((gram[(r, c)] - target).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn noise_variance_is_calibrated() {
        let mut config = base_config();
        config.sigma = 0.7;
        let n = 400;
        config.n_grid = vec![n];
        let instance = gen_instance(&config, n, 3).unwrap();
        let clean = instance.design.matrix() * instance.beta_star.vector();
        let eps = &instance.y - clean;
        let mean = eps.sum() / n as f64;
        let var = eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n as f64 - 1.0);
        let sigma_sq = config.sigma * config.sigma;
        assert!(
            (var - sigma_sq).abs() <= 3.0 * sigma_sq / (n as f64).sqrt(),
            "sample variance {var} vs sigma^2 {sigma_sq}"
        );
    }

    #[test]
    fn equicorrelated_rows_share_a_factor() {
        let mut config = base_config();
        config.design = DesignKind::Equicorrelated { rho: 0.8 };
        let n = 2000;
        let instance = gen_instance(&config, n, 0).unwrap();
        // Empirical correlation between two columns should be near 0.8.
        let a = instance.design.matrix().column(0);
        let b = instance.design.matrix().column(5);
        let corr = a.dot(&b) / n as f64; // columns are standardized
        assert!((corr - 0.8).abs() < 0.1, "corr {corr}");
    }

    #[test]
    fn invalid_configs_are_listed() {
        let mut config = base_config();
        config.s = 99;
        config.beta_magnitude = 0.0;
        config.d_sizes = vec![2; 3];
        let violations = config.violations();
        assert!(violations.len() >= 3, "{violations:?}");
        assert!(config.validate().is_err());
    }

    #[test]
    fn zero_magnitude_with_active_groups_rejected() {
        let mut config = base_config();
        config.beta_magnitude = 0.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn orthonormalized_design_requires_enough_rows() {
        let mut config = base_config();
        config.d_sizes = vec![50, 2, 2, 2, 2, 2];
        config.n_grid = vec![40];
        let violations = config.violations();
        assert!(violations.iter().any(|v| v.contains("orthonormalized")), "{violations:?}");
    }

    #[test]
    fn selection_harness_recovers_strong_signals() {
        let mut config = base_config();
        config.n_grid = vec![80];
        config.replicates = 6;
        let report = run_selection(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.nonconverged, 0);
        assert!(row.selection_rate.unwrap() >= 0.5, "{row:?}");

        // Determinism of the whole report.
        let again = run_selection(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn rates_harness_reports_bounds_and_slope() {
        let mut config = base_config();
        config.n_grid = vec![50, 100, 200];
        config.replicates = 5;
        let report = run_rates(&config).unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert!(row.mean_l1_error.unwrap() > 0.0);
            assert!(row.mean_pred_error.unwrap() > 0.0);
            assert!(row.kappa_estimate.unwrap() > 0.0);
            assert_eq!(row.kappa_heuristic, Some(true));
        }
        let slope = report.l1_error_slope.unwrap();
        assert!(slope < 0.0, "errors should shrink with n, slope {slope}");
    }

    #[test]
    fn noiseless_rates_shrink_to_zero() {
        // sigma = 0 puts the schedule at lambda = 0, so fits are exact
        // least squares and both errors collapse.
        let mut config = base_config();
        config.sigma = 0.0;
        config.n_grid = vec![60];
        config.replicates = 3;
        let report = run_rates(&config).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.lambda, 0.0);
        assert!(row.mean_l1_error.unwrap() < 1e-6, "{row:?}");
        assert!(row.mean_pred_error.unwrap() < 1e-12, "{row:?}");
    }

    #[test]
    fn persistency_zero_budget_gap_is_zero() {
        let mut config = base_config();
        config.design = DesignKind::GaussianIid;
        config.n_grid = vec![60];
        config.replicates = 3;
        config.persistency = Some(PersistencyConfig {
            l_scale: 0.0,
            l_eta: 0.05,
            truth: TruthKind::Linear,
            population_factor: 5,
        });
        let report = run_persistency(&config).unwrap();
        assert_eq!(report.rows[0].mean_risk_gap, Some(0.0));
        assert_eq!(report.rows[0].budget, Some(0.0));
    }

    #[test]
    fn persistency_linear_truth_noiseless_gap_vanishes() {
        let mut config = base_config();
        config.design = DesignKind::GaussianIid;
        config.p = 4;
        config.s = 1;
        config.d_sizes = vec![1; 4];
        config.sigma = 0.0;
        config.beta_magnitude = 0.4;
        config.n_grid = vec![400];
        config.replicates = 2;
        config.persistency = Some(PersistencyConfig {
            l_scale: 1.0,
            l_eta: 0.05,
            truth: TruthKind::Linear,
            population_factor: 10,
        });
        let report = run_persistency(&config).unwrap();
        let gap = report.rows[0].mean_risk_gap.unwrap();
        assert!(gap.abs() < 1e-3, "gap {gap}");
    }

    #[test]
    fn stacked_problem_matches_joint_objective_everywhere() {
        let mut stream = Stream::new(5);
        let n = 12;
        let p = 3;
        let k = 2;
        let x = DMatrix::from_vec(n, p, stream.gaussian_vec(n * p));
        let ys: Vec<DVector<f64>> =
            (0..k).map(|_| DVector::from_vec(stream.gaussian_vec(n))).collect();
        let (stacked, stacked_y) = simlasso_reduce(&x, &ys).unwrap();
        assert_eq!(stacked.n(), n * k);
        assert_eq!(stacked.m(), p * k);
        let lambda = 0.3;
        let spec = PenaltySpec::for_design(Q::Inf, simlasso_lambda(lambda, k), &stacked).unwrap();

        for _ in 0..50 {
            let flat = DVector::from_vec(stream.gaussian_vec(p * k));
            let beta = Coefficients::from_vector(stacked.layout().clone(), flat.clone()).unwrap();
            let stacked_obj = objective(&stacked, &stacked_y, &beta, &spec).unwrap();
            let coeffs = simlasso_coefficients(&beta, k).unwrap();
            let direct = simlasso_objective(&x, &ys, &coeffs, lambda).unwrap();
            assert!(
                (stacked_obj - direct).abs() <= 1e-10 * (1.0 + direct.abs()),
                "stacked {stacked_obj} vs direct {direct}"
            );
        }
    }

    #[test]
    fn single_response_reduction_is_identity() {
        let mut stream = Stream::new(9);
        let n = 8;
        let p = 2;
        let x = DMatrix::from_vec(n, p, stream.gaussian_vec(n * p));
        let y = DVector::from_vec(stream.gaussian_vec(n));
        let (stacked, stacked_y) = simlasso_reduce(&x, std::slice::from_ref(&y)).unwrap();
        assert_eq!(stacked.matrix(), &x);
        assert_eq!(stacked_y, y);
    }

    #[test]
    fn ragged_responses_rejected() {
        let x = DMatrix::zeros(4, 2);
        let good = DVector::zeros(4);
        let bad = DVector::zeros(3);
        assert!(simlasso_reduce(&x, &[good, bad]).is_err());
    }
}
