//! Computable design-condition diagnostics and theoretical bound
//! evaluators.
//!
//! These routines turn the hypotheses behind selection consistency, rate
//! bounds, and the sparsity oracle inequality into numbers a user can
//! inspect: the minimum restricted Gram eigenvalue, the irrepresentable
//! constant in the induced `(q', q')` norm, a heuristic restricted
//! eigenvalue, the penalty schedule, and the closed-form bound values.
//! Asymptotic hypotheses are reported as finite-sample scalars compared
//! against explicit thresholds that are echoed in every report.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{lq_norm, Coefficients, GroupedDesign, Q};
use crate::rng::Stream;

/// Induced operator norm `||A||_{a,b} = sup ||Ax||_b / ||x||_a`, exact
/// where a closed form exists.
///
/// Exact cases: `a = 1` (max column b-norm), `b = inf` (max row dual-norm),
/// and `(2, 2)` (largest singular value). Anything else falls back to a
/// projected-ascent lower bound; use [`operator_norm_detailed`] when the
/// exactness flag matters.
pub fn operator_norm(a_matrix: &DMatrix<f64>, a: Q, b: Q) -> f64 {
    operator_norm_detailed(a_matrix, a, b).value
}

/// Operator norm value plus how it was obtained.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OperatorNorm {
    pub value: f64,
    /// False when the value is only an ascent-based lower bound.
    pub exact: bool,
    /// Riesz-Thorin style upper bound for `(c, c)` norms, when available.
    pub upper_bound: Option<f64>,
}

pub fn operator_norm_detailed(m: &DMatrix<f64>, a: Q, b: Q) -> OperatorNorm {
    if m.nrows() == 0 || m.ncols() == 0 {
        return OperatorNorm { value: 0.0, exact: true, upper_bound: None };
    }
    // ||A||_{1,b}: the extreme points of the l1 ball are signed basis
    // vectors, so the supremum is over columns.
    if a == Q::One {
        let value = (0..m.ncols())
            .map(|j| lq_norm(m.column(j).as_view(), b))
            .fold(0.0_f64, f64::max);
        return OperatorNorm { value, exact: true, upper_bound: None };
    }
    // ||A||_{a,inf}: each output coordinate is a row inner product,
    // maximized at the dual attainer of that row.
    if b == Q::Inf {
        let value = (0..m.nrows())
            .map(|i| lq_norm(m.row(i).transpose().as_view(), a.conjugate()))
            .fold(0.0_f64, f64::max);
        return OperatorNorm { value, exact: true, upper_bound: None };
    }
    if a == Q::Two && b == Q::Two {
        let svd = m.clone().svd(false, false);
        let value = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        return OperatorNorm { value, exact: true, upper_bound: None };
    }

    let value = ascent_lower_bound(m, a, b);
    let upper_bound = if a == b {
        // Interpolation between the exact (1,1) and (inf,inf) norms:
        // ||A||_{c,c} <= ||A||_{1,1}^(1/c) ||A||_{inf,inf}^(1-1/c).
        let n11 = operator_norm(m, Q::One, Q::One);
        let ninf = operator_norm(m, Q::Inf, Q::Inf);
        let theta = 1.0 / a.value();
        Some(n11.powf(theta) * ninf.powf(1.0 - theta))
    } else {
        None
    };
    OperatorNorm { value, exact: false, upper_bound }
}

/// Unit-a-norm vector maximizing `<z, x>`; attains the dual norm.
fn dual_attainer(z: &DVector<f64>, a: Q) -> DVector<f64> {
    match a {
        Q::One => {
            let mut best = 0usize;
            for i in 0..z.len() {
                if z[i].abs() > z[best].abs() {
                    best = i;
                }
            }
            let mut x = DVector::zeros(z.len());
            x[best] = if z[best] == 0.0 { 1.0 } else { z[best].signum() };
            x
        }
        Q::Inf => z.map(|v| if v == 0.0 { 0.0 } else { v.signum() }),
        _ => {
            let a_val = a.value();
            let dual = lq_norm(z.as_view(), a.conjugate());
            if dual == 0.0 {
                let mut x = DVector::zeros(z.len());
                x[0] = 1.0;
                return x;
            }
            // |x_i| proportional to |z_i|^(a'-1), normalized to unit a-norm.
            let exponent = a_val / (a_val - 1.0) - 1.0;
            let raw = z.map(|v| v.signum() * (v.abs() / dual).powf(exponent));
            let norm = lq_norm(raw.as_view(), a);
            raw / norm
        }
    }
}

/// Nonlinear power method for `sup ||Ax||_b / ||x||_a`, multi-start.
/// Always a valid lower bound; deterministic (seeded internally).
fn ascent_lower_bound(m: &DMatrix<f64>, a: Q, b: Q) -> f64 {
    let cols = m.ncols();
    let mut starts: Vec<DVector<f64>> = Vec::new();
    for j in 0..cols {
        let mut e = DVector::zeros(cols);
        e[j] = 1.0;
        starts.push(e);
    }
    starts.push(DVector::from_element(cols, 1.0));
    let mut stream = Stream::derive(0x6f70_6e6f_726d, &[cols as u64, m.nrows() as u64]);
    for _ in 0..24 {
        starts.push(DVector::from_vec(stream.gaussian_vec(cols)));
    }

    let mut best = 0.0_f64;
    for start in starts {
        let norm_a = lq_norm(start.as_view(), a);
        if norm_a == 0.0 {
            continue;
        }
        let mut x = start / norm_a;
        for _ in 0..80 {
            let y = m * &x;
            best = best.max(lq_norm(y.as_view(), b));
            let u = dual_attainer(&y, b.conjugate()); // subgradient of ||.||_b at y
            let z = m.transpose() * u;
            let next = dual_attainer(&z, a);
            if (&next - &x).amax() < 1e-12 {
                x = next;
                break;
            }
            x = next;
        }
        best = best.max(lq_norm((m * &x).as_view(), b));
    }
    best
}

/// Columns of the groups in `support`, concatenated.
fn restricted_columns(design: &GroupedDesign, support: &[usize]) -> DMatrix<f64> {
    let layout = design.layout();
    let total: usize = support.iter().map(|&j| layout.size(j)).sum();
    let mut out = DMatrix::zeros(design.n(), total);
    let mut at = 0;
    for &j in support {
        let block = design.group(j);
        out.columns_mut(at, layout.size(j)).copy_from(&block);
        at += layout.size(j);
    }
    out
}

/// Smallest eigenvalue of the restricted Gram `(1/n) X_S^T X_S`.
pub fn min_gram_eigenvalue(design: &GroupedDesign, support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::InvalidInput("support must be nonempty".into()));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= design.p()) {
        return Err(Error::InvalidInput(format!("group index {j} out of range")));
    }
    let xs = restricted_columns(design, support);
    let gram = symmetrized_gram(&xs, design.n());
    let eig = gram.symmetric_eigen();
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn symmetrized_gram(xs: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let g = xs.transpose() * xs / n as f64;
    (&g + g.transpose()) * 0.5
}

/// `max_{j not in S} || (1/n X_j^T X_S) (1/n X_S^T X_S)^{-1} ||_{q',q'}`.
///
/// Returns 0 when the complement is empty. Requires the restricted Gram to
/// be comfortably invertible.
pub fn irrepresentable_constant(design: &GroupedDesign, support: &[usize], q: Q) -> Result<f64> {
    Ok(irrepresentable_detailed(design, support, q)?.value)
}

pub fn irrepresentable_detailed(
    design: &GroupedDesign,
    support: &[usize],
    q: Q,
) -> Result<OperatorNorm> {
    let min_eig = min_gram_eigenvalue(design, support)?;
    if min_eig <= 1e-10 {
        return Err(Error::SingularGram { min_eigenvalue: min_eig });
    }
    let complement: Vec<usize> = (0..design.p()).filter(|j| !support.contains(j)).collect();
    if complement.is_empty() {
        return Ok(OperatorNorm { value: 0.0, exact: true, upper_bound: None });
    }

    let xs = restricted_columns(design, support);
    let gram = symmetrized_gram(&xs, design.n());
    let chol = Cholesky::new(gram).ok_or(Error::SingularGram { min_eigenvalue: min_eig })?;
    let dual = q.conjugate();

    let mut worst = OperatorNorm { value: 0.0, exact: true, upper_bound: Some(0.0) };
    for &j in &complement {
        // M_j = Sigma_jS Sigma_SS^{-1}, computed as (Sigma_SS^{-1} Sigma_Sj)^T.
        let cross = xs.transpose() * design.group(j) / design.n() as f64;
        let solved = chol.solve(&cross);
        let m_j = solved.transpose();
        let norm = operator_norm_detailed(&m_j, dual, dual);
        if norm.value > worst.value {
            worst.value = norm.value;
        }
        worst.exact &= norm.exact;
        worst.upper_bound = match (worst.upper_bound, norm.upper_bound.or(Some(norm.value))) {
            (Some(w), Some(u)) => Some(w.max(u)),
            _ => None,
        };
    }
    if worst.exact {
        worst.upper_bound = None;
    }
    Ok(worst)
}

/// Search budget for the restricted-eigenvalue heuristic.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReBudget {
    /// Cap on candidate supports examined (enumerated when they all fit,
    /// sampled otherwise).
    pub max_subsets: usize,
    pub starts_per_subset: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ReBudget {
    fn default() -> Self {
        ReBudget { max_subsets: 4000, starts_per_subset: 6, iterations: 120, seed: 0 }
    }
}

/// Heuristic restricted-eigenvalue value. Every evaluation happens at a
/// feasible cone point, so the reported value is an upper bound on the
/// true constant; `heuristic` is always true.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub value: f64,
    pub heuristic: bool,
    pub subsets_examined: usize,
    pub budget_exhausted: bool,
}

/// Estimate the restricted eigenvalue
///
/// ```text
/// kappa = min_{|S0| <= s_max} min_{gamma in cone(S0)}
///         ||X gamma||_2 / ( sqrt(n) * sqrt(sum_{j in S0} d_j^(2/q'-1) ||gamma_j||_q^2) )
/// ```
///
/// over the cone `sum_{S0^c} w_j ||gamma_j||_q <= multiplier * sum_{S0} w_j
/// ||gamma_j||_q` (multiplier 3 for the estimation-rate condition,
/// `2 + 3/delta` for the oracle-inequality condition). Exact cone
/// minimization is nonconvex; candidate supports are enumerated or sampled
/// and each is attacked by multi-start projected gradient descent, so the
/// result is an upper bound flagged as heuristic.
pub fn restricted_eigenvalue(
    design: &GroupedDesign,
    s_max: usize,
    multiplier: f64,
    q: Q,
    budget: &ReBudget,
) -> Result<KappaEstimate> {
    if s_max == 0 || s_max > design.p() {
        return Err(Error::InvalidInput(format!(
            "s_max must lie in [1, {}], got {s_max}",
            design.p()
        )));
    }
    if multiplier.is_nan() || multiplier < 0.0 {
        return Err(Error::InvalidInput(format!(
            "multiplier must be nonnegative, got {multiplier}"
        )));
    }

    let (subsets, exhausted) = candidate_subsets(design.p(), s_max, budget);
    let mut stream = Stream::derive(budget.seed, &[0x7265_6569]);

    // Bottom eigenvectors of the full Gram are strong global candidates:
    // they minimize ||X gamma|| before the cone constraint enters.
    let gram = symmetrized_gram(design.matrix(), design.n());
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let bottom: Vec<DVector<f64>> = order
        .iter()
        .take(3)
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let mut best = f64::INFINITY;
    for support in &subsets {
        let mut starts: Vec<DVector<f64>> = Vec::new();
        // Supported start: bottom eigenvector of the restricted Gram,
        // embedded on S0 (trivially inside the cone).
        let xs = restricted_columns(design, support);
        let sub_eig = symmetrized_gram(&xs, design.n()).symmetric_eigen();
        let mut sub_order: Vec<usize> = (0..sub_eig.eigenvalues.len()).collect();
        sub_order.sort_by(|&i, &j| {
            sub_eig.eigenvalues[i].partial_cmp(&sub_eig.eigenvalues[j]).unwrap()
        });
        let mut embedded = DVector::zeros(design.m());
        let mut at = 0;
        let sub_vec = sub_eig.eigenvectors.column(sub_order[0]);
        for &j in support {
            let d = design.layout().size(j);
            embedded
                .rows_mut(design.layout().start(j), d)
                .copy_from(&sub_vec.rows(at, d));
            at += d;
        }
        starts.push(embedded);
        for v in &bottom {
            starts.push(v.clone());
        }
        for _ in 0..budget.starts_per_subset {
            starts.push(DVector::from_vec(stream.gaussian_vec(design.m())));
        }

        for start in starts {
            if let Some(v) =
                minimize_cone_ratio(design, support, multiplier, q, start, budget.iterations)
            {
                best = best.min(v);
            }
        }
    }

    Ok(KappaEstimate {
        value: best,
        heuristic: true,
        subsets_examined: subsets.len(),
        budget_exhausted: exhausted,
    })
}

fn candidate_subsets(p: usize, s_max: usize, budget: &ReBudget) -> (Vec<Vec<usize>>, bool) {
    let mut all = Vec::new();
    let mut overflow = false;
    let mut current = Vec::new();
    enumerate_subsets(p, s_max, 0, &mut current, &mut all, budget.max_subsets, &mut overflow);
    if !overflow {
        return (all, false);
    }
    // Too many to enumerate: keep the singletons plus sampled supports of
    // size s_max.
    let mut subsets: Vec<Vec<usize>> = (0..p).map(|j| vec![j]).collect();
    let mut stream = Stream::derive(budget.seed, &[0x7375_6273]);
    while subsets.len() < budget.max_subsets {
        let mut pick = stream.choose_indices(p, s_max);
        pick.sort_unstable();
        subsets.push(pick);
    }
    (subsets, true)
}

fn enumerate_subsets(
    p: usize,
    s_max: usize,
    from: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
    overflow: &mut bool,
) {
    if *overflow {
        return;
    }
    if !current.is_empty() {
        if out.len() >= cap {
            *overflow = true;
            return;
        }
        out.push(current.clone());
    }
    if current.len() == s_max {
        return;
    }
    for j in from..p {
        current.push(j);
        enumerate_subsets(p, s_max, j + 1, current, out, cap, overflow);
        current.pop();
    }
}

/// Weighted group-norm sums entering the cone constraint and denominator.
fn cone_quantities(
    design: &GroupedDesign,
    support: &[usize],
    q: Q,
    gamma: &DVector<f64>,
) -> (f64, f64, f64) {
    let layout = design.layout();
    let mut on = 0.0;
    let mut off = 0.0;
    let mut denom_sq = 0.0;
    for j in 0..design.p() {
        let block = gamma.rows(layout.start(j), layout.size(j));
        let norm = lq_norm(block, q);
        let w = q.group_weight(layout.size(j));
        if support.contains(&j) {
            on += w * norm;
            let d = layout.size(j) as f64;
            denom_sq += d.powf(2.0 / q.conjugate().value() - 1.0) * norm * norm;
        } else {
            off += w * norm;
        }
    }
    (on, off, denom_sq)
}

/// Shrink off-support blocks until the cone constraint holds, then
/// evaluate the ratio; iterate plain gradient steps on ||X gamma||^2.
/// Returns the best feasible ratio seen, or None if the start is useless.
fn minimize_cone_ratio(
    design: &GroupedDesign,
    support: &[usize],
    multiplier: f64,
    q: Q,
    mut gamma: DVector<f64>,
    iterations: usize,
) -> Option<f64> {
    let n = design.n() as f64;
    let layout = design.layout();
    let project = |gamma: &mut DVector<f64>| -> bool {
        let (on, off, _) = cone_quantities(design, support, q, gamma);
        if on == 0.0 {
            return false; // cone forces gamma = 0 when the support part vanishes
        }
        if off > multiplier * on && off > 0.0 {
            let scale = multiplier * on / off;
            for j in 0..design.p() {
                if !support.contains(&j) {
                    gamma.rows_mut(layout.start(j), layout.size(j)).scale_mut(scale);
                }
            }
        }
        true
    };
    let ratio = |gamma: &DVector<f64>| -> Option<f64> {
        let (_, _, denom_sq) = cone_quantities(design, support, q, gamma);
        if denom_sq <= 0.0 {
            return None;
        }
        let num = (design.matrix() * gamma).norm() / n.sqrt();
        Some(num / denom_sq.sqrt())
    };

    if !project(&mut gamma) {
        return None;
    }
    let mut best = ratio(&gamma)?;

    // Gradient of ||X gamma||^2 / n, with the step scaled to the iterate.
    let mut step = 0.5;
    for _ in 0..iterations {
        let grad = design.matrix().transpose() * (design.matrix() * &gamma) * (2.0 / n);
        let scale = gamma.norm() / grad.norm().max(1e-300);
        let mut candidate = &gamma - grad * (step * scale);
        if !project(&mut candidate) {
            step *= 0.5;
            continue;
        }
        match ratio(&candidate) {
            Some(r) if r < best => {
                best = r;
                gamma = candidate;
            }
            _ => {
                step *= 0.5;
                if step < 1e-6 {
                    break;
                }
            }
        }
    }
    Some(best)
}

/// Penalty schedule value and its success-probability floor.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub lambda: f64,
    /// `1 - m^(1 - A^2/8)`.
    pub probability_floor: f64,
}

/// `lambda = A sigma sqrt(log m / n)`, valid for `A > 2 sqrt(2)`.
pub fn lambda_schedule(a_factor: f64, sigma: f64, m: usize, n: usize) -> Result<LambdaSchedule> {
    let a_min = 2.0 * 2.0_f64.sqrt();
    if a_factor.is_nan() || a_factor <= a_min {
        return Err(Error::InvalidInput(format!(
            "schedule factor must exceed 2*sqrt(2) ~= {a_min:.6}, got {a_factor}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidInput(format!("m must be at least 2, got {m}")));
    }
    if n < 1 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::InvalidInput(format!("sigma must be nonnegative, got {sigma}")));
    }
    let lambda = a_factor * sigma * ((m as f64).ln() / n as f64).sqrt();
    let probability_floor = 1.0 - (m as f64).powf(1.0 - a_factor * a_factor / 8.0);
    Ok(LambdaSchedule { lambda, probability_floor })
}

/// Thresholds used to turn asymptotic hypotheses into pass/fail verdicts;
/// echoed in every report so verdicts are reproducible.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VerdictThresholds {
    /// `lambda^2 n / log((p - s) d_bar)` must be at least this.
    pub lambda_growth_min: f64,
    /// The signal-strength scalar must be at most this.
    pub signal_margin_max: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds { lambda_growth_min: 10.0, signal_margin_max: 0.5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionVerdicts {
    pub gram_positive: bool,
    pub irrepresentable_holds: bool,
    pub lambda_growth_ok: bool,
    pub signal_margin_ok: bool,
    pub all_hold: bool,
}

/// Everything the selection-consistency conditions ask about one design.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub support: Vec<usize>,
    pub support_size: usize,
    pub max_group_size: usize,
    pub q: Q,
    pub lambda: f64,
    pub sigma: f64,
    /// Smallest eigenvalue of `(1/n) X_S^T X_S`.
    pub min_gram_eigenvalue: f64,
    /// `max_{j in S^c} ||Sigma_jS Sigma_SS^{-1}||_{q',q'}`.
    pub irrepresentable_constant: f64,
    /// Whether the constant is exact or an ascent lower bound.
    pub irrepresentable_exact: bool,
    /// Interpolation upper bound when the constant is inexact.
    pub irrepresentable_upper: Option<f64>,
    /// `1 - irrepresentable_constant`.
    pub irrepresentable_gap: f64,
    /// `min_{j in S} ||beta*_j||_inf`; absent in support-only reports.
    pub min_signal: Option<f64>,
    /// `lambda^2 n / log((p - s) d_bar)`; infinite when the log is
    /// nonpositive or the complement is empty.
    pub lambda_growth_scalar: f64,
    /// `(1/min_signal) [ sqrt(log(s d_bar)/n) + lambda d_bar^(1/q')
    /// ||Sigma_SS^{-1}||_{inf,inf} ]`; absent without a signal value.
    pub signal_margin_scalar: Option<f64>,
    /// Heuristic restricted-eigenvalue estimate, when one was computed.
    pub kappa: Option<KappaEstimate>,
    pub thresholds: VerdictThresholds,
    pub verdicts: ConditionVerdicts,
}

/// Evaluate the selection-consistency conditions for a known coefficient
/// vector. The support is read off the nonzero groups of `beta_star`.
pub fn selection_conditions(
    design: &GroupedDesign,
    beta_star: &Coefficients,
    q: Q,
    lambda: f64,
    sigma: f64,
) -> Result<DiagnosticsReport> {
    if beta_star.layout() != design.layout() {
        return Err(Error::DimensionMismatch(
            "coefficients and design use different group layouts".into(),
        ));
    }
    let support = beta_star.active_set();
    if support.is_empty() {
        return Err(Error::InvalidInput(
            "beta_star has no active groups; the conditions are vacuous".into(),
        ));
    }
    let min_signal = beta_star.min_active_magnitude().expect("support is nonempty");
    design_report(design, &support, q, lambda, sigma, Some(min_signal), None)
}

/// Support-only variant: everything except the signal-strength scalar.
pub fn support_conditions(
    design: &GroupedDesign,
    support: &[usize],
    q: Q,
    lambda: f64,
    sigma: f64,
) -> Result<DiagnosticsReport> {
    design_report(design, support, q, lambda, sigma, None, None)
}

pub(crate) fn design_report(
    design: &GroupedDesign,
    support: &[usize],
    q: Q,
    lambda: f64,
    sigma: f64,
    min_signal: Option<f64>,
    kappa: Option<KappaEstimate>,
) -> Result<DiagnosticsReport> {
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    let min_eig = min_gram_eigenvalue(design, &support)?;
    if min_eig <= 1e-10 {
        return Err(Error::SingularGram { min_eigenvalue: min_eig });
    }
    let irrep = irrepresentable_detailed(design, &support, q)?;

    let s = support.len();
    let d_bar = design.layout().max_size();
    let n = design.n() as f64;

    let growth_log = (((design.p() - s) * d_bar) as f64).ln();
    let lambda_growth_scalar = if design.p() == s || growth_log <= 0.0 {
        f64::INFINITY
    } else {
        lambda * lambda * n / growth_log
    };

    let signal_margin_scalar = min_signal.map(|signal| {
        let xs = restricted_columns(design, &support);
        let gram = symmetrized_gram(&xs, design.n());
        let inv = Cholesky::new(gram)
            .expect("positive-definite by the min-eigenvalue check")
            .inverse();
        let inv_norm = operator_norm(&inv, Q::Inf, Q::Inf);
        let noise_term = (((s * d_bar) as f64).ln().max(0.0) / n).sqrt();
        (noise_term + lambda * q.group_weight(d_bar) * inv_norm) / signal
    });

    let thresholds = VerdictThresholds::default();
    let verdicts = ConditionVerdicts {
        gram_positive: min_eig > 0.0,
        irrepresentable_holds: irrep.value < 1.0,
        lambda_growth_ok: lambda_growth_scalar >= thresholds.lambda_growth_min,
        signal_margin_ok: signal_margin_scalar
            .is_none_or(|v| v <= thresholds.signal_margin_max),
        all_hold: false,
    };
    let all_hold = verdicts.gram_positive
        && verdicts.irrepresentable_holds
        && verdicts.lambda_growth_ok
        && verdicts.signal_margin_ok;

    Ok(DiagnosticsReport {
        n: design.n(),
        m: design.m(),
        p: design.p(),
        support_size: s,
        support,
        max_group_size: d_bar,
        q,
        lambda,
        sigma,
        min_gram_eigenvalue: min_eig,
        irrepresentable_constant: irrep.value,
        irrepresentable_exact: irrep.exact,
        irrepresentable_upper: irrep.upper_bound,
        irrepresentable_gap: 1.0 - irrep.value,
        min_signal,
        lambda_growth_scalar,
        signal_margin_scalar,
        kappa,
        thresholds,
        verdicts: ConditionVerdicts { all_hold, ..verdicts },
    })
}

/// Closed-form rate bounds for prediction and l1 estimation error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateBounds {
    /// `9 A^2 sigma^2 / kappa^2 * s d_bar log(m) / n`.
    pub prediction: f64,
    /// `12 A^2 sigma^2 s d_bar / kappa^2 * sqrt(log(m) / n)`.
    pub l1: f64,
}

pub fn rate_bounds(
    a_factor: f64,
    sigma: f64,
    kappa: f64,
    s: usize,
    d_bar: usize,
    m: usize,
    n: usize,
) -> Result<RateBounds> {
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    if m < 2 || n < 1 {
        return Err(Error::InvalidInput("require m >= 2 and n >= 1".into()));
    }
    let a2s2 = a_factor * a_factor * sigma * sigma;
    let sd = (s * d_bar) as f64;
    let log_m = (m as f64).ln();
    let n = n as f64;
    Ok(RateBounds {
        prediction: 9.0 * a2s2 / (kappa * kappa) * sd * log_m / n,
        l1: 12.0 * a2s2 * sd / (kappa * kappa) * (log_m / n).sqrt(),
    })
}

/// Right-hand side of the sparsity oracle inequality at a candidate:
///
/// ```text
/// (1 + delta) * [ (1/n) ||f* - X b||^2
///                 + C(delta) A^2 sigma^2 / kappa^2 * d_bar |S(b)| log(m) / n ]
/// ```
///
/// with `C(delta) = 8 b^2 / (b - 1)` for `b = 1 + 2/delta`, the constant
/// the decoupling argument produces.
#[allow(clippy::too_many_arguments)]
pub fn oracle_bound_rhs(
    design: &GroupedDesign,
    f_star: &DVector<f64>,
    beta: &Coefficients,
    delta: f64,
    kappa_s_delta: f64,
    a_factor: f64,
    sigma: f64,
    m: usize,
    n: usize,
) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    if kappa_s_delta.is_nan() || kappa_s_delta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "kappa(s', delta) must be positive, got {kappa_s_delta}"
        )));
    }
    if f_star.len() != design.n() {
        return Err(Error::DimensionMismatch(format!(
            "f* has length {} but the design has {} rows",
            f_star.len(),
            design.n()
        )));
    }
    let approx = (f_star - design.matrix() * beta.vector()).norm_squared() / design.n() as f64;
    let b = 1.0 + 2.0 / delta;
    let c_delta = 8.0 * b * b / (b - 1.0);
    let sparsity = c_delta * a_factor * a_factor * sigma * sigma
        / (kappa_s_delta * kappa_s_delta)
        * design.layout().max_size() as f64
        * beta.active_set().len() as f64
        * (m as f64).ln()
        / n as f64;
    Ok((1.0 + delta) * (approx + sparsity))
}

/// Oracle-set membership: `(1/n) ||f* - X b||^2 <= bound_constant *
/// lambda^2 |S(b)|`.
pub fn oracle_set_member(
    design: &GroupedDesign,
    f_star: &DVector<f64>,
    beta: &Coefficients,
    bound_constant: f64,
    lambda: f64,
) -> Result<bool> {
    if f_star.len() != design.n() {
        return Err(Error::DimensionMismatch(format!(
            "f* has length {} but the design has {} rows",
            f_star.len(),
            design.n()
        )));
    }
    let approx = (f_star - design.matrix() * beta.vector()).norm_squared() / design.n() as f64;
    Ok(approx <= bound_constant * lambda * lambda * beta.active_set().len() as f64)
}
