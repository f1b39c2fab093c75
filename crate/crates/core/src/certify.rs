//! Optimality certification and the compact-solution reduction.
//!
//! A coefficient vector is optimal if and only if for every group `j` the
//! scaled correlation `c_j = (1/n) X_j^T (y - X b)` equals
//! `lambda * d_j^(1/q') * g_j` for some subgradient `g_j` of `||.||_q` at
//! `b_j`. The certificate reports one nonnegative violation score per
//! group and the verdict at an explicit tolerance.
//!
//! `reduce_to_compact` turns any certified solution into one with at most
//! `n` active groups while preserving the fitted values and objective
//! exactly, by stepping along null directions of the active fitted-block
//! vectors until group multipliers hit zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dual_norm, lq_norm, objective, Coefficients, GroupedDesign, PenaltySpec, Q};
use crate::prox::subgradient_residual;

/// Per-group KKT violation scores and the optimality verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KktCertificate {
    pub per_group_residual: Vec<f64>,
    pub max_residual: f64,
    pub tol: f64,
    pub optimal: bool,
}

/// Certify `beta` against the data at tolerance `tol`.
///
/// For `b_j = 0` the score is `max(0, ||c_j||_{q'} - lambda w_j)`; for an
/// active group it is `lambda w_j` times the subgradient violation of
/// `c_j / (lambda w_j)` at the normalized block `b_j / ||b_j||_q` (the
/// subdifferential of a norm is invariant to positive scaling, and
/// normalizing makes the certificate exactly 1-homogeneous under joint
/// scaling of `y`, `lambda`, and `beta`). With `lambda = 0` the
/// certificate degenerates to the gradient check `||c_j||_inf <= tol`.
pub fn kkt_check(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &Coefficients,
    spec: &PenaltySpec,
    tol: f64,
) -> Result<KktCertificate> {
    if y.len() != design.n() {
        return Err(Error::DimensionMismatch(format!(
            "response has length {} but the design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if beta.layout() != design.layout() {
        return Err(Error::DimensionMismatch(
            "coefficients and design use different group layouts".into(),
        ));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be nonnegative, got {tol}")));
    }

    let residual = y - design.matrix() * beta.vector();
    let correlations = design.correlations(&residual);
    let layout = design.layout();
    let mut per_group = Vec::with_capacity(design.p());
    for j in 0..design.p() {
        let c_j = correlations.rows(layout.start(j), layout.size(j));
        let score = if spec.lambda == 0.0 {
            lq_norm(c_j, Q::Inf)
        } else {
            let threshold = spec.lambda * spec.weight(j);
            let block = beta.group(j);
            if block.iter().all(|&x| x == 0.0) {
                (dual_norm(c_j, spec.q) - threshold).max(0.0)
            } else {
                let unit = DVector::from_column_slice(block.as_slice()) / lq_norm(block, spec.q);
                let g = DVector::from_column_slice(c_j.as_slice()) / threshold;
                threshold * subgradient_residual(unit.as_view(), g.as_view(), spec.q)
            }
        };
        per_group.push(score);
    }
    let max_residual = per_group.iter().cloned().fold(0.0_f64, f64::max);
    Ok(KktCertificate { per_group_residual: per_group, max_residual, tol, optimal: max_residual <= tol })
}

/// Outcome of the compact-solution reduction.
#[derive(Clone, Debug)]
pub struct Compaction {
    pub beta: Coefficients,
    /// Whether any group was eliminated.
    pub changed: bool,
    /// Set when a numerical rank decision was too ambiguous to act on; the
    /// input is returned unchanged in that case.
    pub rank_ambiguous: bool,
}

/// Singular values below this fraction of the largest are treated as zero
/// when detecting dependence among active fitted vectors.
const RANK_TOL: f64 = 1e-10;

/// Reduce a certified solution to one with at most `n` active groups.
///
/// While more than `n` groups are active, the fitted block vectors
/// `X_j b_j` are linearly dependent; a null-space combination `alpha`
/// allows rescaling each active block by `1 + t * alpha_j` without changing
/// `X b`. Stepping to the first `t` where a multiplier reaches zero
/// eliminates one group, keeps every multiplier nonnegative (so block
/// directions, and hence subgradients, are preserved), and never increases
/// the penalty. Repeats until `|S| <= n`.
pub fn reduce_to_compact(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &Coefficients,
    spec: &PenaltySpec,
    tol: f64,
) -> Result<Compaction> {
    let certificate = kkt_check(design, y, beta, spec, tol)?;
    if !certificate.optimal {
        return Err(Error::NotOptimal { max_residual: certificate.max_residual, tol });
    }

    let fitted_before = design.matrix() * beta.vector();
    let drift_cap = 1e-11 * (1.0 + fitted_before.amax());

    let mut current = beta.clone();
    let mut changed = false;
    loop {
        let active = current.active_set();
        if active.len() <= design.n() {
            return Ok(Compaction { beta: current, changed, rank_ambiguous: false });
        }

        let fitted_blocks = active_fitted_matrix(design, &current, &active);
        let stepped = match null_direction(&fitted_blocks) {
            Some(alpha) => {
                let mut candidate = current.clone();
                apply_boundary_step(&mut candidate, spec, &active, alpha);
                let drift = (design.matrix() * candidate.vector() - &fitted_before).amax();
                (drift <= drift_cap).then_some(candidate)
            }
            None => None,
        };
        match stepped {
            Some(candidate) => {
                current = candidate;
                changed = true;
            }
            None => {
                // Could not establish dependence cleanly; return the input.
                return Ok(Compaction { beta: beta.clone(), changed: false, rank_ambiguous: true });
            }
        }
    }
}

/// Columns are the fitted vectors `X_j b_j` for the active groups.
fn active_fitted_matrix(
    design: &GroupedDesign,
    beta: &Coefficients,
    active: &[usize],
) -> DMatrix<f64> {
    let n = design.n();
    let mut m = DMatrix::zeros(n, active.len());
    for (k, &j) in active.iter().enumerate() {
        let block = DVector::from_column_slice(beta.group(j).as_slice());
        let fitted = design.group(j) * block;
        m.column_mut(k).copy_from(&fitted);
    }
    m
}

/// A unit vector `alpha` with `V alpha ~ 0`, or `None` when the numerical
/// rank decision is ambiguous.
fn null_direction(v: &DMatrix<f64>) -> Option<DVector<f64>> {
    let s = v.ncols();
    let svd = v.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if sigma_max == 0.0 {
        // All fitted vectors vanish; any direction works.
        let mut alpha = DVector::zeros(s);
        alpha[0] = 1.0;
        return Some(alpha);
    }

    // Orthogonalize candidate directions against the numerical row space.
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * sigma_max)
        .collect();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for seed in 0..s {
        let mut alpha = DVector::zeros(s);
        alpha[seed] = 1.0;
        for &i in &kept {
            let row = v_t.row(i).transpose();
            let coef = row.dot(&alpha);
            alpha -= row * coef;
        }
        let norm = alpha.norm();
        if norm > 1e-8 {
            let alpha = alpha / norm;
            let residual = (v * &alpha).norm() / sigma_max;
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, alpha));
            }
        }
    }
    match best {
        Some((residual, mut alpha)) if residual <= RANK_TOL => {
            // Orthogonalization residue in near-zero components would be
            // amplified by the boundary step; scrub it.
            let peak = alpha.amax();
            for a in alpha.iter_mut() {
                if a.abs() < 1e-12 * peak {
                    *a = 0.0;
                }
            }
            Some(alpha)
        }
        _ => None,
    }
}

/// Rescale active blocks by `1 + t* alpha_k`, choosing the sign so the
/// penalty does not increase and `t*` as the first multiplier boundary.
fn apply_boundary_step(
    beta: &mut Coefficients,
    spec: &PenaltySpec,
    active: &[usize],
    mut alpha: DVector<f64>,
) {
    let penalty_slope: f64 = active
        .iter()
        .enumerate()
        .map(|(k, &j)| spec.weight(j) * lq_norm(beta.group(j), spec.q) * alpha[k])
        .sum();
    if penalty_slope > 0.0 || (penalty_slope == 0.0 && alpha.iter().all(|&a| a >= 0.0)) {
        alpha.neg_mut();
    }

    let t_star = alpha
        .iter()
        .filter(|&&a| a < 0.0)
        .map(|&a| -1.0 / a)
        .fold(f64::INFINITY, f64::min);
    debug_assert!(t_star.is_finite(), "a boundary must exist along the null direction");

    for (k, &j) in active.iter().enumerate() {
        let multiplier = 1.0 + t_star * alpha[k];
        // The binding group must land exactly on zero; 1 + t* alpha_k only
        // gets there up to roundoff.
        let factor = if alpha[k] < 0.0 && multiplier.abs() <= 4.0 * f64::EPSILON {
            0.0
        } else {
            multiplier.max(0.0)
        };
        let scaled = DVector::from_column_slice(beta.group(j).as_slice()) * factor;
        beta.set_group(j, &scaled);
    }
}

/// Convenience wrapper asserting the invariants the reduction guarantees;
/// used by tests and the command-line tool.
pub fn verify_reduction(
    design: &GroupedDesign,
    y: &DVector<f64>,
    original: &Coefficients,
    reduced: &Coefficients,
    spec: &PenaltySpec,
) -> Result<()> {
    let drift = (design.matrix() * original.vector() - design.matrix() * reduced.vector())
        .amax();
    if drift > 1e-10 {
        return Err(Error::InvalidInput(format!("fitted values drifted by {drift:e}")));
    }
    let before = objective(design, y, original, spec)?;
    let after = objective(design, y, reduced, spec)?;
    if after > before + 1e-10 {
        return Err(Error::InvalidInput(format!("objective increased from {before} to {after}")));
    }
    Ok(())
}
