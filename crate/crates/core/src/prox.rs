//! Proximal operators and ball projections for `lq` norms, plus the
//! subdifferential membership test behind the optimality certificates.
//!
//! Everything routes through the Moreau decomposition: the prox of
//! `t ||.||_q` is the identity minus the Euclidean projection onto the
//! dual-norm ball of radius `t`,
//!
//! ```text
//! prox_{t ||.||_q}(v) = v - proj_{ ||.||_{q'} <= t }(v).
//! ```
//!
//! Projections have exact branches for p in {1, 2, inf} (sort-threshold,
//! radial scaling, clipping); other exponents are solved by bisection on
//! the KKT multiplier of the pth-power constraint.

use nalgebra::{DVector, DVectorView};

use crate::model::{dual_norm, lq_norm, Q};

/// Euclidean projection of `v` onto `{x : ||x||_p <= r}`.
pub fn project_ball(v: &DVector<f64>, r: f64, p: Q) -> DVector<f64> {
    assert!(r >= 0.0, "ball radius must be nonnegative, got {r}");
    if r == 0.0 {
        return DVector::zeros(v.len());
    }
    if lq_norm(v.as_view(), p) <= r {
        return v.clone();
    }
    match p {
        Q::Two => v * (r / v.norm()),
        Q::Inf => v.map(|x| x.clamp(-r, r)),
        Q::One => project_l1(v, r),
        Q::Other(p) => project_general(v, r, p),
    }
}

/// Exact sort-and-threshold projection onto the l1 ball (O(d log d)).
/// Assumes `||v||_1 > r`, so the solution lies on the boundary.
fn project_l1(v: &DVector<f64>, r: f64) -> DVector<f64> {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).expect("magnitudes are finite"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumulative += m;
        let candidate = (cumulative - r) / (k + 1) as f64;
        if candidate >= m {
            break;
        }
        theta = candidate;
    }
    v.map(|x| x.signum() * (x.abs() - theta).max(0.0))
}

/// Projection onto the lp ball for p in (1, inf) by bisection on the
/// Lagrange multiplier of `||x||_p^p <= r^p`.
///
/// For a multiplier `mu >= 0` each coordinate solves the monotone scalar
/// equation `y + mu * p * y^(p-1) = |v_i|` on `[0, |v_i|]`; the outer
/// bisection drives `||x(mu)||_p` to `r`. Assumes `||v||_p > r`.
fn project_general(v: &DVector<f64>, r: f64, p: f64) -> DVector<f64> {
    let mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let eval = |mu: f64| -> Vec<f64> {
        mags.iter().map(|&a| solve_coordinate(a, mu, p)).collect()
    };
    let norm_p = |ys: &[f64]| -> f64 {
        let peak = ys.iter().fold(0.0_f64, |acc, &y| acc.max(y));
        if peak == 0.0 {
            return 0.0;
        }
        peak * ys.iter().map(|&y| (y / peak).powf(p)).sum::<f64>().powf(1.0 / p)
    };

    // Bracket the multiplier: at mu=0 the norm exceeds r; grow until below.
    let mut lo = 0.0;
    let mut hi = mags.iter().cloned().fold(0.0_f64, f64::max).max(1.0);
    for _ in 0..200 {
        if norm_p(&eval(hi)) < r {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_p(&eval(mid)) > r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.max(1e-300) {
            break;
        }
    }
    let ys = eval(0.5 * (lo + hi));
    DVector::from_iterator(v.len(), v.iter().zip(ys).map(|(x, y)| x.signum() * y))
}

/// Root of `y + mu * p * y^(p-1) = a` on `[0, a]` for `a, mu >= 0`, `p > 1`.
fn solve_coordinate(a: f64, mu: f64, p: f64) -> f64 {
    if a == 0.0 || mu == 0.0 {
        return if mu == 0.0 { a } else { 0.0 };
    }
    let f = |y: f64| y + mu * p * y.powf(p - 1.0) - a;
    let (mut lo, mut hi) = (0.0, a);
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `argmin_x 0.5 ||x - v||^2 + t ||x||_q`, via the Moreau decomposition.
///
/// The result is exactly zero when `||v||_{q'} <= t`, the block analogue of
/// soft thresholding.
pub fn prox_lq(v: &DVector<f64>, t: f64, q: Q) -> DVector<f64> {
    assert!(t >= 0.0, "prox weight must be nonnegative, got {t}");
    v - project_ball(v, t, q.conjugate())
}

/// Violation score for `g` as a candidate subgradient of `||.||_q` at `v`.
///
/// Zero exactly when `g` lies in the subdifferential: `||g||_{q'} <= 1`,
/// and additionally `<g, v> = ||v||_q` when `v != 0`. This dual-pairing
/// characterization covers every branch of the subdifferential, including
/// the convex-hull case for `q = inf` with tied maximal coordinates, so no
/// tie-break convention is needed.
pub fn subgradient_residual(v: DVectorView<'_, f64>, g: DVectorView<'_, f64>, q: Q) -> f64 {
    assert_eq!(v.len(), g.len(), "subgradient length must match the point");
    let excess = (dual_norm(g, q) - 1.0).max(0.0);
    let is_zero = v.iter().all(|&x| x == 0.0);
    if is_zero {
        excess
    } else {
        excess + (g.dot(&v) - lq_norm(v, q)).abs()
    }
}
