//! Core data model: grouped designs, the penalty exponent family, and the
//! penalized least-squares objective.
//!
//! The estimator minimizes
//!
//! ```text
//! (1/2n) ||y - X b||_2^2  +  lambda * sum_j d_j^(1/q') ||b_j||_q
//! ```
//!
//! over coefficient vectors `b` partitioned into `p` groups of sizes `d_j`,
//! where `q'` is the conjugate exponent of `q` (`1/q + 1/q' = 1`). Groups
//! are stored as contiguous column ranges; callers permute columns up front
//! so that per-group slicing stays allocation-free.

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Within-group norm exponent `q` in `[1, inf]`.
///
/// The exact values 1, 2, and infinity are enumerated so that closed-form
/// code paths are dispatched structurally rather than by floating-point
/// equality tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Q {
    One,
    Two,
    Inf,
    Other(f64),
}

impl Q {
    /// Classify a numeric exponent, mapping 1, 2, and infinity to their
    /// enumerated variants.
    pub fn from_value(q: f64) -> Result<Q> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidInput(format!("q must lie in [1, inf], got {q}")));
        }
        Ok(if q == 1.0 {
            Q::One
        } else if q == 2.0 {
            Q::Two
        } else if q.is_infinite() {
            Q::Inf
        } else {
            Q::Other(q)
        })
    }

    /// Parse the command-line spelling: "1", "2", "inf", or a decimal.
    pub fn parse(text: &str) -> Result<Q> {
        match text.trim() {
            "1" => Ok(Q::One),
            "2" => Ok(Q::Two),
            "inf" | "Inf" | "INF" | "infinity" => Ok(Q::Inf),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("cannot parse q from {other:?}")))?;
                Q::from_value(v)
            }
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Q::One => 1.0,
            Q::Two => 2.0,
            Q::Inf => f64::INFINITY,
            Q::Other(q) => q,
        }
    }

    /// Conjugate exponent `q'` with `1/q + 1/q' = 1` (and `1/inf = 0`).
    pub fn conjugate(self) -> Q {
        match self {
            Q::One => Q::Inf,
            Q::Two => Q::Two,
            Q::Inf => Q::One,
            Q::Other(q) => Q::from_value(q / (q - 1.0)).expect("conjugate of q > 1 is finite"),
        }
    }

    /// Group-size weight `d^(1/q')` attached to a group of size `d`.
    pub fn group_weight(self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            Q::One => 1.0,
            Q::Two => d.sqrt(),
            Q::Inf => d,
            Q::Other(q) => d.powf((q - 1.0) / q),
        }
    }

    fn spelling(self) -> String {
        match self {
            Q::One => "1".to_string(),
            Q::Two => "2".to_string(),
            Q::Inf => "inf".to_string(),
            Q::Other(q) => format!("{q}"),
        }
    }
}

impl Serialize for Q {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.spelling())
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Q, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        let repr = Repr::deserialize(deserializer)?;
        let parsed = match repr {
            Repr::Text(t) => Q::parse(&t),
            Repr::Number(v) => Q::from_value(v),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `lq` norm of a vector, with exact branches for q in {1, 2, inf}.
///
/// For general q the sum of powers is computed on entries scaled by the
/// largest magnitude, so intermediate powers cannot overflow.
pub fn lq_norm(v: DVectorView<'_, f64>, q: Q) -> f64 {
    match q {
        Q::One => v.iter().map(|x| x.abs()).sum(),
        Q::Two => v.norm(),
        Q::Inf => v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())),
        Q::Other(q) => {
            let peak = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            if peak == 0.0 {
                return 0.0;
            }
            let sum: f64 = v.iter().map(|x| (x.abs() / peak).powf(q)).sum();
            peak * sum.powf(1.0 / q)
        }
    }
}

/// Norm dual to `lq`, i.e. the `lq'` norm.
pub fn dual_norm(v: DVectorView<'_, f64>, q: Q) -> f64 {
    lq_norm(v, q.conjugate())
}

/// Contiguous partition of `0..m` into `p` groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLayout {
    sizes: Vec<usize>,
    starts: Vec<usize>,
    total: usize,
}

impl GroupLayout {
    pub fn new(sizes: &[usize]) -> Result<GroupLayout> {
        if sizes.is_empty() {
            return Err(Error::InvalidInput("at least one group is required".into()));
        }
        if let Some(j) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::InvalidInput(format!("group {j} has size 0")));
        }
        let mut starts = Vec::with_capacity(sizes.len());
        let mut total = 0usize;
        for &d in sizes {
            starts.push(total);
            total += d;
        }
        Ok(GroupLayout { sizes: sizes.to_vec(), starts, total })
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn size(&self, j: usize) -> usize {
        self.sizes[j]
    }

    pub fn start(&self, j: usize) -> usize {
        self.starts[j]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn max_size(&self) -> usize {
        *self.sizes.iter().max().expect("layout is nonempty")
    }

    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.starts[j]..self.starts[j] + self.sizes[j]
    }
}

/// Design matrix with a contiguous group partition of its columns.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedDesign {
    x: DMatrix<f64>,
    layout: GroupLayout,
    /// Per-column factors applied by `standardize`; `None` for raw designs.
    column_scales: Option<Vec<f64>>,
}

impl GroupedDesign {
    /// Wrap a raw design without rescaling. The partition must cover all
    /// columns and every group must be nonempty.
    pub fn from_raw(x: DMatrix<f64>, group_sizes: &[usize]) -> Result<GroupedDesign> {
        let layout = GroupLayout::new(group_sizes)?;
        if x.nrows() == 0 {
            return Err(Error::InvalidInput("design must have at least one row".into()));
        }
        if layout.total_len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "group sizes sum to {} but the design has {} columns",
                layout.total_len(),
                x.ncols()
            )));
        }
        Ok(GroupedDesign { x, layout, column_scales: None })
    }

    /// Wrap and rescale every column `k` by `sqrt(n) / ||x_k||` so that
    /// `(1/n) ||x_k||^2 = 1`. The factors are recorded so coefficients can
    /// be mapped back to the original units.
    pub fn standardize(x: DMatrix<f64>, group_sizes: &[usize]) -> Result<GroupedDesign> {
        let mut design = GroupedDesign::from_raw(x, group_sizes)?;
        let n = design.n() as f64;
        let mut scales = Vec::with_capacity(design.m());
        for k in 0..design.m() {
            let norm = design.x.column(k).norm();
            if norm == 0.0 {
                return Err(Error::ZeroColumn { column: k });
            }
            let scale = n.sqrt() / norm;
            design.x.column_mut(k).scale_mut(scale);
            scales.push(scale);
        }
        design.column_scales = Some(scales);
        Ok(design)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn p(&self) -> usize {
        self.layout.group_count()
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Columns of group `j` as a view.
    pub fn group(&self, j: usize) -> DMatrixView<'_, f64> {
        self.x.columns(self.layout.start(j), self.layout.size(j))
    }

    /// Scale factors recorded by `standardize`, if any.
    pub fn column_scales(&self) -> Option<&[f64]> {
        self.column_scales.as_deref()
    }

    /// Map coefficients on the standardized scale back to original units.
    /// With `x_std = x * diag(scale)`, the original-unit coefficients are
    /// `scale[k] * beta[k]`.
    pub fn to_original_units(&self, beta: &Coefficients) -> Result<Coefficients> {
        let scales = self.column_scales.as_ref().ok_or_else(|| {
            Error::InvalidInput("design was not standardized; no scales recorded".into())
        })?;
        let vec = DVector::from_iterator(
            self.m(),
            beta.vector().iter().zip(scales.iter()).map(|(b, s)| b * s),
        );
        Coefficients::from_vector(self.layout.clone(), vec)
    }

    /// `(1/n) X_j^T r` for every group, concatenated.
    pub fn correlations(&self, residual: &DVector<f64>) -> DVector<f64> {
        (self.x.transpose() * residual) / self.n() as f64
    }
}

/// Subtract column means from `x` (and optionally from `y`), returning the
/// means. Used as the optional centering preprocessing step.
pub fn center_columns(x: &mut DMatrix<f64>, y: Option<&mut DVector<f64>>) -> Vec<f64> {
    let n = x.nrows() as f64;
    let mut means = Vec::with_capacity(x.ncols());
    for k in 0..x.ncols() {
        let mean = x.column(k).sum() / n;
        x.column_mut(k).add_scalar_mut(-mean);
        means.push(mean);
    }
    if let Some(y) = y {
        let mean = y.sum() / n;
        y.add_scalar_mut(-mean);
    }
    means
}

/// Penalty configuration: exponent, level, and per-group weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub q: Q,
    pub lambda: f64,
    weights: Vec<f64>,
}

impl PenaltySpec {
    pub fn new(q: Q, lambda: f64, group_sizes: &[usize]) -> Result<PenaltySpec> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
        }
        let weights = group_sizes.iter().map(|&d| q.group_weight(d)).collect();
        Ok(PenaltySpec { q, lambda, weights })
    }

    pub fn for_design(q: Q, lambda: f64, design: &GroupedDesign) -> Result<PenaltySpec> {
        PenaltySpec::new(q, lambda, design.layout().sizes())
    }

    /// `d_j^(1/q')` for group `j`.
    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_lambda(&self, lambda: f64) -> PenaltySpec {
        PenaltySpec { q: self.q, lambda, weights: self.weights.clone() }
    }
}

/// Coefficient vector partitioned by the same layout as a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    layout: GroupLayout,
    beta: DVector<f64>,
}

impl Coefficients {
    pub fn zeros(layout: GroupLayout) -> Coefficients {
        let m = layout.total_len();
        Coefficients { layout, beta: DVector::zeros(m) }
    }

    pub fn from_vector(layout: GroupLayout, beta: DVector<f64>) -> Result<Coefficients> {
        if beta.len() != layout.total_len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has length {} but the layout covers {} columns",
                beta.len(),
                layout.total_len()
            )));
        }
        Ok(Coefficients { layout, beta })
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn vector_mut(&mut self) -> &mut DVector<f64> {
        &mut self.beta
    }

    pub fn group(&self, j: usize) -> DVectorView<'_, f64> {
        self.beta.rows(self.layout.start(j), self.layout.size(j))
    }

    pub fn set_group(&mut self, j: usize, values: &DVector<f64>) {
        self.beta
            .rows_mut(self.layout.start(j), self.layout.size(j))
            .copy_from(values);
    }

    /// Groups with `||b_j||_inf > tol`, recomputed on every call so the set
    /// can never go stale.
    pub fn active_set_with_tol(&self, tol: f64) -> Vec<usize> {
        (0..self.layout.group_count())
            .filter(|&j| lq_norm(self.group(j), Q::Inf) > tol)
            .collect()
    }

    /// Groups with any exactly nonzero entry.
    pub fn active_set(&self) -> Vec<usize> {
        self.active_set_with_tol(0.0)
    }

    /// `min_{j active} ||b_j||_inf`, or `None` when everything is zero.
    pub fn min_active_magnitude(&self) -> Option<f64> {
        self.active_set()
            .into_iter()
            .map(|j| lq_norm(self.group(j), Q::Inf))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// `sum_j d_j^(1/q') ||b_j||_q` (the penalty without the lambda factor).
pub fn penalty_value(beta: &Coefficients, spec: &PenaltySpec) -> Result<f64> {
    if spec.weights.len() != beta.layout.group_count() {
        return Err(Error::DimensionMismatch(format!(
            "penalty has {} weights but the coefficients have {} groups",
            spec.weights.len(),
            beta.layout.group_count()
        )));
    }
    Ok((0..beta.layout.group_count())
        .map(|j| spec.weight(j) * lq_norm(beta.group(j), spec.q))
        .sum())
}

/// `(1/2n) ||y - X b||^2 + lambda * penalty_value(b)`.
pub fn objective(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &Coefficients,
    spec: &PenaltySpec,
) -> Result<f64> {
    if y.len() != design.n() {
        return Err(Error::DimensionMismatch(format!(
            "response has length {} but the design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if beta.layout != *design.layout() {
        return Err(Error::DimensionMismatch(
            "coefficients and design use different group layouts".into(),
        ));
    }
    let residual = y - design.matrix() * beta.vector();
    let fit = residual.norm_squared() / (2.0 * design.n() as f64);
    Ok(fit + spec.lambda * penalty_value(beta, spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecd(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn conjugates_and_weights() {
        assert_eq!(Q::One.conjugate(), Q::Inf);
        assert_eq!(Q::Inf.conjugate(), Q::One);
        assert_eq!(Q::Two.conjugate(), Q::Two);
        let q = Q::Other(1.5);
        assert!((q.conjugate().value() - 3.0).abs() < 1e-15);
        // q=1 => w=1; q=inf => w=d; q=2 => w=sqrt(d)
        assert_eq!(Q::One.group_weight(7), 1.0);
        assert_eq!(Q::Inf.group_weight(7), 7.0);
        assert!((Q::Two.group_weight(4) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn q_parsing_round_trip() {
        assert_eq!(Q::parse("1").unwrap(), Q::One);
        assert_eq!(Q::parse("inf").unwrap(), Q::Inf);
        assert_eq!(Q::parse("1.5").unwrap(), Q::Other(1.5));
        assert!(Q::parse("0.5").is_err());
        assert_eq!(Q::from_value(2.0).unwrap(), Q::Two);
        let json = serde_json::to_string(&Q::Other(2.5)).unwrap();
        let back: Q = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Q::Other(2.5));
    }

    #[test]
    fn norms_match_known_values() {
        let v = vecd(&[3.0, 4.0]);
        assert!((lq_norm(v.as_view(), Q::Two) - 5.0).abs() < 1e-15);
        let v = vecd(&[3.0, -4.0]);
        assert!((lq_norm(v.as_view(), Q::Inf) - 4.0).abs() < 1e-15);
        let v = vecd(&[1.0, 1.0, 1.0]);
        let expect = 3.0_f64.powf(1.0 / 3.0);
        assert!((lq_norm(v.as_view(), Q::Other(3.0)) - expect).abs() < 1e-12);
    }

    #[test]
    fn general_norm_does_not_overflow() {
        let v = vecd(&[1e300, 1e300]);
        let norm = lq_norm(v.as_view(), Q::Other(4.0));
        assert!(norm.is_finite());
        assert!((norm - 1e300 * 2.0_f64.powf(0.25)).abs() / norm < 1e-12);
    }

    #[test]
    fn standardize_scales_columns() {
        // Column of ones over n=4 already has (1/n)||col||^2 = 1.
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 0.0]);
        let design = GroupedDesign::standardize(x, &[1, 1]).unwrap();
        for k in 0..2 {
            let col_norm_sq = design.matrix().column(k).norm_squared() / 4.0;
            assert!((col_norm_sq - 1.0).abs() < 1e-12, "column {k}: {col_norm_sq}");
        }
        // First column untouched, second scaled by sqrt(n)/||col|| = 1.
        assert!((design.matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((design.matrix()[(0, 1)] - 2.0).abs() < 1e-15);
        assert!((design.column_scales().unwrap()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_rejects_zero_column() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let err = GroupedDesign::standardize(x, &[2]).unwrap_err();
        assert_eq!(err, Error::ZeroColumn { column: 1 });
    }

    #[test]
    fn layout_must_cover_columns() {
        let x = DMatrix::from_element(3, 4, 1.0);
        assert!(GroupedDesign::from_raw(x.clone(), &[2, 1]).is_err());
        assert!(GroupedDesign::from_raw(x.clone(), &[2, 2]).is_ok());
        assert!(GroupedDesign::from_raw(x, &[2, 0, 2]).is_err());
    }

    #[test]
    fn penalty_examples() {
        // One group of size 4, q=2, all ones: sqrt(4) * 2 = 4.
        let layout = GroupLayout::new(&[4]).unwrap();
        let beta = Coefficients::from_vector(layout, vecd(&[1.0, 1.0, 1.0, 1.0])).unwrap();
        let spec = PenaltySpec::new(Q::Two, 0.3, &[4]).unwrap();
        assert!((penalty_value(&beta, &spec).unwrap() - 4.0).abs() < 1e-15);

        // q=1: weights are all 1 and the penalty is the plain l1 norm.
        let layout = GroupLayout::new(&[2, 2]).unwrap();
        let beta = Coefficients::from_vector(layout, vecd(&[1.0, -2.0, 3.0, -4.0])).unwrap();
        let spec = PenaltySpec::new(Q::One, 0.3, &[2, 2]).unwrap();
        assert!((penalty_value(&beta, &spec).unwrap() - 10.0).abs() < 1e-15);

        // Zero vector has zero penalty.
        let layout = GroupLayout::new(&[2, 2]).unwrap();
        let beta = Coefficients::zeros(layout);
        assert_eq!(penalty_value(&beta, &spec).unwrap(), 0.0);
    }

    #[test]
    fn objective_examples() {
        let x = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let design = GroupedDesign::from_raw(x, &[1, 1]).unwrap();
        let y = vecd(&[3.0, 4.0]);
        let spec = PenaltySpec::for_design(Q::Two, 0.5, &design).unwrap();
        // beta = 0: ||y||^2 / (2n) = 25 / 4.
        let zero = Coefficients::zeros(design.layout().clone());
        assert!((objective(&design, &y, &zero, &spec).unwrap() - 6.25).abs() < 1e-14);
        // Exact fit and lambda = 0 gives 0.
        let spec0 = spec.with_lambda(0.0);
        let beta = Coefficients::from_vector(design.layout().clone(), y.clone()).unwrap();
        assert!(objective(&design, &y, &beta, &spec0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn active_set_recomputed() {
        let layout = GroupLayout::new(&[2, 1, 2]).unwrap();
        let mut beta =
            Coefficients::from_vector(layout, vecd(&[0.0, 0.0, 1.0, 0.0, -2.0])).unwrap();
        assert_eq!(beta.active_set(), vec![1, 2]);
        assert_eq!(beta.min_active_magnitude(), Some(1.0));
        beta.vector_mut()[2] = 0.0;
        assert_eq!(beta.active_set(), vec![2]);
    }

    #[test]
    fn centering_removes_means() {
        let mut x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 6.0]);
        let mut y = vecd(&[1.0, 2.0, 3.0]);
        let means = center_columns(&mut x, Some(&mut y));
        assert!((means[0] - 3.0).abs() < 1e-15);
        assert!(x.column(0).sum().abs() < 1e-12);
        assert!(y.sum().abs() < 1e-12);
    }

    #[test]
    fn original_unit_mapping_inverts_scaling() {
        let x = DMatrix::from_column_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let design = GroupedDesign::standardize(x.clone(), &[1, 1]).unwrap();
        let beta_std =
            Coefficients::from_vector(design.layout().clone(), vecd(&[1.0, 1.0])).unwrap();
        let beta_orig = design.to_original_units(&beta_std).unwrap();
        // x_std * beta_std must equal x * beta_orig.
        let lhs = design.matrix() * beta_std.vector();
        let rhs = x * beta_orig.vector();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
