//! Log-price regression: design matrices with interaction terms, OLS and
//! feasible WLS, and the usual residual diagnostics.
//!
//! Least squares goes through a singular value decomposition of the
//! column-equilibrated design, so near-collinear interaction columns are
//! detected instead of silently amplified.

mod design;
mod diagnostics;
mod report;

pub use design::{build_design_matrix, ColumnKind, DesignMatrix, ModelSpec, Observation, Predictor};
pub use diagnostics::{
    durbin_watson, estimate_weights, vif, white_test, VifEntry, VifReport, WeightEstimate, WhiteTestResult,
};
pub use report::{run_regression, RegressionReport, WeightMode};

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use thiserror::Error;

/// Residual degrees of freedom above which p values use the normal
/// approximation instead of Student's t.
pub const NORMAL_APPROX_DF: usize = 200;

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("degenerate design: column {column} is {reason}")]
    DegenerateDesign { column: String, reason: String },
    #[error("singular design: collinear columns {}", .columns.join(", "))]
    SingularDesign { columns: Vec<String> },
    #[error("invalid weight {value} at row {index}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "WLS")]
    Wls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: FitMethod,
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// 95% interval per coefficient, from the same reference distribution as
    /// the p values.
    pub conf_int: Vec<(f64, f64)>,
    /// Weighted R² for WLS; centred when the design has an intercept.
    pub r_squared: f64,
    /// Joint test that every non-intercept coefficient is zero.
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    pub df_model: usize,
    pub df_resid: usize,
    /// Residual variance estimate `SSE_w / (n - p)`.
    pub sigma2: f64,
    /// Raw residuals `y - ŷ` on the log scale.
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub weights: Vec<f64>,
    /// Computed on whitened residuals `√w·e`; absent when they are all zero.
    pub durbin_watson: Option<f64>,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|j| self.coefficients[j])
    }
}

pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<FitResult, StatsError> {
    fit(x, y, &vec![1.0; y.len()], FitMethod::Ols)
}

/// Minimises `Σ wᵢ (yᵢ - xᵢβ)²`.
pub fn wls_fit(x: &DesignMatrix, y: &[f64], weights: &[f64]) -> Result<FitResult, StatsError> {
    if weights.len() != y.len() {
        return Err(StatsError::DimensionMismatch(format!(
            "{} weights for {} observations",
            weights.len(),
            y.len()
        )));
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(StatsError::InvalidWeight { index, value });
    }
    fit(x, y, weights, FitMethod::Wls)
}

fn fit(x: &DesignMatrix, y: &[f64], w: &[f64], method: FitMethod) -> Result<FitResult, StatsError> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(StatsError::DimensionMismatch(format!(
            "{} responses for {n} rows",
            y.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::InvalidRecord {
            index: i,
            reason: "non-finite response".into(),
        });
    }
    if n <= p {
        return Err(StatsError::InsufficientData { needed: p + 1, got: n });
    }

    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let xw = DMatrix::from_fn(n, p, |i, j| x.x[(i, j)] * sw[i]);
    let yw = DVector::from_fn(n, |i, _| y[i] * sw[i]);
    let sol = solve_full_rank(xw, &yw, x.labels())?;

    let beta = &sol.coef;
    let fitted: Vec<f64> = (0..n).map(|i| x.x.row(i).dot(&beta.transpose())).collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let sse: f64 = residuals.iter().zip(w).map(|(e, w)| w * e * e).sum();
    let tss: f64 = if x.has_intercept() {
        let ybar = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / w.iter().sum::<f64>();
        y.iter().zip(w).map(|(y, w)| w * (y - ybar).powi(2)).sum()
    } else {
        y.iter().zip(w).map(|(y, w)| w * y * y).sum()
    };
    // a response that only varies by rounding error is treated as constant
    let scale: f64 = y.iter().zip(w).map(|(y, w)| w * y * y).sum();
    let tss = if tss <= 1e-20 * scale { 0.0 } else { tss };
    let r_squared = if tss > 0.0 {
        (1.0 - sse / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let df_resid = n - p;
    let df_model = p - usize::from(x.has_intercept());
    let sigma2 = sse / df_resid as f64;

    let reference = Reference::new(df_resid);
    let crit = reference.critical(0.975);
    let mut std_errors = Vec::with_capacity(p);
    let mut t_values = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    let mut conf_int = Vec::with_capacity(p);
    for j in 0..p {
        let b = beta[j];
        let se = (sigma2 * sol.xtx_inv[(j, j)]).max(0.0).sqrt();
        // an exact fit has zero standard errors; report t = 0, p = 1 for a
        // zero coefficient and an infinite t otherwise
        let t = if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        };
        std_errors.push(se);
        t_values.push(t);
        p_values.push(reference.two_sided(t));
        conf_int.push((b - crit * se, b + crit * se));
    }

    let (f_statistic, f_p_value) = if df_model == 0 {
        (None, None)
    } else {
        let explained = (tss - sse).max(0.0);
        let f = if sse > 0.0 {
            (explained / df_model as f64) / (sse / df_resid as f64)
        } else if explained > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (Some(f), Some(f_sf(f, df_model as f64, df_resid as f64)))
    };

    let whitened: Vec<f64> = residuals.iter().zip(&sw).map(|(e, s)| e * s).collect();
    Ok(FitResult {
        method,
        labels: x.labels().to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        conf_int,
        r_squared,
        f_statistic,
        f_p_value,
        df_model,
        df_resid,
        sigma2,
        residuals,
        fitted,
        weights: w.to_vec(),
        durbin_watson: durbin_watson(&whitened).ok(),
    })
}

enum Reference {
    Normal(Normal),
    T(StudentsT),
}

impl Reference {
    fn new(df: usize) -> Self {
        if df > NORMAL_APPROX_DF {
            Reference::Normal(Normal::standard())
        } else {
            Reference::T(StudentsT::new(0.0, 1.0, df as f64).expect("df > 0"))
        }
    }

    fn two_sided(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        let tail = match self {
            Reference::Normal(d) => d.sf(t.abs()),
            Reference::T(d) => d.sf(t.abs()),
        };
        (2.0 * tail).clamp(0.0, 1.0)
    }

    fn critical(&self, q: f64) -> f64 {
        match self {
            Reference::Normal(d) => d.inverse_cdf(q),
            Reference::T(d) => d.inverse_cdf(q),
        }
    }
}

pub(crate) fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(d1, d2).expect("positive df").sf(f).clamp(0.0, 1.0)
}

struct Solution {
    coef: DVector<f64>,
    /// `(XᵀWX)⁻¹`
    xtx_inv: DMatrix<f64>,
}

type DynSvd = SVD<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Scales every column to unit norm and decomposes. The scaling makes the
/// rank tolerance independent of the columns' units.
fn equilibrated_svd(mut x: DMatrix<f64>, labels: &[String]) -> Result<(DynSvd, Vec<f64>), StatsError> {
    let mut scale = Vec::with_capacity(x.ncols());
    for (j, label) in labels.iter().enumerate().take(x.ncols()) {
        let norm = x.column(j).norm();
        if norm == 0.0 {
            return Err(StatsError::SingularDesign {
                columns: vec![label.clone()],
            });
        }
        x.column_mut(j).scale_mut(1.0 / norm);
        scale.push(1.0 / norm);
    }
    Ok((SVD::new(x, true, true), scale))
}

fn solve_full_rank(x: DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<Solution, StatsError> {
    let p = x.ncols();
    let (svd, scale) = equilibrated_svd(x, labels)?;
    let s = &svd.singular_values;
    let v = svd.v_t.as_ref().expect("requested V").transpose();
    let u = svd.u.as_ref().expect("requested U");
    let smax = s.max();

    let mut collinear: Vec<usize> = Vec::new();
    for k in 0..p {
        if s[k] <= RANK_TOLERANCE * smax {
            let null = v.column(k);
            let big = null.amax();
            collinear.extend((0..p).filter(|&j| null[j].abs() > 0.05 * big));
        }
    }
    if !collinear.is_empty() {
        collinear.sort_unstable();
        collinear.dedup();
        return Err(StatsError::SingularDesign {
            columns: collinear.into_iter().map(|j| labels[j].clone()).collect(),
        });
    }

    let uty = u.transpose() * y;
    let mut coef = DVector::zeros(p);
    let mut xtx_inv = DMatrix::zeros(p, p);
    for k in 0..p {
        let vk = v.column(k);
        coef.axpy(uty[k] / s[k], &vk, 1.0);
        xtx_inv.ger(1.0 / (s[k] * s[k]), &vk, &vk, 1.0);
    }
    for j in 0..p {
        coef[j] *= scale[j];
        for i in 0..p {
            xtx_inv[(i, j)] *= scale[i] * scale[j];
        }
    }
    Ok(Solution { coef, xtx_inv })
}

/// Orthogonal projection of `y` onto the column space of `x`, tolerating rank
/// deficiency.
pub(crate) fn project(x: DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<DVector<f64>, StatsError> {
    let keep: Vec<usize> = (0..x.ncols()).filter(|&j| x.column(j).norm() > 0.0).collect();
    if keep.is_empty() {
        return Ok(DVector::zeros(y.len()));
    }
    let x = x.select_columns(&keep);
    let labels: Vec<String> = keep.iter().map(|&j| labels[j].clone()).collect();
    let (svd, _) = equilibrated_svd(x, &labels)?;
    let s = &svd.singular_values;
    let u = svd.u.as_ref().expect("requested U");
    let smax = s.max();
    let mut fitted = DVector::zeros(y.len());
    for k in 0..s.len() {
        if s[k] > RANK_TOLERANCE * smax {
            let uk = u.column(k);
            fitted.axpy(uk.dot(y), &uk, 1.0);
        }
    }
    Ok(fitted)
}
