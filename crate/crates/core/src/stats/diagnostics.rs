use super::{f_sf, ols_fit, project, ColumnKind, DesignMatrix, FitResult, StatsError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Added to squared residuals before taking logs so exact zeros stay finite.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// `Σ(eᵢ - eᵢ₋₁)² / Σeᵢ²`, in [0, 4].
pub fn durbin_watson(residuals: &[f64]) -> Result<f64, StatsError> {
    if residuals.len() < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: residuals.len(),
        });
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(StatsError::UndefinedStatistic(
            "Durbin-Watson of all-zero residuals".into(),
        ));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((num / den).clamp(0.0, 4.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteTestResult {
    pub aux_r_squared: f64,
    /// `n·R²_aux`, χ² with 2 degrees of freedom.
    pub lm_statistic: f64,
    pub lm_p: f64,
    /// `(R²/2) / ((1 - R²)/(n - 3))`, F(2, n - 3).
    pub f_statistic: f64,
    pub f_p: f64,
}

/// Auxiliary design `[1, z, z²]` with `z` the standardised fitted values.
/// Same column space as `[1, ŷ, ŷ²]`, far better conditioned.
fn fitted_quadratic(fitted: &[f64]) -> Result<DesignMatrix, StatsError> {
    let n = fitted.len() as f64;
    let mean = fitted.iter().sum::<f64>() / n;
    let sd = (fitted.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(StatsError::DegenerateDesign {
            column: "fitted".into(),
            reason: "constant".into(),
        });
    }
    let z: Vec<f64> = fitted.iter().map(|f| (f - mean) / sd).collect();
    DesignMatrix::from_columns(
        vec!["const".into(), "fitted".into(), "fitted^2".into()],
        vec![vec![1.0; z.len()], z.clone(), z.iter().map(|v| v * v).collect()],
    )
}

/// White's test with the fitted-value auxiliary regression
/// `e² = δ₀ + δ₁ŷ + δ₂ŷ²`.
///
/// The F statistic is the standard `(R²/2) / ((1 − R²)/(n − 3))`, which is
/// what an F(2, n − 3) reference requires. The shortcut
/// `(n − 2)R² / (1 − R²)` sometimes quoted alongside those degrees of freedom
/// is not F-distributed with them and is not used.
pub fn white_test(fit: &FitResult) -> Result<WhiteTestResult, StatsError> {
    let n = fit.n();
    if n <= 3 {
        return Err(StatsError::InsufficientData { needed: 4, got: n });
    }
    let aux = fitted_quadratic(&fit.fitted)?;
    let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
    let r2 = ols_fit(&aux, &e2)?.r_squared;
    let lm_statistic = n as f64 * r2;
    let lm_p = ChiSquared::new(2.0).expect("df 2").sf(lm_statistic).clamp(0.0, 1.0);
    let df2 = (n - 3) as f64;
    let f_statistic = if r2 < 1.0 {
        (r2 / 2.0) / ((1.0 - r2) / df2)
    } else {
        f64::INFINITY
    };
    Ok(WhiteTestResult {
        aux_r_squared: r2,
        lm_statistic,
        lm_p,
        f_statistic,
        f_p: f_sf(f_statistic, 2.0, df2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimate {
    pub weights: Vec<f64>,
    /// True when the variance model could not be fitted and unit weights
    /// were substituted.
    pub fallback: bool,
    pub note: Option<String>,
}

/// Feasible WLS weights from an OLS fit: regress `ln(e² + floor)` on the
/// fitted values and their squares, then `wᵢ = 1 / exp(prediction)`.
pub fn estimate_weights(ols: &FitResult) -> WeightEstimate {
    let n = ols.n();
    let fallback = |why: String| {
        log::warn!("weight estimation failed ({why}); using unit weights");
        WeightEstimate {
            weights: vec![1.0; n],
            fallback: true,
            note: Some(why),
        }
    };
    let z: Vec<f64> = ols.residuals.iter().map(|e| (e * e + RESIDUAL_FLOOR).ln()).collect();
    if n > 0 && z.iter().all(|&v| v == z[0]) {
        return WeightEstimate {
            weights: vec![(-z[0]).exp(); n],
            fallback: false,
            note: None,
        };
    }
    if n <= 3 {
        return fallback(format!("{n} observations"));
    }
    let aux = match fitted_quadratic(&ols.fitted) {
        Ok(a) => a,
        Err(e) => return fallback(e.to_string()),
    };
    let pred = match ols_fit(&aux, &z) {
        Ok(f) => f.fitted,
        Err(e) => return fallback(e.to_string()),
    };
    let weights: Vec<f64> = pred.iter().map(|p| (-p).exp()).collect();
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return fallback("variance model produced non-finite weights".into());
    }
    WeightEstimate {
        weights,
        fallback: false,
        note: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub label: String,
    /// `f64::INFINITY` under perfect collinearity.
    pub vif: f64,
    pub r_squared: f64,
    pub perfectly_collinear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
    pub note: Option<String>,
}

/// Variance inflation factors for the continuous columns. Each is regressed
/// on every other column plus a constant; intercept and 0/1 columns get no
/// entry of their own.
pub fn vif(x: &DesignMatrix) -> Result<VifReport, StatsError> {
    let continuous: Vec<usize> = (0..x.ncols())
        .filter(|&j| x.kinds()[j] == ColumnKind::Continuous)
        .collect();
    if continuous.len() < 2 {
        return Ok(VifReport {
            entries: vec![],
            note: Some("VIF needs at least two continuous predictors".into()),
        });
    }
    let n = x.nrows();
    let mut entries = Vec::with_capacity(continuous.len());
    for &j in &continuous {
        let others: Vec<usize> = (0..x.ncols()).filter(|&k| k != j).collect();
        let mut labels: Vec<String> = others.iter().map(|&k| x.labels()[k].clone()).collect();
        let add_const = !x.has_intercept();
        if add_const {
            labels.push("const".into());
        }
        let m = others.len() + usize::from(add_const);
        let a = DMatrix::from_fn(n, m, |i, c| if c < others.len() { x.x[(i, others[c])] } else { 1.0 });
        let target = DVector::from_iterator(n, x.x.column(j).iter().copied());
        let fitted = project(a, &target, &labels)?;
        let mean = target.mean();
        let tss: f64 = target.iter().map(|t| (t - mean).powi(2)).sum();
        let sse: f64 = (&target - &fitted).norm_squared();
        let r2 = if tss > 0.0 {
            (1.0 - sse / tss).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let perfectly_collinear = 1.0 - r2 <= 1e-12;
        entries.push(VifEntry {
            label: x.labels()[j].clone(),
            vif: if perfectly_collinear {
                f64::INFINITY
            } else {
                (1.0 / (1.0 - r2)).max(1.0)
            },
            r_squared: r2,
            perfectly_collinear,
        });
    }
    Ok(VifReport { entries, note: None })
}
