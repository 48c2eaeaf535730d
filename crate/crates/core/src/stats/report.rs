use super::{
    build_design_matrix, estimate_weights, ols_fit, vif, white_test, wls_fit, FitResult, ModelSpec, Observation,
    StatsError, VifReport, WhiteTestResult,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Two-stage feasible WLS.
    #[default]
    Estimated,
    /// All weights 1, so the WLS fit reproduces OLS.
    Unit,
}

impl FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "estimated" => Ok(WeightMode::Estimated),
            "unit" => Ok(WeightMode::Unit),
            _ => Err(format!("unknown weight mode {s:?} (expected estimated or unit)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub n: usize,
    pub spec: ModelSpec,
    pub ols: FitResult,
    pub vif: VifReport,
    pub white: WhiteTestResult,
    pub weight_mode: WeightMode,
    pub weights_fallback: bool,
    pub wls: FitResult,
}

/// Design matrix, OLS, diagnostics on the OLS residuals, then WLS.
pub fn run_regression(
    observations: &[Observation],
    spec: &ModelSpec,
    mode: WeightMode,
) -> Result<RegressionReport, StatsError> {
    let (x, y) = build_design_matrix(observations, spec)?;
    let ols = ols_fit(&x, &y)?;
    let vif = vif(&x)?;
    let white = white_test(&ols)?;
    let (weights, weights_fallback) = match mode {
        WeightMode::Unit => (vec![1.0; y.len()], false),
        WeightMode::Estimated => {
            let est = estimate_weights(&ols);
            (est.weights, est.fallback)
        }
    };
    let wls = wls_fit(&x, &y, &weights)?;
    Ok(RegressionReport {
        n: y.len(),
        spec: spec.clone(),
        ols,
        vif,
        white,
        weight_mode: mode,
        weights_fallback,
        wls,
    })
}

fn num(v: f64, width: usize, places: usize) -> String {
    if v.is_finite() {
        format!("{:>width$}", crate::format::fixed(v, places))
    } else {
        format!(
            "{:>width$}",
            if v.is_nan() {
                "nan"
            } else if v > 0.0 {
                "inf"
            } else {
                "-inf"
            }
        )
    }
}

fn fit_table(out: &mut String, title: &str, fit: &FitResult) {
    let rule = "-".repeat(96);
    let _ = writeln!(out, "{title}    n = {}    df_resid = {}", fit.n(), fit.df_resid);
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(
        out,
        "{:<32}{:>10}{:>10}{:>10}{:>10}{:>12}{:>12}",
        "term", "coef", "std err", "t", "P>|t|", "[0.025", "0.975]"
    );
    for j in 0..fit.labels.len() {
        let _ = writeln!(
            out,
            "{:<32}{}{}{}{}{}{}",
            fit.labels[j],
            num(fit.coefficients[j], 10, 4),
            num(fit.std_errors[j], 10, 4),
            num(fit.t_values[j], 10, 3),
            num(fit.p_values[j], 10, 4),
            num(fit.conf_int[j].0, 12, 4),
            num(fit.conf_int[j].1, 12, 4),
        );
    }
    let _ = writeln!(out, "{rule}");
    let f = match (fit.f_statistic, fit.f_p_value) {
        (Some(f), Some(p)) => format!("{} (p = {})", num(f, 0, 3), num(p, 0, 6)),
        _ => "n/a".into(),
    };
    let dw = fit.durbin_watson.map_or("n/a".into(), |d| num(d, 0, 5));
    let _ = writeln!(
        out,
        "R-squared: {}    F-statistic: {f}    Durbin-Watson: {dw}",
        num(fit.r_squared, 0, 4)
    );
}

impl RegressionReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        fit_table(&mut out, "OLS on ln(price)", &self.ols);
        let w = &self.white;
        let _ = writeln!(
            out,
            "White test: LM = {} (p = {})    F = {} (p = {})",
            num(w.lm_statistic, 0, 3),
            num(w.lm_p, 0, 7),
            num(w.f_statistic, 0, 3),
            num(w.f_p, 0, 7)
        );
        if self.vif.entries.is_empty() {
            let _ = writeln!(out, "VIF: {}", self.vif.note.as_deref().unwrap_or("none"));
        } else {
            let parts: Vec<String> = self
                .vif
                .entries
                .iter()
                .map(|e| format!("{} {}", e.label, num(e.vif, 0, 3)))
                .collect();
            let _ = writeln!(out, "VIF: {}", parts.join(", "));
        }
        out.push('\n');
        let title = match (self.weight_mode, self.weights_fallback) {
            (WeightMode::Unit, _) => "WLS on ln(price), unit weights",
            (WeightMode::Estimated, true) => "WLS on ln(price), unit weights (variance model failed)",
            (WeightMode::Estimated, false) => "Feasible WLS on ln(price)",
        };
        fit_table(&mut out, title, &self.wls);
        out
    }
}
