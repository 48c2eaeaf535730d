use super::StatsError;
use crate::ingest::DwellingType;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predictor {
    /// Binary dwelling type, New = 1.
    Type,
    DistCityCentre,
    Unwalkability,
}

impl Predictor {
    pub const ALL: [Predictor; 3] = [Predictor::Type, Predictor::DistCityCentre, Predictor::Unwalkability];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::Type => "Type",
            Predictor::DistCityCentre => "DistCityCentre",
            Predictor::Unwalkability => "Unwalkability",
        }
    }

    fn value(self, o: &Observation) -> f64 {
        match self {
            Predictor::Type => o.dwelling_type.indicator(),
            Predictor::DistCityCentre => o.dist_centre_km,
            Predictor::Unwalkability => o.unwalkability_km,
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One house in the regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub price_eur: f64,
    pub dwelling_type: DwellingType,
    pub dist_centre_km: f64,
    pub unwalkability_km: f64,
}

/// Log-price model. The intercept and all three main effects are always
/// present; `interactions` lists the product terms.
///
/// An interaction with `Type` is expanded into one slope per dwelling type
/// (`X:New`, `X:SecondHand`). Because those two columns sum to `X`, the main
/// effect of `X` is then left out, otherwise the design would be singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub interactions: Vec<(Predictor, Predictor)>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            interactions: vec![
                (Predictor::Unwalkability, Predictor::Type),
                (Predictor::Unwalkability, Predictor::DistCityCentre),
            ],
        }
    }
}

impl ModelSpec {
    pub fn main_effects_only() -> Self {
        Self { interactions: vec![] }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let mut seen = Vec::new();
        for &(a, b) in &self.interactions {
            if a == b {
                return Err(StatsError::InvalidSpec(format!("{a} interacted with itself")));
            }
            let key = (a.min(b), a.max(b));
            if seen.contains(&key) {
                return Err(StatsError::InvalidSpec(format!("duplicate interaction {a}:{b}")));
            }
            seen.push(key);
        }
        Ok(())
    }

    /// Predictors whose effect is split by dwelling type.
    fn split_by_type(&self) -> Vec<Predictor> {
        self.interactions
            .iter()
            .filter_map(|&(a, b)| match (a, b) {
                (Predictor::Type, x) | (x, Predictor::Type) => Some(x),
                _ => None,
            })
            .collect()
    }

    pub fn column_labels(&self) -> Vec<String> {
        self.columns().into_iter().map(|c| c.label()).collect()
    }

    fn columns(&self) -> Vec<Term> {
        let split = self.split_by_type();
        let mut cols = vec![Term::Intercept];
        cols.extend(
            Predictor::ALL
                .iter()
                .filter(|p| !split.contains(p))
                .map(|&p| Term::Main(p)),
        );
        for &(a, b) in &self.interactions {
            match (a, b) {
                (Predictor::Type, x) | (x, Predictor::Type) => {
                    cols.push(Term::ByType(x, DwellingType::New));
                    cols.push(Term::ByType(x, DwellingType::SecondHand));
                }
                _ => cols.push(Term::Product(a, b)),
            }
        }
        cols
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Intercept,
    Main(Predictor),
    ByType(Predictor, DwellingType),
    Product(Predictor, Predictor),
}

impl Term {
    fn label(self) -> String {
        match self {
            Term::Intercept => "Intercept".into(),
            Term::Main(p) => p.name().into(),
            Term::ByType(p, t) => format!("{}:{}", p.name(), t.name()),
            Term::Product(a, b) => format!("{}:{}", a.name(), b.name()),
        }
    }

    fn value(self, o: &Observation) -> f64 {
        match self {
            Term::Intercept => 1.0,
            Term::Main(p) => p.value(o),
            Term::ByType(p, t) => {
                if o.dwelling_type == t {
                    p.value(o)
                } else {
                    0.0
                }
            }
            Term::Product(a, b) => a.value(o) * b.value(o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Intercept,
    Binary,
    Continuous,
}

impl ColumnKind {
    fn infer(values: &[f64]) -> Self {
        if values.iter().all(|&v| v == 1.0) {
            ColumnKind::Intercept
        } else if values.iter().all(|&v| v == 0.0 || v == 1.0) {
            ColumnKind::Binary
        } else {
            ColumnKind::Continuous
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub(crate) x: DMatrix<f64>,
    labels: Vec<String>,
    kinds: Vec<ColumnKind>,
}

impl DesignMatrix {
    /// Builds a matrix from labelled columns. Column kinds are inferred: all
    /// ones is an intercept, only 0/1 is binary, anything else continuous.
    pub fn from_columns(labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        if labels.len() != columns.len() || columns.is_empty() {
            return Err(StatsError::DimensionMismatch(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(StatsError::DimensionMismatch(
                "columns must be non-empty and equally long".into(),
            ));
        }
        for (label, col) in labels.iter().zip(&columns) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::DegenerateDesign {
                    column: label.clone(),
                    reason: "non-finite value".into(),
                });
            }
        }
        let kinds = columns.iter().map(|c| ColumnKind::infer(c)).collect();
        let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Ok(Self { x, labels, kinds })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.x[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    pub fn has_intercept(&self) -> bool {
        self.kinds.contains(&ColumnKind::Intercept)
    }
}

/// Returns the design matrix and the response `ln(price)`.
pub fn build_design_matrix(
    observations: &[Observation],
    spec: &ModelSpec,
) -> Result<(DesignMatrix, Vec<f64>), StatsError> {
    spec.validate()?;
    for (i, o) in observations.iter().enumerate() {
        if !(o.price_eur.is_finite() && o.price_eur > 0.0) {
            return Err(StatsError::InvalidRecord {
                index: i,
                reason: format!("price must be positive, got {}", o.price_eur),
            });
        }
        if !(o.dist_centre_km.is_finite() && o.unwalkability_km.is_finite()) {
            return Err(StatsError::InvalidRecord {
                index: i,
                reason: "non-finite predictor".into(),
            });
        }
    }
    let terms = spec.columns();
    let n = observations.len();
    if n <= terms.len() {
        return Err(StatsError::InsufficientData {
            needed: terms.len() + 1,
            got: n,
        });
    }
    let mut columns = Vec::with_capacity(terms.len());
    for t in &terms {
        let col: Vec<f64> = observations.iter().map(|o| t.value(o)).collect();
        if !matches!(t, Term::Intercept) {
            let reason = if col.iter().all(|&v| v == 0.0) {
                Some("all zero")
            } else if col.iter().all(|&v| v == col[0]) {
                Some("constant")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(StatsError::DegenerateDesign {
                    column: t.label(),
                    reason: reason.into(),
                });
            }
        }
        columns.push(col);
    }
    let y = observations.iter().map(|o| o.price_eur.ln()).collect();
    let labels = terms.iter().map(|t| t.label()).collect();
    Ok((DesignMatrix::from_columns(labels, columns)?, y))
}
