//! Per-application metric vectors, standardization and principal component
//! analysis.

mod jacobi;
mod pca;

pub use jacobi::{symmetric_eigen, SymmetricEigen};
pub use pca::{pca, quadrant_report, standardize, PcaResult, Quadrant, Standardized};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("application `{app}` has no feature `{feature}`")]
    MissingFeature { app: String, feature: String },
    #[error("application `{app}` has a non-finite `{feature}`")]
    NonFinite { app: String, feature: String },
    #[error("need >= 2 applications, got {0}")]
    TooFewRows(usize),
    #[error("requested {requested} components but only {available} features are usable")]
    TooManyComponents { requested: usize, available: usize },
    #[error("at least {0} components required")]
    TooFewComponents(usize),
    #[error("matrix has no variance to decompose")]
    Degenerate,
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
    #[error("rows have inconsistent lengths")]
    Ragged,
}

/// Anything that can supply named scalar features for one application.
pub trait FeatureSource {
    fn app_name(&self) -> &str;
    fn feature(&self, name: &str) -> Option<f64>;
}

/// One application's selected features, in selection order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricVector {
    pub app_name: String,
    pub features: Vec<(String, f64)>,
}

/// Applications × features, rows in input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    pub apps: Vec<String>,
    pub features: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(apps: Vec<String>, features: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, AnalyticsError> {
        if rows.len() != apps.len() || rows.iter().any(|r| r.len() != features.len()) {
            return Err(AnalyticsError::Ragged);
        }
        Ok(Self { apps, features, rows })
    }

    pub fn vectors(&self) -> Vec<MetricVector> {
        self.apps
            .iter()
            .zip(&self.rows)
            .map(|(app, row)| MetricVector {
                app_name: app.clone(),
                features: self.features.iter().cloned().zip(row.iter().copied()).collect(),
            })
            .collect()
    }
}

/// Builds the application × feature matrix from per-application reports.
pub fn assemble<R: FeatureSource>(reports: &[R], selection: &[String]) -> Result<FeatureMatrix, AnalyticsError> {
    let mut rows = Vec::with_capacity(reports.len());
    for r in reports {
        let row = selection
            .iter()
            .map(|f| match r.feature(f) {
                None => Err(AnalyticsError::MissingFeature {
                    app: r.app_name().to_string(),
                    feature: f.clone(),
                }),
                Some(v) if !v.is_finite() => Err(AnalyticsError::NonFinite {
                    app: r.app_name().to_string(),
                    feature: f.clone(),
                }),
                Some(v) => Ok(v),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    FeatureMatrix::new(
        reports.iter().map(|r| r.app_name().to_string()).collect(),
        selection.to_vec(),
        rows,
    )
}
