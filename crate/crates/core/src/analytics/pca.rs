use std::fmt;

use serde::{Serialize, Serializer};

use super::jacobi::symmetric_eigen;
use super::{AnalyticsError, FeatureMatrix};

/// Z-scored matrix with the column statistics used to produce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardized {
    pub apps: Vec<String>,
    pub features: Vec<String>,
    pub means: Vec<f64>,
    /// Sample (n - 1) standard deviations.
    pub stds: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Centers each column and scales it to unit sample variance. Columns with
/// no variance are dropped and reported in `warnings`.
pub fn standardize(matrix: &FeatureMatrix) -> Result<Standardized, AnalyticsError> {
    let n = matrix.rows.len();
    if n < 2 {
        return Err(AnalyticsError::TooFewRows(n));
    }
    let mut out = Standardized {
        apps: matrix.apps.clone(),
        features: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
        rows: vec![Vec::new(); n],
        dropped: Vec::new(),
        warnings: Vec::new(),
    };
    for (c, name) in matrix.features.iter().enumerate() {
        let col: Vec<f64> = matrix.rows.iter().map(|r| r[c]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            out.dropped.push(name.clone());
            out.warnings
                .push(format!("feature `{name}` has zero variance and was dropped"));
            continue;
        }
        out.features.push(name.clone());
        out.means.push(mean);
        out.stds.push(std);
        for (row, x) in out.rows.iter_mut().zip(&col) {
            row.push((x - mean) / std);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaResult {
    pub apps: Vec<String>,
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub dropped_features: Vec<String>,
    pub warnings: Vec<String>,
    pub eigenvalues: Vec<f64>,
    /// `loadings[c]` is the unit vector of component `c` over `feature_names`.
    pub loadings: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// `scores[a][c]`: application `a` projected onto component `c`.
    pub scores: Vec<Vec<f64>>,
}

/// Principal components of a standardized matrix.
///
/// Components are eigenvectors of the sample covariance, sorted by
/// descending eigenvalue, each signed so its largest-magnitude loading is
/// positive.
pub fn pca(data: &Standardized, k: usize) -> Result<PcaResult, AnalyticsError> {
    let n = data.rows.len();
    let p = data.features.len();
    if n < 2 {
        return Err(AnalyticsError::TooFewRows(n));
    }
    if k == 0 {
        return Err(AnalyticsError::TooFewComponents(1));
    }
    if k > p {
        return Err(AnalyticsError::TooManyComponents {
            requested: k,
            available: p,
        });
    }

    let mut cov = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = data.rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1) as f64;
            cov[i][j] = s;
            cov[j][i] = s;
        }
    }
    let total: f64 = (0..p).map(|i| cov[i][i]).sum();
    if total <= 0.0 {
        return Err(AnalyticsError::Degenerate);
    }

    let eig = symmetric_eigen(&cov)?;
    let mut loadings: Vec<Vec<f64>> = eig.vectors.into_iter().take(k).collect();
    for v in &mut loadings {
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let eigenvalues: Vec<f64> = eig.values.into_iter().take(k).collect();
    let explained_variance_ratio = eigenvalues.iter().map(|l| l.max(0.0) / total).collect();
    let scores = data
        .rows
        .iter()
        .map(|r| {
            loadings
                .iter()
                .map(|v| r.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();

    Ok(PcaResult {
        apps: data.apps.clone(),
        feature_names: data.features.clone(),
        means: data.means.clone(),
        stds: data.stds.clone(),
        dropped_features: data.dropped.clone(),
        warnings: data.warnings.clone(),
        eigenvalues,
        loadings,
        explained_variance_ratio,
        scores,
    })
}

impl PcaResult {
    /// Standardizes `matrix` and runs [`pca`].
    pub fn fit(matrix: &FeatureMatrix, k: usize) -> Result<Self, AnalyticsError> {
        pca(&standardize(matrix)?, k)
    }

    /// `scores × loadings`, the standardized matrix as seen through the kept
    /// components.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let p = self.feature_names.len();
        self.scores
            .iter()
            .map(|s| {
                (0..p)
                    .map(|f| s.iter().zip(&self.loadings).map(|(sc, v)| sc * v[f]).sum())
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrant {
    I,
    II,
    III,
    IV,
    OnAxis,
}

impl Quadrant {
    const AXIS_TOLERANCE: f64 = 1e-12;

    pub fn of(pc1: f64, pc2: f64) -> Self {
        if pc1.abs() <= Self::AXIS_TOLERANCE || pc2.abs() <= Self::AXIS_TOLERANCE {
            return Quadrant::OnAxis;
        }
        match (pc1 > 0.0, pc2 > 0.0) {
            (true, true) => Quadrant::I,
            (false, true) => Quadrant::II,
            (false, false) => Quadrant::III,
            (true, false) => Quadrant::IV,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrant::I => "I",
            Quadrant::II => "II",
            Quadrant::III => "III",
            Quadrant::IV => "IV",
            Quadrant::OnAxis => "on-axis",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Quadrant {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

/// Quadrant of every application in the (PC1, PC2) plane.
pub fn quadrant_report(result: &PcaResult) -> Result<Vec<(String, Quadrant)>, AnalyticsError> {
    if result.loadings.len() < 2 {
        return Err(AnalyticsError::TooFewComponents(2));
    }
    Ok(result
        .apps
        .iter()
        .zip(&result.scores)
        .map(|(app, s)| (app.clone(), Quadrant::of(s[0], s[1])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let p = rows[0].len();
        FeatureMatrix::new(
            (0..rows.len()).map(|i| format!("app{i}")).collect(),
            (0..p).map(|i| format!("f{i}")).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn standardize_two_points() {
        let s = standardize(&matrix(vec![vec![1.0], vec![3.0]])).unwrap();
        let expect = 1.0 / 2f64.sqrt();
        assert!((s.rows[0][0] + expect).abs() < 1e-15);
        assert!((s.rows[1][0] - expect).abs() < 1e-15);
        assert_eq!(s.means, vec![2.0]);
        assert!((s.stds[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn standardize_three_points() {
        let s = standardize(&matrix(vec![vec![1.0], vec![2.0], vec![3.0]])).unwrap();
        let col: Vec<f64> = s.rows.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_dropped() {
        let s = standardize(&matrix(vec![vec![1.0, 5.0], vec![3.0, 5.0]])).unwrap();
        assert_eq!(s.features, vec!["f0"]);
        assert_eq!(s.dropped, vec!["f1"]);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn standardize_is_idempotent() {
        let m = matrix(vec![vec![1.0, 7.0], vec![4.0, -2.0], vec![0.5, 3.0], vec![2.0, 2.0]]);
        let once = standardize(&m).unwrap();
        let twice = standardize(&matrix(once.rows.clone())).unwrap();
        for (a, b) in once.rows.iter().flatten().zip(twice.rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_line() {
        let m = matrix(vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![5.0, 5.0]]);
        let r = PcaResult::fit(&m, 2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((r.loadings[0][0] - h).abs() < 1e-12);
        assert!((r.loadings[0][1] - h).abs() < 1e-12);
        assert!(r.explained_variance_ratio[0] > 0.999_999);
    }

    #[test]
    fn axis_aligned() {
        let m = matrix(vec![
            vec![-2.0, -1.0, 0.0],
            vec![2.0, -1.0, 0.0],
            vec![-2.0, 1.0, 0.0],
            vec![2.0, 1.0, 0.0],
        ]);
        // third column is constant and dropped; remaining covariance is diagonal
        let s = standardize(&m).unwrap();
        let r = pca(&s, 2).unwrap();
        assert_eq!(r.dropped_features, vec!["f2"]);
        for (c, v) in r.loadings.iter().enumerate() {
            for (f, x) in v.iter().enumerate() {
                let expect = if (c == 0) == (f == 0) { 1.0 } else { 0.0 };
                assert!((x.abs() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn errors() {
        let m = matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let s = standardize(&m).unwrap();
        assert!(matches!(pca(&s, 3), Err(AnalyticsError::TooManyComponents { .. })));
        assert!(matches!(pca(&s, 0), Err(AnalyticsError::TooFewComponents(1))));
        let flat = Standardized {
            apps: vec!["a".into(), "b".into()],
            features: vec!["f".into()],
            means: vec![0.0],
            stds: vec![1.0],
            rows: vec![vec![0.0], vec![0.0]],
            dropped: vec![],
            warnings: vec![],
        };
        assert_eq!(pca(&flat, 1), Err(AnalyticsError::Degenerate));
        let r = pca(&s, 1).unwrap();
        assert_eq!(quadrant_report(&r), Err(AnalyticsError::TooFewComponents(2)));
    }

    #[test]
    fn quadrants() {
        assert_eq!(Quadrant::of(1.0, 1.0), Quadrant::I);
        assert_eq!(Quadrant::of(-1.0, 1.0), Quadrant::II);
        assert_eq!(Quadrant::of(-1.0, -1.0), Quadrant::III);
        assert_eq!(Quadrant::of(1.0, -1.0), Quadrant::IV);
        assert_eq!(Quadrant::of(0.0, 1.0), Quadrant::OnAxis);
    }

    #[test]
    fn sign_convention() {
        let m = matrix(vec![vec![3.0, -3.0], vec![1.0, -1.5], vec![-2.0, 2.5], vec![0.0, 0.3]]);
        let r = PcaResult::fit(&m, 2).unwrap();
        for v in &r.loadings {
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot > 0.0);
        }
    }
}
