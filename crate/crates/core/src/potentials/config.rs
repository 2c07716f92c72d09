use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GaussianPotential, HuberLipschitz, LogisticPosterior, Potential, QuadraticMeanPosterior};
use crate::error::{Error, Result};

/// Text configuration for a builtin potential. Serialized as JSON with a
/// `kind` tag, e.g. `{"kind": "huber_lipschitz", "dim": 1, "b": 2.0, "l": 1.0}`.
///
/// Dataset-backed kinds take either inline `data` or a `data_csv` path,
/// resolved relative to the configuration file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Gaussian {
        precision: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
    QuadraticMeanPosterior {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_csv: Option<PathBuf>,
        beta: f64,
        lambda: f64,
    },
    /// Rows are features followed by a `-1`/`+1` (or `0`/`1`) label.
    LogisticPosterior {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_csv: Option<PathBuf>,
        #[serde(default = "one")]
        beta: f64,
        lambda: f64,
    },
    HuberLipschitz {
        dim: usize,
        b: f64,
        l: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn dim(&self, base_dir: Option<&Path>) -> Result<usize> {
        Ok(make_builtin(self, base_dir)?.dim())
    }
}

fn rows(data: &Option<Vec<Vec<f64>>>, csv: &Option<PathBuf>, base: Option<&Path>) -> Result<Vec<Vec<f64>>> {
    match (data, csv) {
        (Some(d), None) => Ok(d.clone()),
        (None, Some(p)) => {
            let path = match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.clone(),
            };
            load_dataset(&path)
        }
        (Some(_), Some(_)) => Err(Error::Format("give either `data` or `data_csv`, not both".into())),
        (None, None) => Err(Error::Format("dataset missing: give `data` or `data_csv`".into())),
    }
}

/// Builds a builtin potential with closed-form curvature constants.
pub fn make_builtin(spec: &PotentialSpec, base_dir: Option<&Path>) -> Result<Arc<dyn Potential>> {
    match spec {
        PotentialSpec::Gaussian { precision, mean } => {
            let d = precision.len();
            if precision.iter().any(|r| r.len() != d) {
                return Err(Error::Potential("precision matrix must be square".into()));
            }
            let flat: Vec<f64> = precision.iter().flatten().copied().collect();
            let mut p = GaussianPotential::new(DMatrix::from_row_slice(d, d, &flat))?;
            if let Some(m) = mean {
                p = p.with_mean(m.clone())?;
            }
            Ok(Arc::new(p))
        }
        PotentialSpec::QuadraticMeanPosterior {
            data,
            data_csv,
            beta,
            lambda,
        } => {
            let rows = rows(data, data_csv, base_dir)?;
            if rows.is_empty() {
                return Err(Error::Potential("dataset is empty".into()));
            }
            let dim = rows[0].len();
            Ok(Arc::new(QuadraticMeanPosterior::new(dim, &rows, *beta, *lambda)?))
        }
        PotentialSpec::LogisticPosterior {
            data,
            data_csv,
            beta,
            lambda,
        } => {
            let ds = LabeledDataset::from_rows(rows(data, data_csv, base_dir)?)?;
            if ds.features.is_empty() {
                return Err(Error::Potential("dataset is empty".into()));
            }
            Ok(Arc::new(LogisticPosterior::new(
                ds.dim,
                ds.features,
                ds.labels,
                *beta,
                *lambda,
            )?))
        }
        PotentialSpec::HuberLipschitz { dim, b, l } => Ok(Arc::new(HuberLipschitz::new(*dim, *b, *l)?)),
    }
}

/// Loads numeric records, one per CSV row. A non-numeric first row is
/// treated as a header.
pub fn load_dataset(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Format(format!("{}: row {} has non-finite values", path.display(), i + 1)));
                }
                out.push(row)
            }
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Format(format!("{}: row {}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

/// Features with `-1`/`+1` labels split off the last column.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub dim: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if !rows.is_empty() && width < 2 {
            return Err(Error::Format("labeled rows need at least one feature and a label".into()));
        }
        let mut features = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != width {
                return Err(Error::Format("ragged dataset".into()));
            }
            let (z, y) = row.split_at(width - 1);
            let v = y[0];
            let label = if v == 1.0 {
                1.0
            } else if v == -1.0 || v == 0.0 {
                -1.0
            } else {
                return Err(Error::Format(format!("label must be -1, 0 or 1, got {v}")));
            };
            features.push(z.to_vec());
            labels.push(label);
        }
        Ok(Self {
            dim: width.saturating_sub(1),
            features,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_builtin_configs() {
        let spec: PotentialSpec =
            serde_json::from_str(r#"{"kind":"huber_lipschitz","dim":2,"b":2.0,"l":1.0}"#).unwrap();
        let p = make_builtin(&spec, None).unwrap();
        assert_eq!(p.curvature().lipschitz, Some(2.0));

        let spec: PotentialSpec =
            serde_json::from_str(r#"{"kind":"gaussian","precision":[[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap();
        let p = make_builtin(&spec, None).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.curvature().smoothness, 1.0);
    }

    #[test]
    fn rejects_empty_dataset_and_non_pd() {
        let spec = PotentialSpec::QuadraticMeanPosterior {
            data: Some(vec![]),
            data_csv: None,
            beta: 1.0,
            lambda: 1.0,
        };
        assert!(make_builtin(&spec, None).is_err());
        let spec = PotentialSpec::Gaussian {
            precision: vec![vec![0.0, 0.0], vec![0.0, 1.0]],
            mean: None,
        };
        assert!(make_builtin(&spec, None).is_err());
    }

    #[test]
    fn csv_with_header_and_relative_path() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = std::fs::File::create(dir.path().join("d.csv")).unwrap();
        writeln!(f, "x,y").unwrap();
        writeln!(f, "0.5,1").unwrap();
        writeln!(f, "-0.25,0").unwrap();
        drop(f);
        let spec: PotentialSpec = serde_json::from_str(
            r#"{"kind":"logistic_posterior","data_csv":"d.csv","lambda":1.0}"#,
        )
        .unwrap();
        let p = make_builtin(&spec, Some(dir.path())).unwrap();
        assert_eq!(p.dim(), 1);
        // L = lambda + beta * n * max|z|^2 / 4
        assert!((p.curvature().smoothness - (1.0 + 2.0 * 0.25 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn bad_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1.0,2.0\nfoo,3\n").unwrap();
        assert!(load_dataset(&path).is_err());
    }
}
