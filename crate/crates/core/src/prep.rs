//! Shared preprocessing: mean imputation, then z-score standardization.
//!
//! Parameters are always fitted on training rows and re-applied unchanged to
//! any other rows, so train and test share one scale.

use ndarray::{Array2, Axis};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::Dataset;

/// Deviations below this are treated as a constant column.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PrepError {
    #[error("feature column {column:?} has no non-missing values")]
    AllMissing { column: String },
    #[error("parameters fitted on {expected} features applied to {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot fit on an empty dataset")]
    Empty,
}

type Result<T> = std::result::Result<T, PrepError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputeParams {
    pub fill: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: usize,
}

pub fn fit_imputer(train: &Dataset) -> Result<ImputeParams> {
    let x = train.features();
    let m = train.missing();
    let fill = (0..train.n_features())
        .map(|j| {
            let present: Vec<f64> = x
                .column(j)
                .iter()
                .zip(m.column(j))
                .filter(|(_, &miss)| !miss)
                .map(|(&v, _)| v)
                .collect();
            if present.is_empty() {
                Err(PrepError::AllMissing {
                    column: train.feature_names()[j].clone(),
                })
            } else {
                Ok(mean(&present))
            }
        })
        .collect::<Result<_>>()?;
    Ok(ImputeParams { fill })
}

pub fn apply_imputer(data: &Dataset, params: &ImputeParams) -> Result<Dataset> {
    check_dims(params.fill.len(), data.n_features())?;
    if !data.has_missing() {
        return Ok(data.clone());
    }
    let mut x = data.features().clone();
    for ((i, j), &miss) in data.missing().indexed_iter() {
        if miss {
            x[[i, j]] = params.fill[j];
        }
    }
    Ok(data.with_features(x, Array2::from_elem(data.missing().raw_dim(), false)))
}

/// Population mean and deviation per column; deviations are floored.
pub fn fit_scaler(train: &Dataset) -> Result<ScalerParams> {
    if train.n_rows() == 0 {
        return Err(PrepError::Empty);
    }
    let x = train.features();
    let (mean, std) = x
        .axis_iter(Axis(1))
        .map(|col| {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                // Keeps constant columns exactly zero after scaling.
                return (first, STD_FLOOR);
            }
            let values: Vec<f64> = col.to_vec();
            let mu = mean(&values);
            let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len() as f64;
            (mu, var.sqrt().max(STD_FLOOR))
        })
        .unzip();
    Ok(ScalerParams {
        mean,
        std,
        fitted_on: train.n_rows(),
    })
}

pub fn apply_scaler(data: &Dataset, params: &ScalerParams) -> Result<Dataset> {
    check_dims(params.mean.len(), data.n_features())?;
    let mut x = data.features().clone();
    for mut row in x.axis_iter_mut(Axis(0)) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - params.mean[j]) / params.std[j];
        }
    }
    Ok(data.with_features(x, data.missing().clone()))
}

/// Imputer and scaler fitted together, applied in that order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preprocessor {
    pub impute: ImputeParams,
    pub scale: ScalerParams,
}

impl Preprocessor {
    pub fn fit(train: &Dataset) -> Result<Preprocessor> {
        let impute = fit_imputer(train)?;
        let scale = fit_scaler(&apply_imputer(train, &impute)?)?;
        Ok(Preprocessor { impute, scale })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        apply_scaler(&apply_imputer(data, &self.impute)?, &self.scale)
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(PrepError::DimensionMismatch { expected, found })
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
