//! Parametric empirical-Bayes ComBat batch harmonization, no covariates.
//!
//! Fit: per-feature grand mean and pooled within-batch std; standardize;
//! per-batch location/scale estimates; Normal and Inverse-Gamma hyperpriors
//! moment-matched across features; fixed-point iteration of the posterior
//! updates. Apply: y* = σ̂·(z − γ*)/√δ²* + α̂ for known batches, with a
//! configurable policy for batches never seen at fit time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const EB_TOL: f64 = 1e-6;
const EB_MAX_ITER: usize = 500;
/// Floor for δ²* in standardized space (pooled variance is 1 there).
const DELTA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnknownBatchPolicy {
    /// Apply γ = 0, δ = 1 (no batch adjustment) and record a warning.
    StandardizeOnly,
    /// Refuse to transform samples from unseen batches.
    Reject,
}

/// Fitted ComBat parameters. Vectors live in the kept-feature space;
/// `kept` maps kept positions back to original column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombatParams {
    /// Fit-time feature names in canonical order (all columns, incl. dropped).
    pub feature_names: Vec<String>,
    /// Original column indices retained (pooled within-batch variance > 0).
    pub kept: Vec<usize>,
    /// Zero-variance columns dropped at fit and excluded downstream.
    pub dropped_features: BTreeSet<usize>,
    /// α̂ per kept feature.
    pub grand_mean: Vec<f64>,
    /// σ̂ per kept feature (each > 0).
    pub pooled_std: Vec<f64>,
    /// γ* — EB-shrunk additive batch effects in standardized space.
    pub batch_gamma: BTreeMap<String, Vec<f64>>,
    /// δ²* — EB-shrunk multiplicative batch effects (variances, ≥ floor).
    pub batch_delta_sq: BTreeMap<String, Vec<f64>>,
    pub fit_fingerprint: String,
}

impl CombatParams {
    pub fn kept_names(&self) -> Vec<&str> {
        self.kept.iter().map(|&j| self.feature_names[j].as_str()).collect()
    }
}

/// Fit ComBat on a multi-batch training matrix.
pub fn fit_combat(matrix: &FeatureMatrix) -> Result<CombatParams> {
    let n = matrix.n_samples();
    let p = matrix.n_features();
    if n == 0 {
        return Err(Error::NoBatches);
    }

    let mut batch_rows: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in matrix.samples().iter().enumerate() {
        batch_rows.entry(s.batch_id.clone()).or_default().push(i);
    }
    if batch_rows.is_empty() {
        return Err(Error::NoBatches);
    }
    for (batch, rows) in &batch_rows {
        if rows.len() < 2 {
            return Err(Error::BatchTooSmall(batch.clone()));
        }
    }

    let values = matrix.values();
    let nf = n as f64;

    // per-batch means, weighted grand mean, pooled within-batch variance
    let mut batch_means: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (batch, rows) in &batch_rows {
        let nb = rows.len() as f64;
        let means: Vec<f64> = (0..p)
            .map(|j| rows.iter().map(|&i| values.get(i, j)).sum::<f64>() / nb)
            .collect();
        batch_means.insert(batch.as_str(), means);
    }
    let grand_mean_full: Vec<f64> = (0..p)
        .map(|j| {
            batch_rows
                .iter()
                .map(|(b, rows)| batch_means[b.as_str()][j] * rows.len() as f64 / nf)
                .sum()
        })
        .collect();
    let var_pooled_full: Vec<f64> = (0..p)
        .map(|j| {
            batch_rows
                .iter()
                .map(|(b, rows)| {
                    let m = batch_means[b.as_str()][j];
                    rows.iter().map(|&i| (values.get(i, j) - m).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
                / nf
        })
        .collect();

    let mut kept = Vec::new();
    let mut dropped = BTreeSet::new();
    for j in 0..p {
        let total_var = values.col_var(j);
        if var_pooled_full[j] <= 0.0 || var_pooled_full[j] < 1e-12 * total_var {
            dropped.insert(j);
        } else {
            kept.push(j);
        }
    }
    if kept.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "ComBat needs at least 2 retained features, have {}",
            kept.len()
        )));
    }

    let grand_mean: Vec<f64> = kept.iter().map(|&j| grand_mean_full[j]).collect();
    let pooled_std: Vec<f64> = kept.iter().map(|&j| var_pooled_full[j].sqrt()).collect();
    let pk = kept.len();

    // standardized data, kept columns only
    let mut z = Matrix::zeros(n, pk);
    for i in 0..n {
        for (jj, &j) in kept.iter().enumerate() {
            z.set(i, jj, (values.get(i, j) - grand_mean[jj]) / pooled_std[jj]);
        }
    }

    let mut batch_gamma = BTreeMap::new();
    let mut batch_delta_sq = BTreeMap::new();
    for (batch, rows) in &batch_rows {
        let nb = rows.len() as f64;
        let gamma_hat: Vec<f64> =
            (0..pk).map(|j| rows.iter().map(|&i| z.get(i, j)).sum::<f64>() / nb).collect();
        let delta_hat: Vec<f64> = (0..pk)
            .map(|j| {
                rows.iter().map(|&i| (z.get(i, j) - gamma_hat[j]).powi(2)).sum::<f64>() / nb
            })
            .collect();

        // hyperpriors by moments across features
        let gamma_bar = mean(&gamma_hat);
        let tau_sq = var_unbiased(&gamma_hat, gamma_bar);
        let d_mean = mean(&delta_hat);
        let d_var = var_unbiased(&delta_hat, d_mean);

        let mut gamma_star = gamma_hat.clone();
        let mut delta_star = delta_hat.clone();

        if d_var <= 1e-12 * d_mean.max(1.0) {
            // degenerate prior: δ̂² identical across features; the
            // Inverse-Gamma prior concentrates at its mean
            for d in delta_star.iter_mut() {
                *d = d_mean.max(DELTA_FLOOR);
            }
            for j in 0..pk {
                gamma_star[j] = posterior_gamma(gamma_hat[j], gamma_bar, tau_sq, delta_star[j], nb);
            }
        } else {
            let a_prior = (2.0 * d_var + d_mean * d_mean) / d_var;
            let b_prior = (d_mean * d_var + d_mean.powi(3)) / d_var;
            for _ in 0..EB_MAX_ITER {
                let mut max_change: f64 = 0.0;
                for j in 0..pk {
                    let g_new =
                        posterior_gamma(gamma_hat[j], gamma_bar, tau_sq, delta_star[j], nb);
                    let sum2: f64 =
                        rows.iter().map(|&i| (z.get(i, j) - g_new).powi(2)).sum();
                    let d_new =
                        ((b_prior + 0.5 * sum2) / (nb / 2.0 + a_prior - 1.0)).max(DELTA_FLOOR);
                    max_change = max_change.max((g_new - gamma_star[j]).abs());
                    max_change = max_change.max((d_new - delta_star[j]).abs());
                    gamma_star[j] = g_new;
                    delta_star[j] = d_new;
                }
                if max_change < EB_TOL {
                    break;
                }
            }
        }

        batch_gamma.insert(batch.clone(), gamma_star);
        batch_delta_sq.insert(batch.clone(), delta_star);
    }

    Ok(CombatParams {
        feature_names: matrix.feature_names().iter().map(|s| s.to_string()).collect(),
        kept,
        dropped_features: dropped,
        grand_mean,
        pooled_std,
        batch_gamma,
        batch_delta_sq,
        fit_fingerprint: matrix.lineage().to_string(),
    })
}

fn posterior_gamma(g_hat: f64, g_bar: f64, tau_sq: f64, delta_sq: f64, nb: f64) -> f64 {
    (nb * tau_sq * g_hat + delta_sq * g_bar) / (nb * tau_sq + delta_sq)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var_unbiased(v: &[f64], m: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// How the apply-side input columns line up with the fit-time features.
enum ColumnLayout {
    /// Input carries all fit-time columns; dropped ones are discarded.
    Original,
    /// Input already restricted to the kept columns.
    Kept,
}

fn column_layout(params: &CombatParams, matrix: &FeatureMatrix) -> Result<ColumnLayout> {
    let names = matrix.feature_names();
    if names.len() == params.feature_names.len()
        && names.iter().zip(params.feature_names.iter()).all(|(a, b)| *a == b)
    {
        return Ok(ColumnLayout::Original);
    }
    let kept_names = params.kept_names();
    if names.len() == kept_names.len()
        && names.iter().zip(kept_names.iter()).all(|(a, b)| a == b)
    {
        return Ok(ColumnLayout::Kept);
    }
    for need in &params.feature_names {
        if params.dropped_features.contains(&params.feature_names.iter().position(|n| n == need).unwrap()) {
            continue;
        }
        if !names.contains(&need.as_str()) {
            return Err(Error::FeatureMismatch(format!("missing feature column `{}`", need)));
        }
    }
    Err(Error::FeatureMismatch("feature columns do not match fit-time layout".into()))
}

/// Apply fitted ComBat to a matrix (works on a single row as well).
/// Returns the harmonized matrix (kept columns only) plus one warning per
/// distinct unknown batch encountered under `StandardizeOnly`.
pub fn apply_combat(
    params: &CombatParams,
    matrix: &FeatureMatrix,
    policy: UnknownBatchPolicy,
) -> Result<(FeatureMatrix, Vec<String>)> {
    let layout = column_layout(params, matrix)?;
    let n = matrix.n_samples();
    let pk = params.kept.len();
    let col_of = |jj: usize| -> usize {
        match layout {
            ColumnLayout::Original => params.kept[jj],
            ColumnLayout::Kept => jj,
        }
    };

    let mut warned: BTreeSet<String> = BTreeSet::new();
    let mut out = Matrix::zeros(n, pk);
    for i in 0..n {
        let batch = &matrix.samples()[i].batch_id;
        let adjust = match (params.batch_gamma.get(batch), params.batch_delta_sq.get(batch)) {
            (Some(g), Some(d)) => Some((g, d)),
            _ => match policy {
                UnknownBatchPolicy::Reject => return Err(Error::UnknownBatch(batch.clone())),
                UnknownBatchPolicy::StandardizeOnly => {
                    warned.insert(batch.clone());
                    None
                }
            },
        };
        for jj in 0..pk {
            let y = matrix.values().get(i, col_of(jj));
            let v = match adjust {
                Some((gamma, delta_sq)) => {
                    let z = (y - params.grand_mean[jj]) / params.pooled_std[jj];
                    params.pooled_std[jj] * (z - gamma[jj]) / delta_sq[jj].sqrt()
                        + params.grand_mean[jj]
                }
                // γ = 0, δ = 1 leaves the value unchanged
                None => y,
            };
            out.set(i, jj, v);
        }
    }

    let kept_cols: Vec<usize> = (0..pk).map(col_of).collect();
    let harmonized = matrix.with_columns_and_values(&kept_cols, out)?;
    let warnings = warned
        .into_iter()
        .map(|b| format!("unknown batch `{}`: standardize-only, no batch adjustment applied", b))
        .collect();
    Ok((harmonized, warnings))
}
