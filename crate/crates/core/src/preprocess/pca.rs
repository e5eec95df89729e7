//! PCA and the Hotelling T² outlier gate.

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::special::f_quantile;

/// Principal components of the sample covariance.
///
/// `components` rows are orthonormal; `explained_variance` holds the matching
/// covariance eigenvalues, strictly positive and non-increasing. The sign of
/// each component is fixed so its largest-magnitude loading is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub k: usize,
    pub fit_fingerprint: String,
}

impl PcaModel {
    /// Project one raw row onto the retained components.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|comp| {
                comp.iter()
                    .zip(row.iter().zip(self.mean.iter()))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect()
    }
}

/// Top-k eigenvectors of the sample covariance of `matrix`.
///
/// Zero-variance columns are excluded internally; their loadings come back
/// as exact zeros.
pub fn fit_pca(matrix: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let n = matrix.n_samples();
    let p = matrix.n_features();
    if k == 0 {
        return Err(Error::ConfigInvalid("k must be >= 1".into()));
    }
    if n < k + 2 {
        return Err(Error::InsufficientSamples(format!("n={} < k+2={}", n, k + 2)));
    }
    let constant: std::collections::BTreeSet<usize> =
        matrix.zero_variance_columns().into_iter().collect();
    let active: Vec<usize> = (0..p).filter(|j| !constant.contains(j)).collect();
    if active.is_empty() {
        return Err(Error::AllFeaturesConstant);
    }
    if k > active.len().min(n - 1) {
        return Err(Error::InsufficientSamples(format!(
            "k={} exceeds min(n-1, p_active)={}",
            k,
            active.len().min(n - 1)
        )));
    }

    let mean: Vec<f64> = (0..p).map(|j| matrix.values().col_mean(j)).collect();
    // centered data restricted to active columns, row-major n × a
    let a = active.len();
    let mut xc = vec![0.0; n * a];
    for i in 0..n {
        for (jj, &j) in active.iter().enumerate() {
            xc[i * a + jj] = matrix.values().get(i, j) - mean[j];
        }
    }

    // eigen-decompose whichever of covariance (a×a) or Gram (n×n) is smaller
    let (eigvals, comps_active) = if a <= n {
        let mut cov = vec![0.0; a * a];
        for r in 0..a {
            for c in r..a {
                let mut s = 0.0;
                for i in 0..n {
                    s += xc[i * a + r] * xc[i * a + c];
                }
                let v = s / (n as f64 - 1.0);
                cov[r * a + c] = v;
                cov[c * a + r] = v;
            }
        }
        let (vals, vecs) = jacobi_eigen(&cov, a);
        let order = descending_order(&vals);
        let mut top_vals = Vec::with_capacity(k);
        let mut top_vecs = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            top_vals.push(vals[idx]);
            top_vecs.push((0..a).map(|r| vecs[r * a + idx]).collect::<Vec<f64>>());
        }
        (top_vals, top_vecs)
    } else {
        let mut gram = vec![0.0; n * n];
        for r in 0..n {
            for c in r..n {
                let mut s = 0.0;
                for j in 0..a {
                    s += xc[r * a + j] * xc[c * a + j];
                }
                let v = s / (n as f64 - 1.0);
                gram[r * n + c] = v;
                gram[c * n + r] = v;
            }
        }
        let (vals, vecs) = jacobi_eigen(&gram, n);
        let order = descending_order(&vals);
        let mut top_vals = Vec::with_capacity(k);
        let mut top_vecs = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let lambda = vals[idx];
            if lambda <= 0.0 {
                break;
            }
            // map Gram eigenvector u to covariance eigenvector Xcᵀu / ‖·‖
            let mut v = vec![0.0; a];
            for i in 0..n {
                let u = vecs[i * n + idx];
                for j in 0..a {
                    v[j] += xc[i * a + j] * u;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            top_vals.push(lambda);
            top_vecs.push(v);
        }
        (top_vals, top_vecs)
    };

    let scale = eigvals.first().copied().unwrap_or(0.0).abs();
    if eigvals.len() < k || eigvals.iter().any(|&l| l <= scale * 1e-12 || l <= 0.0) {
        return Err(Error::InsufficientSamples(format!(
            "data rank below k={} requested components",
            k
        )));
    }

    // expand to full-p loadings and fix signs
    let mut components = Vec::with_capacity(k);
    for comp in comps_active {
        let mut full = vec![0.0; p];
        for (jj, &j) in active.iter().enumerate() {
            full[j] = comp[jj];
        }
        let mut best = 0usize;
        for j in 1..p {
            if full[j].abs() > full[best].abs() {
                best = j;
            }
        }
        if full[best] < 0.0 {
            for x in full.iter_mut() {
                *x = -*x;
            }
        }
        components.push(full);
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: eigvals,
        k,
        fit_fingerprint: matrix.lineage().to_string(),
    })
}

fn descending_order(vals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major).
/// Returns (eigenvalues, eigenvectors as columns of a row-major matrix).
pub(crate) fn jacobi_eigen(a: &[f64], size: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; size * size];
    for i in 0..size {
        v[i * size + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..size {
            for c in (r + 1)..size {
                off += m[r * size + c].abs();
            }
        }
        if off < scale * 1e-14 * (size * size) as f64 {
            break;
        }
        for r in 0..size {
            for c in (r + 1)..size {
                let arc = m[r * size + c];
                if arc.abs() <= scale * 1e-300 {
                    continue;
                }
                let arr = m[r * size + r];
                let acc = m[c * size + c];
                let theta = (acc - arr) / (2.0 * arc);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for j in 0..size {
                    let mrj = m[r * size + j];
                    let mcj = m[c * size + j];
                    m[r * size + j] = cos * mrj - sin * mcj;
                    m[c * size + j] = sin * mrj + cos * mcj;
                }
                for i in 0..size {
                    let mir = m[i * size + r];
                    let mic = m[i * size + c];
                    m[i * size + r] = cos * mir - sin * mic;
                    m[i * size + c] = sin * mir + cos * mic;
                    let vir = v[i * size + r];
                    let vic = v[i * size + c];
                    v[i * size + r] = cos * vir - sin * vic;
                    v[i * size + c] = sin * vir + cos * vic;
                }
            }
        }
    }
    let vals = (0..size).map(|i| m[i * size + i]).collect();
    (vals, v)
}

/// Fitted Hotelling T² gate: feature standardization + PCA + threshold.
///
/// Fit-time only by contract — the gate annotates unseen samples, it never
/// drops them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotellingGate {
    pub standardize_mean: Vec<f64>,
    pub standardize_std: Vec<f64>,
    pub pca: PcaModel,
    pub alpha: f64,
    pub t2_critical: f64,
    pub flagged: Vec<String>,
    pub fit_fingerprint: String,
}

impl HotellingGate {
    /// T² of one raw (unstandardized) row.
    pub fn t2(&self, row: &[f64]) -> f64 {
        let std_row: Vec<f64> = row
            .iter()
            .zip(self.standardize_mean.iter().zip(self.standardize_std.iter()))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        let scores = self.pca.project(&std_row);
        scores
            .iter()
            .zip(self.pca.explained_variance.iter())
            .map(|(t, l)| t * t / l)
            .sum()
    }

    pub fn is_outlier(&self, row: &[f64]) -> bool {
        self.t2(row) > self.t2_critical
    }

    /// (sample_id, T², flagged) for every row; never mutates the matrix.
    pub fn annotate(&self, matrix: &FeatureMatrix) -> Result<Vec<(String, f64, bool)>> {
        if matrix.n_features() != self.standardize_mean.len() {
            return Err(Error::FeatureMismatch(format!(
                "gate fitted on {} features, input has {}",
                self.standardize_mean.len(),
                matrix.n_features()
            )));
        }
        Ok(matrix
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let t2 = self.t2(matrix.values().row(i));
                (s.sample_id.clone(), t2, t2 > self.t2_critical)
            })
            .collect())
    }
}

/// Fit the outlier gate: standardize features, PCA to `k` components,
/// T²ᵢ = Σⱼ scoreᵢⱼ²/λⱼ, threshold at k(n−1)/(n−k)·F⁻¹(1−α; k, n−k).
pub fn hotelling_gate(matrix: &FeatureMatrix, k: usize, alpha: f64) -> Result<HotellingGate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ConfigInvalid(format!("alpha {} outside (0,1)", alpha)));
    }
    let n = matrix.n_samples();
    let p = matrix.n_features();
    if n < k + 2 {
        return Err(Error::InsufficientSamples(format!("n={} < k+2={}", n, k + 2)));
    }

    let mean: Vec<f64> = (0..p).map(|j| matrix.values().col_mean(j)).collect();
    let std: Vec<f64> = (0..p)
        .map(|j| {
            let v = matrix.values().col_var(j);
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();

    let mut z = crate::matrix::Matrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z.set(i, j, (matrix.values().get(i, j) - mean[j]) / std[j]);
        }
    }
    let z_matrix = matrix.with_values(z)?;
    let pca = fit_pca(&z_matrix, k)?;

    let nf = n as f64;
    let kf = k as f64;
    let t2_critical = kf * (nf - 1.0) / (nf - kf) * f_quantile(1.0 - alpha, kf, nf - kf);

    let mut gate = HotellingGate {
        standardize_mean: mean,
        standardize_std: std,
        pca,
        alpha,
        t2_critical,
        flagged: Vec::new(),
        fit_fingerprint: matrix.lineage().to_string(),
    };
    gate.flagged = matrix
        .samples()
        .iter()
        .enumerate()
        .filter(|&(i, _)| gate.is_outlier(matrix.values().row(i)))
        .map(|(_, s)| s.sample_id.clone())
        .collect();
    Ok(gate)
}
