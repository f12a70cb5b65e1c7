//! Dense spectral oracle for desk-scale graphs.
//!
//! Everything here materializes the Laplacian, so it is meant for checking the
//! sparse node-domain code paths rather than for production use.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Result, RhoError};
use crate::graph::Graph;

pub const DEFAULT_ORACLE_CAP: usize = 2048;

/// Threshold below which `beta_m` or the labeled energy is treated as zero.
pub const UNDEFINED_TOLERANCE: f64 = 1e-12;

/// Dense `I - D^{-1/2}(A + I)D^{-1/2}`, built entry by entry from the adjacency.
pub fn dense_laplacian(graph: &Graph) -> Array2<f64> {
    let n = graph.num_nodes();
    let deg: Vec<f64> = graph.degrees().iter().map(|&d| (d + 1) as f64).collect();
    let mut l = Array2::<f64>::eye(n);
    for i in 0..n {
        l[[i, i]] -= 1.0 / deg[i];
        for &j in graph.neighbors(i) {
            l[[i, j]] -= 1.0 / (deg[i] * deg[j]).sqrt();
        }
    }
    l
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

/// Graph Fourier coefficients `U^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients(pub Vec<f64>);

pub fn eigendecompose(graph: &Graph) -> Result<SpectralDecomposition> {
    eigendecompose_with_cap(graph, DEFAULT_ORACLE_CAP)
}

pub fn eigendecompose_with_cap(graph: &Graph, cap: usize) -> Result<SpectralDecomposition> {
    let n = graph.num_nodes();
    if n > cap {
        return Err(RhoError::OracleCapExceeded { n, cap });
    }
    let l = dense_laplacian(graph);
    let dense = DMatrix::from_fn(n, n, |i, j| l[[i, j]]);
    let eig = SymmetricEigen::new(dense);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[[row, col]] = eig.eigenvectors[(row, src)];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Column `m` of `U`.
    pub fn mode(&self, m: usize) -> ndarray::ArrayView1<'_, f64> {
        self.eigenvectors.column(m)
    }

    /// `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &Array1::from(self.eigenvalues.clone());
        scaled.dot(&self.eigenvectors.t())
    }

    pub fn fourier(&self, signal: &[f64]) -> Result<SpectralCoefficients> {
        check_len("fourier signal", self.len(), signal.len())?;
        let x = Array1::from(signal.to_vec());
        Ok(SpectralCoefficients(self.eigenvectors.t().dot(&x).to_vec()))
    }

    pub fn inverse_fourier(&self, coefficients: &SpectralCoefficients) -> Result<Vec<f64>> {
        check_len("inverse fourier coefficients", self.len(), coefficients.0.len())?;
        let beta = Array1::from(coefficients.0.clone());
        Ok(self.eigenvectors.dot(&beta).to_vec())
    }

    /// `U diag(response(lambda_m)) U^T X`.
    pub fn filter(&self, x: ArrayView2<'_, f64>, response: impl Fn(f64) -> f64) -> Result<Array2<f64>> {
        check_len("spectral filter rows", self.len(), x.nrows())?;
        let gains = Array1::from_iter(self.eigenvalues.iter().map(|&l| response(l)));
        let beta = self.eigenvectors.t().dot(&x);
        let filtered = beta * &gains.insert_axis(ndarray::Axis(1));
        Ok(self.eigenvectors.dot(&filtered))
    }
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(RhoError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Frequency response of stacked first-order filters, `prod_t (1 - k_t lambda)`.
pub fn stacked_response(ks: &[f64], lambda: f64) -> f64 {
    ks.iter().map(|k| 1.0 - k * lambda).product()
}

/// Max absolute gap between node-domain `prod_t (I - k_t L) X` and the same
/// filter applied through the eigenbasis.
pub fn filter_equivalence_error(graph: &Graph, ks: &[f64], x: ArrayView2<'_, f64>) -> Result<f64> {
    let op = graph.laplacian();
    let mut node = x.to_owned();
    for &k in ks {
        let lx = op.apply(node.view())?;
        node.scaled_add(-k, &lx);
    }
    let dec = eigendecompose(graph)?;
    let spectral = dec.filter(x, |l| stacked_response(ks, l))?;
    Ok(node
        .iter()
        .zip(spectral.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Optimal per-frequency response for one frequency, or `None` when undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyResponse {
    pub index: usize,
    pub lambda: f64,
    pub response: Option<f64>,
}

/// Closed-form stationary response of the decoupled spectral one-class loss
/// with unit center: `sum_l u_m(i) / (beta_m sum_l u_m(i)^2)`.
pub fn optimal_response(
    dec: &SpectralDecomposition,
    beta: &SpectralCoefficients,
    labeled: &[usize],
) -> Result<Vec<FrequencyResponse>> {
    if labeled.is_empty() {
        return Err(RhoError::InvalidInput("labeled node set is empty".into()));
    }
    check_len("optimal response coefficients", dec.len(), beta.0.len())?;
    if let Some(&bad) = labeled.iter().find(|&&v| v >= dec.len()) {
        return Err(RhoError::InvalidInput(format!(
            "labeled node {bad} outside graph of {} nodes",
            dec.len()
        )));
    }
    Ok((0..dec.len())
        .map(|m| {
            let u = dec.mode(m);
            let values: Vec<f64> = labeled.iter().map(|&i| u[i]).collect();
            let response = closed_form_response(&values, beta.0[m]);
            FrequencyResponse {
                index: m,
                lambda: dec.eigenvalues[m],
                response,
            }
        })
        .collect())
}

/// `sum(u) / (beta * sum(u^2))` over one mode's labeled entries.
pub fn closed_form_response(mode_values: &[f64], beta: f64) -> Option<f64> {
    let sum: f64 = mode_values.iter().sum();
    let energy: f64 = mode_values.iter().map(|u| u * u).sum();
    (beta.abs() >= UNDEFINED_TOLERANCE && energy.abs() >= UNDEFINED_TOLERANCE)
        .then(|| sum / (beta * energy))
}

/// Per-frequency spectral one-class loss with cross terms dropped:
/// `sum_l (g beta_m u_m(i) - c)^2`.
pub fn decoupled_spectral_loss(
    dec: &SpectralDecomposition,
    beta: &SpectralCoefficients,
    labeled: &[usize],
    m: usize,
    response: f64,
    center: f64,
) -> f64 {
    let u = dec.mode(m);
    labeled
        .iter()
        .map(|&i| (response * beta.0[m] * u[i] - center).powi(2))
        .sum()
}

/// Full spectral one-class loss `sum_l ((U g(Lambda) beta)_i - c)^2`.
pub fn spectral_one_class_loss(
    dec: &SpectralDecomposition,
    beta: &SpectralCoefficients,
    labeled: &[usize],
    responses: &[f64],
    center: f64,
) -> Result<f64> {
    check_len("spectral loss responses", dec.len(), responses.len())?;
    let scaled: Vec<f64> = responses.iter().zip(&beta.0).map(|(g, b)| g * b).collect();
    let z = dec.inverse_fourier(&SpectralCoefficients(scaled))?;
    Ok(labeled.iter().map(|&i| (z[i] - center).powi(2)).sum())
}
