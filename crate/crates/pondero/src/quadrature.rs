//! Gauss–Hermite quadrature for integrals of the form `∫ f(x)·e^{−x²} dx`.
//!
//! Nodes and weights come from the Golub–Welsch construction: the nodes are
//! the eigenvalues of the Jacobi matrix of the Hermite recurrence (zero
//! diagonal, off-diagonal `√(k/2)`), and each weight is `√π` times the
//! squared first component of the matching eigenvector. An `n`-point rule
//! integrates polynomials up to degree `2n − 1` exactly and converges
//! geometrically for entire integrands, which is what the wavepacket
//! decomposition integrals are after a Gaussian-matching change of variable.

use alloc::vec;
use alloc::vec::Vec;

use crate::tridiag::eigen_symmetric_tridiagonal;
use crate::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// A Gauss–Hermite rule: `∫ f(x)·e^{−x²} dx ≈ Σ weights[i]·f(nodes[i])`.
///
/// Nodes are ascending and symmetric about zero; weights are positive and
/// sum to `√π` (the total mass of the weight function). `log_weights` hold
/// `ln(weights)` computed before squaring the eigenvector component, so the
/// factored form `exp(log_weights[i] + nodes[i]²)` — the weight with the
/// Gaussian divided back out — stays accurate even where the plain weight
/// underflows.
pub(crate) struct GaussHermite {
    pub nodes: Vec<f64>,
    #[allow(dead_code)]
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// Builds the `n`-point Gauss–Hermite rule.
pub(crate) fn gauss_hermite(n: usize) -> Result<GaussHermite> {
    if n == 0 {
        return Err(Error::Domain("Gauss-Hermite rule needs at least one node"));
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let pairs = eigen_symmetric_tridiagonal(&diag, &off)?;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut log_weights = Vec::with_capacity(n);
    for k in 0..n {
        nodes.push(pairs.values[k]);
        let v0 = pairs.vector(k)[0];
        weights.push(SQRT_PI * v0 * v0);
        log_weights.push(SQRT_PI.ln() + 2.0 * v0.abs().ln());
    }
    Ok(GaussHermite { nodes, weights, log_weights })
}

impl GaussHermite {
    /// Applies the rule to `f`.
    #[allow(dead_code)]
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
