//! Eigen-decomposition of real symmetric tridiagonal matrices.
//!
//! Implicit-shift QL iteration with accumulated plane rotations, the
//! classical `tql2` scheme. Input is the main diagonal plus one symmetric
//! off-diagonal; output is every eigenvalue in ascending order together
//! with an orthonormal set of eigenvectors. For the matrix sizes used by
//! the quantum solvers (a few hundred rows) the cubic cost of accumulating
//! rotations is negligible.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

/// Iteration cap per eigenvalue. QL converges cubically; a handful of
/// sweeps suffices for any finite input, the cap guards NaN poisoning.
const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
pub(crate) struct EigenPairs {
    pub values: Vec<f64>,
    vectors: Vec<f64>,
    n: usize,
}

impl EigenPairs {
    /// Unit-norm eigenvector belonging to `values[k]`; the component of
    /// largest magnitude is made positive so the basis is reproducible.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }
}

/// Diagonalizes the symmetric tridiagonal matrix with main diagonal `diag`
/// and off-diagonal `off` (`off.len() + 1 == diag.len()`).
pub(crate) fn eigen_symmetric_tridiagonal(diag: &[f64], off: &[f64]) -> Result<EigenPairs> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::Domain("tridiagonal shape: need diag.len() == off.len() + 1 > 0"));
    }
    if !diag.iter().chain(off).all(|x| x.is_finite()) {
        return Err(Error::Domain("tridiagonal entries must be finite"));
    }

    let mut d = diag.to_vec();
    let mut e = Vec::with_capacity(n);
    e.extend_from_slice(off);
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::Domain("QL iteration did not converge"));
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0;
            let mut early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let t = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * t;
                    z[k * n + i] = c * z[k * n + i] - s * t;
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| d[a].total_cmp(&d[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (rank, &col) in order.iter().enumerate() {
        values.push(d[col]);
        let row = &mut vectors[rank * n..(rank + 1) * n];
        for (r, slot) in row.iter_mut().enumerate() {
            *slot = z[r * n + col];
        }
        let lead = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if row[lead] < 0.0 {
            for slot in row.iter_mut() {
                *slot = -*slot;
            }
        }
    }

    Ok(EigenPairs { values, vectors, n })
}
