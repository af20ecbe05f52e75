//! Radix-2 complex FFT used by the split-operator propagator.
//!
//! Forward transform convention: `X[k] = Σ_j x[j]·e^{−2πi jk/N}`, inverse
//! carries the `1/N` factor so a round trip is the identity. Lengths must
//! be powers of two; twiddle factors are tabulated per call from `sin/cos`
//! rather than by repeated multiplication, keeping every coefficient within
//! an ulp or two.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain("FFT length must be a nonzero power of two"));
    }
    Ok(())
}

fn bit_reverse_permute(x: &mut [Complex64]) {
    let n = x.len();
    let shift = n.leading_zeros() + 1;
    for i in 0..n {
        let j = i.reverse_bits() >> shift;
        if j > i {
            x.swap(i, j);
        }
    }
}

fn transform(x: &mut [Complex64], sign: f64) {
    let n = x.len();
    if n == 1 {
        return;
    }
    let half: Vec<Complex64> = (0..n / 2)
        .map(|j| {
            let angle = sign * 2.0 * PI * j as f64 / n as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect();
    bit_reverse_permute(x);
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = half[k * stride];
                let a = x[start + k];
                let b = x[start + k + len / 2] * w;
                x[start + k] = a + b;
                x[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

/// In-place forward FFT.
pub(crate) fn fft_in_place(x: &mut [Complex64]) -> Result<()> {
    check_len(x.len())?;
    transform(x, -1.0);
    Ok(())
}

/// In-place inverse FFT, including the `1/N` normalization.
pub(crate) fn ifft_in_place(x: &mut [Complex64]) -> Result<()> {
    check_len(x.len())?;
    transform(x, 1.0);
    let scale = 1.0 / x.len() as f64;
    for v in x.iter_mut() {
        *v *= scale;
    }
    Ok(())
}
