//! Linear MMSE equalization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `(He^H He + sigma^2 I)^-1 He^H`, kept for reuse across symbols on one
/// subcarrier.
#[derive(Debug, Clone)]
pub struct MmseFilter {
    pub g: DMatrix<Complex64>,
    /// Diagonal of `G He`, the per-stream gain of the filter.
    pub gain: Vec<f64>,
}

impl MmseFilter {
    pub fn new(he: &DMatrix<Complex64>, noise_var: f64) -> Self {
        let l = he.ncols();
        let hh = he.adjoint();
        let mut a = &hh * he;
        for i in 0..l {
            a[(i, i)] += noise_var;
        }
        let inv = a.try_inverse().unwrap_or_else(|| DMatrix::zeros(l, l));
        let g = inv * hh;
        let gh = &g * he;
        let gain = (0..l).map(|i| gh[(i, i)].re).collect();
        Self { g, gain }
    }

    pub fn apply(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        &self.g * y
    }

    /// Estimates with the per-stream gain divided out, for hard decisions.
    pub fn apply_unbiased(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        let mut s = self.apply(y);
        for (v, &g) in s.iter_mut().zip(&self.gain) {
            if g > 0.0 {
                *v /= g;
            }
        }
        s
    }
}

pub fn mmse_equalize(y: &DVector<Complex64>, he: &DMatrix<Complex64>, noise_var: f64) -> DVector<Complex64> {
    MmseFilter::new(he, noise_var).apply(y)
}

/// `(He^H He)^-1 He^H y`; `None` for a singular Gram matrix.
pub fn zero_forcing(y: &DVector<Complex64>, he: &DMatrix<Complex64>) -> Option<DVector<Complex64>> {
    let hh = he.adjoint();
    Some((&hh * he).try_inverse()? * hh * y)
}
