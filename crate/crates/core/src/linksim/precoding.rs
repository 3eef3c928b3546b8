//! Wideband precoder choice: channel SVD or codebook search.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::codebook::{contiguous_blocks, decompose, Decomposition, PrecodingMatrix};
use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

/// Mean of `H^H H` over subcarriers.
pub fn wideband_gram(h: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let t = h[0].ncols();
    let mut g = DMatrix::zeros(t, t);
    for hk in h {
        g += hk.adjoint() * hk;
    }
    g / Complex64::new(h.len() as f64, 0.0)
}

/// Dominant `n_layers` eigenvectors of the wideband Gram matrix, scaled to
/// unit Frobenius norm.
pub fn svd_precoder(h: &[DMatrix<Complex64>], n_layers: usize) -> Result<DMatrix<Complex64>> {
    if h.is_empty() || n_layers == 0 || n_layers > h[0].ncols() {
        return Err(Error::Domain(format!("cannot form {n_layers} layers")));
    }
    let eig = SymmetricEigen::new(wideband_gram(h));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > RANK_TOL * top.max(f64::MIN_POSITIVE)).count();
    if top <= 0.0 || rank < n_layers {
        return Err(Error::RankDeficient(rank));
    }
    let scale = Complex64::new(1.0 / (n_layers as f64).sqrt(), 0.0);
    let mut w = DMatrix::zeros(h[0].ncols(), n_layers);
    for (l, &i) in order.iter().take(n_layers).enumerate() {
        let v = eig.eigenvectors.column(i);
        // Fix the global phase so the result does not depend on the solver's choice.
        let lead = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        let phase = lead.conj() / lead.norm();
        w.set_column(l, &(v * phase * scale));
    }
    Ok(w)
}

/// `sum_l log2(1 + SINR_l)` of a linear MMSE receiver for one subcarrier.
pub fn mmse_rate(he: &DMatrix<Complex64>, noise_var: f64) -> f64 {
    let l = he.ncols();
    let mut a = he.adjoint() * he / Complex64::new(noise_var, 0.0);
    for i in 0..l {
        a[(i, i)] += 1.0;
    }
    let inv = a.try_inverse().expect("regularized matrix is invertible");
    (0..l).map(|i| -inv[(i, i)].re.log2()).sum()
}

/// Wideband metric of one precoder: MMSE sum rate averaged over every
/// `stride`-th subcarrier.
pub fn pmi_metric(h: &[DMatrix<Complex64>], w: &DMatrix<Complex64>, noise_var: f64, stride: usize) -> f64 {
    let ks: Vec<usize> = (0..h.len()).step_by(stride.max(1)).collect();
    ks.iter().map(|&k| mmse_rate(&(&h[k] * w), noise_var)).sum::<f64>() / ks.len() as f64
}

/// Codebook search that reuses `H * beam` across codewords sharing beams.
#[derive(Debug, Clone)]
pub struct PmiSearch {
    dec: Decomposition,
    n_ports: usize,
    rank: usize,
}

impl PmiSearch {
    pub fn new(candidates: &[PrecodingMatrix]) -> Result<Self> {
        let first = candidates.first().ok_or(Error::EmptyCandidates)?;
        let (n_ports, rank) = (first.n_ports(), first.rank());
        if candidates.iter().any(|c| c.rank() != rank) {
            return Err(Error::Config("candidates have mixed ranks".into()));
        }
        let n_blocks = if n_ports % 2 == 0 { 2 } else { 1 };
        let dec = decompose(candidates, &contiguous_blocks(n_ports, n_blocks), None)?;
        Ok(Self { dec, n_ports, rank })
    }

    pub fn len(&self) -> usize {
        self.dec.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec.terms.is_empty()
    }

    /// Wideband metric for every candidate.
    pub fn metrics(&self, h: &[DMatrix<Complex64>], noise_var: f64, stride: usize) -> Result<Vec<f64>> {
        if h.is_empty() {
            return Err(Error::Domain("empty channel".into()));
        }
        if h[0].ncols() != self.n_ports {
            return Err(Error::PortMismatch { precoder: self.n_ports, layout: h[0].ncols() });
        }
        let r = h[0].nrows();
        let l = self.rank;
        let ks: Vec<usize> = (0..h.len()).step_by(stride.max(1)).collect();
        let mut total = vec![0.0; self.len()];
        let mut hc = vec![Complex64::new(0.0, 0.0); self.dec.components.len() * r];
        let mut he = vec![Complex64::new(0.0, 0.0); r * l];
        let inv_noise = 1.0 / noise_var;
        for &k in &ks {
            let hk = &h[k];
            for (c, comp) in self.dec.components.iter().enumerate() {
                let ports = &self.dec.blocks[self.dec.component_class[c]];
                for i in 0..r {
                    hc[c * r + i] = ports.iter().zip(comp).map(|(&p, w)| hk[(i, p)] * w).sum();
                }
            }
            for (m, layers) in self.dec.terms.iter().enumerate() {
                he.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for (li, terms) in layers.iter().enumerate() {
                    for t in terms {
                        for i in 0..r {
                            he[li * r + i] += t.scale * hc[t.component * r + i];
                        }
                    }
                }
                total[m] += rate_from_columns(&he, r, l, inv_noise);
            }
        }
        let n = ks.len() as f64;
        Ok(total.into_iter().map(|v| v / n).collect())
    }

    /// Best candidate position and its metric; ties go to the earliest.
    pub fn select(&self, h: &[DMatrix<Complex64>], noise_var: f64, stride: usize) -> Result<(usize, f64)> {
        let m = self.metrics(h, noise_var, stride)?;
        let mut best = 0;
        for (i, &v) in m.iter().enumerate() {
            if v > m[best] {
                best = i;
            }
        }
        Ok((best, m[best]))
    }
}

/// MMSE sum rate from column-major effective channel columns.
fn rate_from_columns(he: &[Complex64], r: usize, l: usize, inv_noise: f64) -> f64 {
    let col = |j: usize| &he[j * r..(j + 1) * r];
    let ip = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    match l {
        1 => (1.0 + ip(col(0), col(0)).re * inv_noise).log2(),
        2 => {
            let a11 = 1.0 + ip(col(0), col(0)).re * inv_noise;
            let a22 = 1.0 + ip(col(1), col(1)).re * inv_noise;
            let a12 = ip(col(0), col(1)) * inv_noise;
            let det = a11 * a22 - a12.norm_sqr();
            (det * det / (a11 * a22)).log2()
        }
        _ => {
            let m = DMatrix::from_column_slice(r, l, he);
            mmse_rate(&m, 1.0 / inv_noise)
        }
    }
}

pub fn pmi_select(
    h_estimate: &[DMatrix<Complex64>],
    candidates: &[PrecodingMatrix],
    noise_var: f64,
    stride: usize,
) -> Result<usize> {
    Ok(PmiSearch::new(candidates)?.select(h_estimate, noise_var, stride)?.0)
}
