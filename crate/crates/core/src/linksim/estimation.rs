//! Least-squares channel estimation from per-port pilots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Pilot subcarriers `0, s, 2s, ...` below `n_subcarriers`.
pub fn pilot_positions(n_subcarriers: usize, spacing: usize) -> Result<Vec<usize>> {
    if spacing == 0 || spacing > n_subcarriers {
        return Err(Error::PilotGrid(format!("spacing {spacing} on {n_subcarriers} subcarriers")));
    }
    Ok((0..n_subcarriers).step_by(spacing).collect())
}

/// Estimate the channel on all subcarriers.
///
/// `y_pilots[i]` is `rx x tx`: column `p` is what was received on port `p`'s
/// pilot occasion at subcarrier `pilot_positions[i]`, where the pilot symbol
/// was `pilot_symbols[i][p]`. Between pilots the estimate is linearly
/// interpolated; outside them it holds the nearest pilot's value.
pub fn ls_estimate(
    y_pilots: &[DMatrix<Complex64>],
    pilot_symbols: &[Vec<Complex64>],
    pilot_positions: &[usize],
    n_subcarriers: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    if pilot_positions.is_empty()
        || y_pilots.len() != pilot_positions.len()
        || pilot_symbols.len() != pilot_positions.len()
    {
        return Err(Error::PilotGrid("pilot inputs have inconsistent lengths".into()));
    }
    if pilot_positions.windows(2).any(|w| w[0] >= w[1]) || *pilot_positions.last().unwrap() >= n_subcarriers {
        return Err(Error::PilotGrid("pilot positions must be increasing and inside the grid".into()));
    }
    let (r, t) = y_pilots[0].shape();
    let at_pilots: Vec<DMatrix<Complex64>> = y_pilots
        .iter()
        .zip(pilot_symbols)
        .map(|(y, x)| {
            if x.len() != t || y.shape() != (r, t) {
                return Err(Error::PilotGrid("pilot symbol count differs from ports".into()));
            }
            let mut h = y.clone();
            for (p, xp) in x.iter().enumerate() {
                let e = xp.norm_sqr();
                if e == 0.0 {
                    return Err(Error::PilotGrid("zero pilot symbol".into()));
                }
                let scale = xp.conj() / e;
                h.column_mut(p).iter_mut().for_each(|v| *v *= scale);
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;

    let first = pilot_positions[0];
    let last = *pilot_positions.last().unwrap();
    let mut out = Vec::with_capacity(n_subcarriers);
    let mut seg = 0;
    for k in 0..n_subcarriers {
        if k <= first {
            out.push(at_pilots[0].clone());
        } else if k >= last {
            out.push(at_pilots[at_pilots.len() - 1].clone());
        } else {
            while pilot_positions[seg + 1] < k {
                seg += 1;
            }
            let (k0, k1) = (pilot_positions[seg], pilot_positions[seg + 1]);
            let f = (k - k0) as f64 / (k1 - k0) as f64;
            out.push(&at_pilots[seg] * Complex64::new(1.0 - f, 0.0) + &at_pilots[seg + 1] * Complex64::new(f, 0.0));
        }
    }
    Ok(out)
}
