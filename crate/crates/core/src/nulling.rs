//! Codebook subsets that keep radiation toward a protected direction low.
//!
//! Both selections are filters over a [`PatternStack`], so they see exactly
//! the same EIRP values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::PmIndex;
use crate::radiation::{find_peak, hpbw_of, PatternStack};
use crate::statistics::lower_median;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Threshold,
    Hpbw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HpbwLogic {
    /// Retain when the target is outside the box in both axes.
    #[default]
    AndExclude,
    /// Retain when the target is outside the box in at least one axis.
    OrExclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullingRequest {
    pub theta_i: f64,
    pub phi_i: f64,
    pub epsilon_db: f64,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub hpbw_logic: HpbwLogic,
}

impl NullingRequest {
    pub fn threshold(theta_i: f64, phi_i: f64, epsilon_db: f64) -> Self {
        Self { theta_i, phi_i, epsilon_db, algorithm: Algorithm::Threshold, hpbw_logic: HpbwLogic::AndExclude }
    }

    pub fn hpbw(theta_i: f64, phi_i: f64, hpbw_logic: HpbwLogic) -> Self {
        Self { theta_i, phi_i, epsilon_db: f64::NAN, algorithm: Algorithm::Hpbw, hpbw_logic }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmSubset {
    /// Positions in the pattern stack, ascending.
    pub retained: Vec<usize>,
    pub indices: Vec<PmIndex>,
    pub retained_fraction: f64,
    pub request: NullingRequest,
    /// Set when nothing was retained.
    pub empty: bool,
    /// Codewords kept only because their half-power width was undefined.
    pub undefined_hpbw: Vec<usize>,
}

impl PmSubset {
    fn new(stack: &PatternStack, retained: Vec<usize>, request: NullingRequest, undefined_hpbw: Vec<usize>) -> Self {
        Self {
            indices: retained.iter().map(|&i| stack.indices[i]).collect(),
            retained_fraction: retained.len() as f64 / stack.len() as f64,
            empty: retained.is_empty(),
            retained,
            request,
            undefined_hpbw,
        }
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }
}

fn check_target(stack: &PatternStack, request: &NullingRequest) -> Result<()> {
    if !stack.grid.contains(request.theta_i, request.phi_i) {
        return Err(Error::OutOfBounds { theta: request.theta_i, phi: request.phi_i });
    }
    Ok(())
}

/// Keep codewords whose EIRP at the target is strictly below epsilon.
pub fn threshold_select(stack: &PatternStack, request: &NullingRequest) -> Result<PmSubset> {
    check_target(stack, request)?;
    let values = stack.eirp_at_all(request.theta_i, request.phi_i)?;
    let retained = (0..stack.len()).filter(|&i| values[i] < request.epsilon_db).collect();
    Ok(PmSubset::new(stack, retained, *request, Vec::new()))
}

/// Half-power box of one codeword: `(theta_lo, theta_hi, phi_lo, phi_hi)`
/// centred on the peak with the beam's widths.
pub fn hpbw_box(stack: &PatternStack, i: usize) -> Result<(f64, f64, f64, f64)> {
    let pattern = stack.pattern(i);
    let peak = find_peak(&pattern);
    let bw = hpbw_of(&pattern, peak)?;
    let (ht, hp) = (bw.theta_width() / 2.0, bw.phi_width() / 2.0);
    Ok((peak.0 - ht, peak.0 + ht, peak.1 - hp, peak.1 + hp))
}

/// Whether a codeword survives the box test.
pub fn hpbw_retains(bx: (f64, f64, f64, f64), theta: f64, phi: f64, logic: HpbwLogic) -> bool {
    let theta_out = !(bx.0..=bx.1).contains(&theta);
    let phi_out = !(bx.2..=bx.3).contains(&phi);
    match logic {
        HpbwLogic::AndExclude => theta_out && phi_out,
        HpbwLogic::OrExclude => theta_out || phi_out,
    }
}

/// Keep codewords whose half-power box does not cover the target.
pub fn hpbw_select(stack: &PatternStack, request: &NullingRequest) -> Result<PmSubset> {
    check_target(stack, request)?;
    let boxes: Vec<Result<_>> = (0..stack.len()).into_par_iter().map(|i| hpbw_box(stack, i)).collect();
    hpbw_select_with_boxes(stack, &boxes, request)
}

/// As [`hpbw_select`] with boxes computed once and reused across requests.
pub fn hpbw_select_with_boxes(
    stack: &PatternStack,
    boxes: &[Result<(f64, f64, f64, f64)>],
    request: &NullingRequest,
) -> Result<PmSubset> {
    check_target(stack, request)?;
    let mut retained = Vec::new();
    let mut undefined = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        match b {
            Ok(bx) => {
                if hpbw_retains(*bx, request.theta_i, request.phi_i, request.hpbw_logic) {
                    retained.push(i);
                }
            }
            Err(Error::UndefinedWidth(_)) => {
                retained.push(i);
                undefined.push(i);
            }
            Err(e) => return Err(e.clone()),
        }
    }
    Ok(PmSubset::new(stack, retained, *request, undefined))
}

pub fn select(stack: &PatternStack, request: &NullingRequest) -> Result<PmSubset> {
    match request.algorithm {
        Algorithm::Threshold => threshold_select(stack, request),
        Algorithm::Hpbw => hpbw_select(stack, request),
    }
}

/// Lower median of the subset's EIRP at the target.
pub fn subset_median_at(stack: &PatternStack, subset: &[usize], theta: f64, phi: f64) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let values = subset.iter().map(|&i| stack.eirp_at(i, theta, phi)).collect::<Result<Vec<_>>>()?;
    Ok(lower_median(values))
}
