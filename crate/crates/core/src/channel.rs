//! Tapped-delay-line MIMO fading and its OFDM frequency response.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// TDL-C normalized delays, in tap order of the standard table.
#[allow(clippy::approx_constant)]
const TDL_C_DELAYS: [f64; 24] = [
    0.0, 0.2099, 0.2219, 0.2329, 0.2176, 0.6366, 0.6448, 0.6560, 0.6584, 0.7935, 0.8213, 0.9336, 1.2285, 1.3083,
    2.1704, 2.7105, 4.2589, 4.6003, 5.4902, 5.6077, 6.3065, 6.6374, 7.0427, 8.6523,
];

const TDL_C_POWERS_DB: [f64; 24] = [
    -4.4, -1.2, -3.5, -5.2, -2.5, 0.0, -2.2, -3.9, -7.4, -7.1, -10.7, -11.1, -5.1, -6.8, -8.7, -13.2, -13.9, -13.9,
    -15.8, -17.1, -16.0, -15.7, -21.6, -22.8,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    #[default]
    TdlC,
    /// Single Rayleigh tap at zero delay.
    Flat,
    /// Fixed unit-gain identity channel, no fading.
    Awgn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    #[default]
    None,
}

/// Channel section of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub model: ChannelModel,
    #[serde(default = "default_delay_spread_ns")]
    pub delay_spread_ns: f64,
    #[serde(default)]
    pub doppler_hz: f64,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default = "default_subcarriers")]
    pub n_subcarriers: usize,
    #[serde(default = "default_spacing")]
    pub subcarrier_spacing_hz: f64,
}

fn default_delay_spread_ns() -> f64 {
    300.0
}

fn default_subcarriers() -> usize {
    624
}

fn default_spacing() -> f64 {
    30e3
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::TdlC,
            delay_spread_ns: default_delay_spread_ns(),
            doppler_hz: 0.0,
            correlation: Correlation::None,
            n_subcarriers: default_subcarriers(),
            subcarrier_spacing_hz: default_spacing(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.doppler_hz != 0.0 {
            return Err(Error::Unsupported("only static channels (doppler_hz = 0) are modelled".into()));
        }
        if self.n_subcarriers == 0 || !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::Config("carrier grid must be positive".into()));
        }
        if self.model == ChannelModel::TdlC && !(self.delay_spread_ns > 0.0) {
            return Err(Error::Config("delay_spread_ns must be positive".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<TdlProfile> {
        profile_for(self.model, self.delay_spread_ns * 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    /// Sorted ascending.
    pub normalized_delays: Vec<f64>,
    pub tap_powers_db: Vec<f64>,
    pub delay_spread_s: f64,
}

impl TdlProfile {
    pub fn n_taps(&self) -> usize {
        self.normalized_delays.len()
    }

    pub fn delays_s(&self) -> Vec<f64> {
        self.normalized_delays.iter().map(|d| d * self.delay_spread_s).collect()
    }

    /// Linear tap powers summing to one.
    pub fn linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.tap_powers_db.iter().map(|p| 10f64.powf(p / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.iter().map(|p| p / total).collect()
    }
}

/// Standard TDL-C profile scaled to the given RMS delay spread, taps
/// ordered by delay.
pub fn tdl_c_profile(delay_spread_s: f64) -> Result<TdlProfile> {
    if !(delay_spread_s > 0.0 && delay_spread_s.is_finite()) {
        return Err(Error::Domain(format!("delay spread {delay_spread_s} must be positive")));
    }
    let mut taps: Vec<(f64, f64)> = TDL_C_DELAYS.iter().copied().zip(TDL_C_POWERS_DB).collect();
    taps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (normalized_delays, tap_powers_db) = taps.into_iter().unzip();
    Ok(TdlProfile { normalized_delays, tap_powers_db, delay_spread_s })
}

pub fn flat_profile() -> TdlProfile {
    TdlProfile { normalized_delays: vec![0.0], tap_powers_db: vec![0.0], delay_spread_s: 0.0 }
}

pub fn profile_for(model: ChannelModel, delay_spread_s: f64) -> Result<TdlProfile> {
    match model {
        ChannelModel::TdlC => tdl_c_profile(delay_spread_s),
        ChannelModel::Flat | ChannelModel::Awgn => Ok(flat_profile()),
    }
}

/// Square roots of receive and transmit correlation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Kronecker {
    pub rx_sqrt: DMatrix<Complex64>,
    pub tx_sqrt: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// One `rx x tx` matrix per tap.
    pub taps: Vec<DMatrix<Complex64>>,
    pub delays_s: Vec<f64>,
}

impl ChannelRealization {
    pub fn n_rx(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.taps[0].ncols()
    }
}

/// Unit-variance circularly symmetric complex Gaussian.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn realize_with<R: Rng + ?Sized>(
    profile: &TdlProfile,
    n_rx: usize,
    n_tx: usize,
    correlation: Option<&Kronecker>,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if n_rx == 0 || n_tx == 0 {
        return Err(Error::Domain("channel dimensions must be positive".into()));
    }
    if let Some(k) = correlation {
        if k.rx_sqrt.shape() != (n_rx, n_rx) || k.tx_sqrt.shape() != (n_tx, n_tx) {
            return Err(Error::Domain("correlation matrix shape mismatch".into()));
        }
    }
    let taps = profile
        .linear_powers()
        .iter()
        .map(|&p| {
            let amp = p.sqrt();
            let g = DMatrix::from_fn(n_rx, n_tx, |_, _| complex_normal(rng) * amp);
            match correlation {
                Some(k) => &k.rx_sqrt * g * &k.tx_sqrt,
                None => g,
            }
        })
        .collect();
    Ok(ChannelRealization { taps, delays_s: profile.delays_s() })
}

/// One draw of the configured model; AWGN gives the `rx x tx` identity.
pub fn realize_model<R: Rng + ?Sized>(
    model: ChannelModel,
    profile: &TdlProfile,
    n_rx: usize,
    n_tx: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    match model {
        ChannelModel::Awgn => {
            if n_rx == 0 || n_tx == 0 {
                return Err(Error::Domain("channel dimensions must be positive".into()));
            }
            Ok(ChannelRealization { taps: vec![DMatrix::identity(n_rx, n_tx)], delays_s: vec![0.0] })
        }
        _ => realize_with(profile, n_rx, n_tx, None, rng),
    }
}

/// Deterministic realization from a seed.
pub fn realize(profile: &TdlProfile, n_rx: usize, n_tx: usize, rng_seed: u64) -> Result<ChannelRealization> {
    let mut rng = stream_rng(rng_seed, 0, Stream::Channel);
    realize_with(profile, n_rx, n_tx, None, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    /// One `rx x tx` matrix per subcarrier.
    pub h: Vec<DMatrix<Complex64>>,
    pub subcarrier_spacing_hz: f64,
    pub n_subcarriers: usize,
}

/// Subcarrier frequencies relative to the band centre.
pub fn subcarrier_offsets(n_subcarriers: usize, spacing_hz: f64) -> Vec<f64> {
    let centre = (n_subcarriers as f64 - 1.0) / 2.0;
    (0..n_subcarriers).map(|k| (k as f64 - centre) * spacing_hz).collect()
}

/// `exp(-j 2 pi f_k tau)` for every subcarrier and tap, reusable across drops.
#[derive(Debug, Clone)]
pub struct TapPhasors {
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    delays_s: Vec<f64>,
    values: Vec<Complex64>,
}

impl TapPhasors {
    pub fn new(delays_s: &[f64], n_subcarriers: usize, subcarrier_spacing_hz: f64) -> Result<Self> {
        if n_subcarriers == 0 || !(subcarrier_spacing_hz > 0.0) {
            return Err(Error::Domain("carrier grid must be positive".into()));
        }
        let f = subcarrier_offsets(n_subcarriers, subcarrier_spacing_hz);
        let values = f
            .iter()
            .flat_map(|&fk| delays_s.iter().map(move |&tau| Complex64::from_polar(1.0, -2.0 * PI * fk * tau)))
            .collect();
        Ok(Self { n_subcarriers, subcarrier_spacing_hz, delays_s: delays_s.to_vec(), values })
    }

    pub fn apply(&self, realization: &ChannelRealization) -> Result<FrequencyResponse> {
        if realization.delays_s != self.delays_s {
            return Err(Error::Domain("realization delays differ from the phasor table".into()));
        }
        let n_taps = self.delays_s.len();
        let (r, t) = (realization.n_rx(), realization.n_tx());
        let h = (0..self.n_subcarriers)
            .map(|k| {
                let ph = &self.values[k * n_taps..(k + 1) * n_taps];
                let mut m = DMatrix::zeros(r, t);
                for (tap, &p) in realization.taps.iter().zip(ph) {
                    m.zip_apply(tap, |acc, a| *acc += a * p);
                }
                m
            })
            .collect();
        Ok(FrequencyResponse {
            h,
            subcarrier_spacing_hz: self.subcarrier_spacing_hz,
            n_subcarriers: self.n_subcarriers,
        })
    }
}

pub fn freq_response(
    realization: &ChannelRealization,
    n_subcarriers: usize,
    subcarrier_spacing_hz: f64,
) -> Result<FrequencyResponse> {
    TapPhasors::new(&realization.delays_s, n_subcarriers, subcarrier_spacing_hz)?.apply(realization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    #[allow(clippy::approx_constant)]
    fn tdl_c_table() {
        let p = tdl_c_profile(300e-9).unwrap();
        assert_eq!(p.n_taps(), 24);
        assert_abs_diff_eq!(p.linear_powers().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p.normalized_delays.windows(2).all(|w| w[0] <= w[1]));
        let d = p.delays_s();
        assert_abs_diff_eq!(d[23], 8.6523 * 300e-9, epsilon = 1e-18);
        assert_abs_diff_eq!(d[5], 0.6366 * 300e-9, epsilon = 1e-18);
        // The strongest tap keeps 0 dB before renormalization.
        assert_eq!(p.tap_powers_db.iter().copied().fold(f64::NEG_INFINITY, f64::max), 0.0);
        assert!(tdl_c_profile(0.0).is_err());
    }

    #[test]
    fn realization_is_deterministic_and_shaped() {
        let p = tdl_c_profile(300e-9).unwrap();
        let a = realize(&p, 4, 32, 7).unwrap();
        let b = realize(&p, 4, 32, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.taps[0].shape(), (4, 32));
        assert_ne!(a, realize(&p, 4, 32, 8).unwrap());
    }

    #[test]
    fn tap_variance_matches_power() {
        let p = tdl_c_profile(300e-9).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let r = realize_with(&p, 1, 1, None, &mut rng).unwrap();
            acc += r.taps[0][(0, 0)].norm_sqr();
        }
        let expected = p.linear_powers()[0];
        assert!(((acc / n as f64) - expected).abs() < 0.02 * expected);
    }

    #[test]
    fn single_tap_responses() {
        let tap = DMatrix::from_row_slice(1, 2, &[Complex64::new(0.3, -0.4), Complex64::new(1.0, 0.5)]);
        let flat = ChannelRealization { taps: vec![tap.clone()], delays_s: vec![0.0] };
        let fr = freq_response(&flat, 12, 30e3).unwrap();
        assert!(fr.h.iter().all(|m| *m == tap));

        let tau = 1e-6;
        let delayed = ChannelRealization { taps: vec![tap.clone()], delays_s: vec![tau] };
        let fr = freq_response(&delayed, 12, 30e3).unwrap();
        for k in 1..12 {
            let ratio = fr.h[k][(0, 0)] / fr.h[k - 1][(0, 0)];
            assert_abs_diff_eq!(ratio.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ratio.arg(), -2.0 * PI * 30e3 * tau, epsilon = 1e-12);
        }
    }

    #[test]
    fn kronecker_identity_is_a_no_op() {
        let p = tdl_c_profile(300e-9).unwrap();
        let k = Kronecker { rx_sqrt: DMatrix::identity(2, 2), tx_sqrt: DMatrix::identity(4, 4) };
        let a = realize_with(&p, 2, 4, Some(&k), &mut ChaCha12Rng::seed_from_u64(3)).unwrap();
        let b = realize_with(&p, 2, 4, None, &mut ChaCha12Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let bad = Kronecker { rx_sqrt: DMatrix::identity(3, 3), tx_sqrt: DMatrix::identity(4, 4) };
        assert!(realize_with(&p, 2, 4, Some(&bad), &mut ChaCha12Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn mean_power_and_frequency_correlation() {
        let p = tdl_c_profile(300e-9).unwrap();
        let phasors = TapPhasors::new(&p.delays_s(), 624, 30e3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let drops = 10_000;
        let lag = 10;
        let mut power = 0.0;
        let mut corr = Complex64::new(0.0, 0.0);
        for _ in 0..drops {
            let r = realize_with(&p, 1, 1, None, &mut rng).unwrap();
            let fr = phasors.apply(&r).unwrap();
            power += fr.h.iter().map(|m| m[(0, 0)].norm_sqr()).sum::<f64>() / 624.0;
            corr += fr.h[300 + lag][(0, 0)] * fr.h[300][(0, 0)].conj();
        }
        assert!((power / drops as f64 - 1.0).abs() < 0.02);
        let expected: Complex64 = p
            .linear_powers()
            .iter()
            .zip(p.delays_s())
            .map(|(w, tau)| Complex64::from_polar(*w, -2.0 * PI * lag as f64 * 30e3 * tau))
            .sum();
        assert!((corr.norm() / drops as f64 - expected.norm()).abs() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn seed_determines_realization(seed in any::<u64>(), r in 1usize..4, t in 1usize..6) {
            let p = tdl_c_profile(300e-9).unwrap();
            prop_assert_eq!(realize(&p, r, t, seed).unwrap(), realize(&p, r, t, seed).unwrap());
        }
    }
}
