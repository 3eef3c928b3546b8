//! Monte-Carlo BER of a precoded OFDM downlink, `y = H W s + n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::equalizer::MmseFilter;
use super::estimation::{ls_estimate, pilot_positions};
use super::precoding::{svd_precoder, PmiSearch};
use super::qam::{qam_map, HardDemapper, Modulation};
use crate::channel::{complex_normal, realize_model, ChannelConfig, ChannelModel, TapPhasors, TdlProfile};
use crate::codebook::PrecodingMatrix;
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecoderPolicy {
    Svd,
    PmiFull,
    PmiSubset,
}

impl PrecoderPolicy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Svd => "svd",
            Self::PmiFull => "pmi-full",
            Self::PmiSubset => "pmi-subset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Csi {
    Perfect,
    Estimated,
}

impl Csi {
    pub fn name(self) -> &'static str {
        match self {
            Self::Perfect => "perfect",
            Self::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub modulation: Modulation,
    pub n_layers: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub snr_db: Vec<f64>,
    pub n_drops: usize,
    pub policy: PrecoderPolicy,
    pub csi: Csi,
    #[serde(default = "default_pilot_spacing")]
    pub pilot_spacing: usize,
    #[serde(default)]
    pub seed: u64,
    /// OFDM symbols per subcarrier in each drop.
    #[serde(default = "default_symbols")]
    pub symbols_per_drop: usize,
    /// Subcarrier decimation of the codebook search metric.
    #[serde(default = "default_pmi_stride")]
    pub pmi_stride: usize,
}

fn default_pilot_spacing() -> usize {
    4
}

fn default_symbols() -> usize {
    1
}

fn default_pmi_stride() -> usize {
    12
}

impl LinkConfig {
    /// Two-layer 16-QAM on the 32-port, 4-antenna link.
    pub fn reference() -> Self {
        Self {
            modulation: Modulation::Qam16,
            n_layers: 2,
            n_tx: 32,
            n_rx: 4,
            snr_db: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
            n_drops: 1000,
            policy: PrecoderPolicy::PmiFull,
            csi: Csi::Perfect,
            pilot_spacing: default_pilot_spacing(),
            seed: 1,
            symbols_per_drop: default_symbols(),
            pmi_stride: default_pmi_stride(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_layers > self.n_tx.min(self.n_rx) {
            return Err(Error::Config(format!(
                "n_layers = {} must be in 1..={}",
                self.n_layers,
                self.n_tx.min(self.n_rx)
            )));
        }
        if self.n_drops == 0 {
            return Err(Error::Config("n_drops must be positive".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr_db must be a non-empty list of finite values".into()));
        }
        if self.symbols_per_drop == 0 || self.pmi_stride == 0 || self.pilot_spacing == 0 {
            return Err(Error::Config("symbols_per_drop, pmi_stride and pilot_spacing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    /// Standard error of `ber` from the spread of per-drop error rates.
    pub std_error: f64,
}

struct Context<'a> {
    link: &'a LinkConfig,
    model: ChannelModel,
    profile: TdlProfile,
    phasors: TapPhasors,
    search: Option<PmiSearch>,
    candidates: Vec<&'a PrecodingMatrix>,
    pilots: Vec<usize>,
    demapper: HardDemapper,
}

/// BER at each configured SNR. Every drop draws its channel, bits and noise
/// from streams keyed by `(seed, drop)`, so policies and SNR points see the
/// same random numbers and the result does not depend on scheduling.
pub fn run_ber(
    link: &LinkConfig,
    channel: &ChannelConfig,
    codebook: &[PrecodingMatrix],
    subset: Option<&[usize]>,
) -> Result<Vec<BerPoint>> {
    link.validate()?;
    channel.validate()?;
    let candidates: Vec<&PrecodingMatrix> = match link.policy {
        PrecoderPolicy::Svd => Vec::new(),
        PrecoderPolicy::PmiFull => codebook.iter().collect(),
        PrecoderPolicy::PmiSubset => {
            let ids = subset.ok_or_else(|| Error::Config("pmi-subset policy needs a subset".into()))?;
            ids.iter()
                .map(|&i| codebook.get(i).ok_or_else(|| Error::IndexOutOfRange(format!("subset entry {i}"))))
                .collect::<Result<_>>()?
        }
    };
    let search = if link.policy == PrecoderPolicy::Svd {
        None
    } else {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let c = candidates[0];
        if c.n_ports() != link.n_tx {
            return Err(Error::PortMismatch { precoder: c.n_ports(), layout: link.n_tx });
        }
        if c.rank() != link.n_layers {
            return Err(Error::Config(format!("codebook rank {} differs from n_layers {}", c.rank(), link.n_layers)));
        }
        let owned: Vec<PrecodingMatrix> = candidates.iter().map(|&c| c.clone()).collect();
        Some(PmiSearch::new(&owned)?)
    };
    let profile = channel.profile()?;
    let phasors = TapPhasors::new(&profile.delays_s(), channel.n_subcarriers, channel.subcarrier_spacing_hz)?;
    let pilots = match link.csi {
        Csi::Perfect => Vec::new(),
        Csi::Estimated => pilot_positions(channel.n_subcarriers, link.pilot_spacing)?,
    };
    let ctx = Context {
        link,
        model: channel.model,
        profile,
        phasors,
        search,
        candidates,
        pilots,
        demapper: HardDemapper::new(link.modulation),
    };

    let per_drop: Vec<Vec<u64>> =
        (0..link.n_drops as u64).into_par_iter().map(|d| simulate_drop(&ctx, d)).collect::<Result<_>>()?;

    let bits_per_drop =
        (channel.n_subcarriers * link.symbols_per_drop * link.n_layers * link.modulation.bits_per_symbol()) as u64;
    let n = link.n_drops as f64;
    Ok(link
        .snr_db
        .iter()
        .enumerate()
        .map(|(s, &snr_db)| {
            let bit_errors: u64 = per_drop.iter().map(|d| d[s]).sum();
            let bits_total = bits_per_drop * link.n_drops as u64;
            let ber = bit_errors as f64 / bits_total as f64;
            let var = if link.n_drops > 1 {
                per_drop.iter().map(|d| (d[s] as f64 / bits_per_drop as f64 - ber).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            BerPoint { snr_db, bit_errors, bits_total, ber, std_error: (var / n).sqrt() }
        })
        .collect())
}

fn simulate_drop(ctx: &Context, drop: u64) -> Result<Vec<u64>> {
    let link = ctx.link;
    let seed = link.seed;
    let (r, t, l) = (link.n_rx, link.n_tx, link.n_layers);
    let n_sc = ctx.phasors.n_subcarriers;
    let n_sym = link.symbols_per_drop;

    let mut ch_rng = stream_rng(seed, drop, Stream::Channel);
    let realization = realize_model(ctx.model, &ctx.profile, r, t, &mut ch_rng)?;
    let h = ctx.phasors.apply(&realization)?.h;

    let mut data_rng = stream_rng(seed, drop, Stream::Data);
    let n_bits = n_sc * n_sym * l * link.modulation.bits_per_symbol();
    let bits: Vec<u8> = (0..n_bits).map(|_| data_rng.random::<bool>() as u8).collect();
    let symbols = qam_map(&bits, link.modulation)?;

    let mut noise_rng = stream_rng(seed, drop, Stream::Noise);
    let noise: Vec<Complex64> = (0..n_sc * n_sym * r).map(|_| complex_normal(&mut noise_rng)).collect();
    let mut pilot_rng = stream_rng(seed, drop, Stream::Pilot);
    let pilot_noise: Vec<DMatrix<Complex64>> =
        ctx.pilots.iter().map(|_| DMatrix::from_fn(r, t, |_, _| complex_normal(&mut pilot_rng))).collect();
    let pilot_symbols = vec![vec![Complex64::new(1.0, 0.0); t]; ctx.pilots.len()];

    let bps = link.modulation.bits_per_symbol();
    let mut errors = Vec::with_capacity(link.snr_db.len());
    let mut decided = Vec::with_capacity(l * bps);
    for &snr_db in &link.snr_db {
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let sigma = Complex64::new(noise_var.sqrt(), 0.0);
        let estimate;
        let h_csi: &[DMatrix<Complex64>] = match link.csi {
            Csi::Perfect => &h,
            Csi::Estimated => {
                let y: Vec<DMatrix<Complex64>> =
                    ctx.pilots.iter().zip(&pilot_noise).map(|(&k, n)| &h[k] + n * sigma).collect();
                estimate = ls_estimate(&y, &pilot_symbols, &ctx.pilots, n_sc)?;
                &estimate
            }
        };
        let w = match &ctx.search {
            None => svd_precoder(h_csi, l)?,
            Some(search) => ctx.candidates[search.select(h_csi, noise_var, link.pmi_stride)?.0].w.clone(),
        };
        let mut err = 0u64;
        for k in 0..n_sc {
            let he = &h[k] * &w;
            let filter = MmseFilter::new(&(&h_csi[k] * &w), noise_var);
            for sym in 0..n_sym {
                let base = k * n_sym + sym;
                let s = DVector::from_column_slice(&symbols[base * l..(base + 1) * l]);
                let n = DVector::from_column_slice(&noise[base * r..(base + 1) * r]);
                let y = &he * s + n * sigma;
                let est = filter.apply_unbiased(&y);
                decided.clear();
                for &z in est.iter() {
                    ctx.demapper.demap_into(z, &mut decided);
                }
                let sent = &bits[base * l * bps..(base + 1) * l * bps];
                err += sent.iter().zip(&decided).filter(|(a, b)| a != b).count() as u64;
            }
        }
        errors.push(err);
    }
    Ok(errors)
}
