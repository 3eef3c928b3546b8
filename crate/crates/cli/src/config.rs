//! Scenario file: TOML with named sections, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use nr_eirp::channel::ChannelConfig;
use nr_eirp::codebook::CodebookConfig;
use nr_eirp::geometry::{ElementPattern, PanelConfig};
use nr_eirp::linksim::{Csi, LinkConfig, Modulation, PrecoderPolicy};
use nr_eirp::nulling::{Algorithm, HpbwLogic, NullingRequest};
use nr_eirp::radiation::{ssb_preset, AngularGrid, Reference, SsbAperture, SsbBeam, SsbCombination};

use crate::AppError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub panel: PanelSection,
    #[serde(default)]
    pub codebook: CodebookSection,
    #[serde(default)]
    pub grid: GridSection,
    pub ssb: Option<SsbSection>,
    #[serde(default)]
    pub nulling: Vec<NullingSection>,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub link: Option<LinkSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSection {
    /// "4x4" or "2x2"; explicit keys override it.
    pub preset: Option<String>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub polarizations: Option<usize>,
    pub d_el_v: Option<f64>,
    pub d_el_h: Option<f64>,
    pub d_su_v: Option<f64>,
    pub d_su_h: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub downtilt_deg: Option<f64>,
    pub port_permutation: Option<Vec<usize>>,
    pub element: Option<ElementSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSection {
    pub max_gain_dbi: Option<f64>,
    pub hpbw_az_deg: Option<f64>,
    pub hpbw_el_deg: Option<f64>,
    pub front_to_back_db: Option<f64>,
    pub sla_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSection {
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub o1: Option<usize>,
    pub o2: Option<usize>,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_theta")]
    pub theta_range: (f64, f64),
    #[serde(default = "default_phi")]
    pub phi_range: (f64, f64),
    #[serde(default = "default_resolution")]
    pub resolution_deg: f64,
    #[serde(default = "default_reference")]
    pub reference: String,
    #[serde(default)]
    pub tx_power_dbm: f64,
}

fn default_theta() -> (f64, f64) {
    (-90.0, 90.0)
}

fn default_phi() -> (f64, f64) {
    (-180.0, 180.0)
}

fn default_resolution() -> f64 {
    1.0
}

fn default_reference() -> String {
    "global-max".into()
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            theta_range: default_theta(),
            phi_range: default_phi(),
            resolution_deg: default_resolution(),
            reference: default_reference(),
            tx_power_dbm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsbSection {
    pub preset: Option<String>,
    /// Explicit `[theta, phi]` steering list, used when no preset is named.
    pub beams: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub combination: SsbCombination,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullingSection {
    pub theta_deg: f64,
    pub phi_deg: f64,
    #[serde(default)]
    pub epsilon_db: Option<f64>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub hpbw_logic: HpbwLogic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub modulation: Modulation,
    pub n_layers: usize,
    pub n_tx: Option<usize>,
    pub n_rx: usize,
    pub snr_db: Vec<f64>,
    pub n_drops: usize,
    pub policy: PrecoderPolicy,
    pub csi: Csi,
    pub pilot_spacing: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub symbols_per_drop: Option<usize>,
    pub pmi_stride: Option<usize>,
    /// Which `[[nulling]]` entry defines the pmi-subset candidates.
    #[serde(default)]
    pub subset: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub panel: PanelConfig,
    pub element: ElementPattern,
    pub codebook: CodebookConfig,
    pub grid: AngularGrid,
    pub reference: Reference,
    pub ssb: Option<(Vec<SsbBeam>, SsbCombination)>,
    pub nulling: Vec<NullingRequest>,
    pub channel: ChannelConfig,
    pub link: Option<(LinkConfig, usize)>,
    pub output_dir: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<(Scenario, Vec<u8>), AppError> {
    let bytes = std::fs::read(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    let scenario = raw.validate().map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    Ok((scenario, bytes))
}

impl RawConfig {
    pub fn validate(self) -> Result<Scenario, String> {
        let err = |section: &str, e: nr_eirp::Error| format!("[{section}] {e}");
        let p = &self.panel;
        let mut panel = match p.preset.as_deref() {
            None | Some("4x4") => PanelConfig::reference_4x4(),
            Some("2x2") => PanelConfig::reference_2x2(),
            Some(other) => return Err(format!("[panel] unknown preset '{other}'")),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = p.$f { panel.$f = v; } )* };
        }
        set!(m1, m2, n1, n2, polarizations, d_el_v, d_el_h, carrier_hz, downtilt_deg);
        if p.d_su_v.is_some() {
            panel.d_su_v = p.d_su_v;
        }
        if p.d_su_h.is_some() {
            panel.d_su_h = p.d_su_h;
        }
        if p.port_permutation.is_some() {
            panel.port_permutation = p.port_permutation.clone();
        }
        panel.validate().map_err(|e| err("panel", e))?;

        let mut element = ElementPattern::default();
        if let Some(e) = &p.element {
            element.max_gain_dbi = e.max_gain_dbi.unwrap_or(element.max_gain_dbi);
            element.hpbw_az_deg = e.hpbw_az_deg.unwrap_or(element.hpbw_az_deg);
            element.hpbw_el_deg = e.hpbw_el_deg.unwrap_or(element.hpbw_el_deg);
            element.front_to_back_db = e.front_to_back_db.unwrap_or(element.front_to_back_db);
            element.sla_db = e.sla_db.unwrap_or(element.sla_db);
        }
        element.validate().map_err(|e| err("panel.element", e))?;

        let c = &self.codebook;
        let mut codebook = CodebookConfig::new(c.n1.unwrap_or(panel.n1), c.n2.unwrap_or(panel.n2), c.rank.unwrap_or(2));
        codebook.o1 = c.o1.unwrap_or(codebook.o1);
        codebook.o2 = c.o2.unwrap_or(codebook.o2);
        codebook.validate().map_err(|e| err("codebook", e))?;
        if codebook.n_ports() != panel.n_ports() {
            return Err(format!(
                "[codebook] {} ports do not match the panel's {}",
                codebook.n_ports(),
                panel.n_ports()
            ));
        }

        let g = &self.grid;
        let grid = AngularGrid::new(g.theta_range, g.phi_range, g.resolution_deg).map_err(|e| err("grid", e))?;
        let reference = match g.reference.as_str() {
            "global-max" => Reference::GlobalMax,
            "per-pattern-peak" => Reference::PerPatternPeak,
            "absolute-dbm" => Reference::AbsoluteDbm { tx_power_dbm: g.tx_power_dbm },
            other => return Err(format!("[grid] unknown reference '{other}'")),
        };

        let ssb = match &self.ssb {
            None => None,
            Some(s) => {
                let beams = match (&s.preset, &s.beams) {
                    (Some(name), None) => ssb_preset(name).map_err(|e| err("ssb", e))?,
                    (None, Some(list)) if !list.is_empty() => list
                        .iter()
                        .map(|&(t, p)| SsbBeam {
                            steer_theta_deg: t,
                            steer_phi_deg: p,
                            aperture: SsbAperture::FirstSubarrayColumn,
                        })
                        .collect(),
                    _ => return Err("[ssb] give exactly one of 'preset' or a non-empty 'beams'".into()),
                };
                for b in &beams {
                    if !grid.contains(b.steer_theta_deg, b.steer_phi_deg) {
                        return Err(format!(
                            "[ssb] steering ({}, {}) outside the grid",
                            b.steer_theta_deg, b.steer_phi_deg
                        ));
                    }
                }
                Some((beams, s.combination))
            }
        };

        let nulling = self
            .nulling
            .iter()
            .enumerate()
            .map(|(k, n)| {
                if !grid.contains(n.theta_deg, n.phi_deg) {
                    return Err(format!("[[nulling]] entry {k}: target outside the grid"));
                }
                match (n.algorithm, n.epsilon_db) {
                    (Algorithm::Threshold, Some(eps)) => Ok(NullingRequest::threshold(n.theta_deg, n.phi_deg, eps)),
                    (Algorithm::Threshold, None) => Err(format!("[[nulling]] entry {k}: threshold needs epsilon_db")),
                    (Algorithm::Hpbw, _) => Ok(NullingRequest::hpbw(n.theta_deg, n.phi_deg, n.hpbw_logic)),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;

        self.channel.validate().map_err(|e| err("channel", e))?;

        let link = match &self.link {
            None => None,
            Some(l) => {
                let defaults = LinkConfig::reference();
                let cfg = LinkConfig {
                    modulation: l.modulation,
                    n_layers: l.n_layers,
                    n_tx: l.n_tx.unwrap_or(codebook.n_ports()),
                    n_rx: l.n_rx,
                    snr_db: l.snr_db.clone(),
                    n_drops: l.n_drops,
                    policy: l.policy,
                    csi: l.csi,
                    pilot_spacing: l.pilot_spacing.unwrap_or(defaults.pilot_spacing),
                    seed: l.seed,
                    symbols_per_drop: l.symbols_per_drop.unwrap_or(defaults.symbols_per_drop),
                    pmi_stride: l.pmi_stride.unwrap_or(defaults.pmi_stride),
                };
                cfg.validate().map_err(|e| err("link", e))?;
                if cfg.policy == PrecoderPolicy::PmiSubset && l.subset >= nulling.len() {
                    return Err(format!("[link] subset = {} but only {} [[nulling]] entries", l.subset, nulling.len()));
                }
                Some((cfg, l.subset))
            }
        };

        Ok(Scenario {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            panel,
            element,
            codebook,
            grid,
            reference,
            ssb,
            nulling,
            channel: self.channel,
            link,
            output_dir: self.output.dir,
        })
    }
}
