//! Antenna element, subarray and panel geometry.
//!
//! The panel lies in the y-z plane with broadside along +x. Elevation `theta`
//! is measured up from the x-y plane, azimuth `phi` counter-clockwise from +x
//! (positive to the left of boresight when looking out of the panel).
//!
//! Elements of a subarray share one antenna port per polarization. Ports are
//! numbered `p = pol * (n1 * n2) + col * n2 + row`, i.e. column by column and
//! top to bottom within a column.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Parabolic-in-dB element pattern (3GPP TR 38.901 style).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementPattern {
    pub max_gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    /// Attenuation floor of the combined pattern.
    pub front_to_back_db: f64,
    /// Elevation side-lobe floor.
    pub sla_db: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        Self { max_gain_dbi: 5.3, hpbw_az_deg: 90.0, hpbw_el_deg: 60.0, front_to_back_db: 30.0, sla_db: 30.0 }
    }
}

impl ElementPattern {
    pub fn validate(&self) -> Result<()> {
        if !(self.hpbw_az_deg > 0.0 && self.hpbw_el_deg > 0.0) {
            return Err(Error::Config("element HPBW must be positive".into()));
        }
        if !(self.front_to_back_db >= 0.0 && self.sla_db >= 0.0) {
            return Err(Error::Config("element attenuation floors must be non-negative".into()));
        }
        if !self.max_gain_dbi.is_finite() {
            return Err(Error::Config("element gain must be finite".into()));
        }
        Ok(())
    }

    /// Gain in dBi without domain checks. Used in the synthesis inner loops.
    #[inline]
    pub fn gain_db_unchecked(&self, theta: f64, phi: f64) -> f64 {
        let a_h = -(12.0 * (phi / self.hpbw_az_deg).powi(2)).min(self.front_to_back_db);
        let a_v = -(12.0 * (theta / self.hpbw_el_deg).powi(2)).min(self.sla_db);
        self.max_gain_dbi - (-(a_v + a_h)).min(self.front_to_back_db)
    }

    /// Linear field amplitude, `sqrt(10^(gain/10))`.
    #[inline]
    pub fn amplitude_unchecked(&self, theta: f64, phi: f64) -> f64 {
        10f64.powf(self.gain_db_unchecked(theta, phi) / 20.0)
    }
}

/// Element gain in dBi at (`theta`, `phi`) degrees.
pub fn element_gain(pattern: &ElementPattern, theta: f64, phi: f64) -> Result<f64> {
    check_direction(theta, phi)?;
    Ok(pattern.gain_db_unchecked(theta, phi))
}

pub(crate) fn check_direction(theta: f64, phi: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&theta) {
        return Err(Error::Domain(format!("elevation {theta} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&phi) {
        return Err(Error::Domain(format!("azimuth {phi} outside [-180, 180]")));
    }
    Ok(())
}

/// Unit propagation vector for elevation/azimuth in degrees.
#[inline]
pub fn unit_direction(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.to_radians().sin_cos();
    let (sp, cp) = phi.to_radians().sin_cos();
    [ct * cp, ct * sp, st]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    /// Element rows per subarray.
    pub m1: usize,
    /// Element columns per subarray.
    pub m2: usize,
    /// Subarray columns in the panel.
    pub n1: usize,
    /// Subarray rows in the panel.
    pub n2: usize,
    pub polarizations: usize,
    pub d_el_v: f64,
    pub d_el_h: f64,
    /// Subarray centre-to-centre pitch. `None` means contiguous (`m1 * d_el_v`).
    pub d_su_v: Option<f64>,
    /// Subarray centre-to-centre pitch. `None` means contiguous (`m2 * d_el_h`).
    pub d_su_h: Option<f64>,
    pub carrier_hz: f64,
    pub downtilt_deg: f64,
    /// Optional relabelling: element group of default port `p` drives port `perm[p]`.
    pub port_permutation: Option<Vec<usize>>,
}

impl PanelConfig {
    /// 2x3 subarrays in a 4x4 grid, 0.058/0.044 m pitch, 3.75 GHz.
    pub fn reference_4x4() -> Self {
        Self {
            m1: 2,
            m2: 3,
            n1: 4,
            n2: 4,
            polarizations: 2,
            d_el_v: 0.058,
            d_el_h: 0.044,
            d_su_v: None,
            d_su_h: None,
            carrier_hz: 3.75e9,
            downtilt_deg: 0.0,
            port_permutation: None,
        }
    }

    /// Same 8x12 element aperture split into 4x6 subarrays, 2x2 of them.
    pub fn reference_2x2() -> Self {
        Self { m1: 4, m2: 6, n1: 2, n2: 2, ..Self::reference_4x4() }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn total_elements(&self) -> usize {
        self.polarizations * self.m1 * self.m2 * self.n1 * self.n2
    }

    pub fn n_ports(&self) -> usize {
        self.polarizations * self.n1 * self.n2
    }

    pub fn subarray_pitch_v(&self) -> f64 {
        self.d_su_v.unwrap_or(self.m1 as f64 * self.d_el_v)
    }

    pub fn subarray_pitch_h(&self) -> f64 {
        self.d_su_h.unwrap_or(self.m2 as f64 * self.d_el_h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 == 0 || self.m2 == 0 || self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("panel dimensions must be positive".into()));
        }
        if !(1..=2).contains(&self.polarizations) {
            return Err(Error::Config("polarizations must be 1 or 2".into()));
        }
        let pitches = [Some(self.d_el_v), Some(self.d_el_h), self.d_su_v, self.d_su_h];
        if pitches.iter().flatten().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config("all pitches must be positive".into()));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(Error::Config("carrier_hz must be positive".into()));
        }
        if !(-90.0..=90.0).contains(&self.downtilt_deg) {
            return Err(Error::Config("downtilt outside [-90, 90]".into()));
        }
        if let Some(perm) = &self.port_permutation {
            let n = self.n_ports();
            let mut seen = vec![false; n];
            if perm.len() != n {
                return Err(Error::Config(format!("port permutation needs {n} entries")));
            }
            for &p in perm {
                if p >= n || std::mem::replace(&mut seen[p], true) {
                    return Err(Error::Config("port permutation is not a permutation".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    Plus45,
    Minus45,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::Plus45 => 0,
            Polarization::Minus45 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementEntry {
    pub position: [f64; 3],
    pub polarization: Polarization,
    /// (subarray row, subarray column).
    pub subarray: (usize, usize),
    pub port: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementLayout {
    pub entries: Vec<ElementEntry>,
    pub n_ports: usize,
    /// Elements per port (`m1 * m2`).
    pub port_size: usize,
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub downtilt_deg: f64,
    pub wavelength: f64,
}

impl ElementLayout {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Polarization index (0 or 1) driven by each port.
    pub fn port_polarizations(&self) -> Vec<usize> {
        let mut pol = vec![0; self.n_ports];
        for e in &self.entries {
            pol[e.port] = e.polarization.index();
        }
        pol
    }

    /// Ports grouped by polarization, each group in ascending port order.
    pub fn polarization_blocks(&self) -> Vec<Vec<usize>> {
        let pol = self.port_polarizations();
        let n = pol.iter().max().map_or(0, |m| m + 1);
        (0..n).map(|k| (0..self.n_ports).filter(|&p| pol[p] == k).collect()).collect()
    }

    /// Extent of element centres along y (horizontal).
    pub fn horizontal_aperture(&self) -> f64 {
        extent(self.entries.iter().map(|e| e.position[1]))
    }

    /// Extent of element centres along z (vertical).
    pub fn vertical_aperture(&self) -> f64 {
        extent(self.entries.iter().map(|e| e.position[2]))
    }

    /// Map a global direction into the panel frame, accounting for downtilt.
    /// Returns the local unit vector and local (theta, phi) in degrees.
    pub fn to_panel_frame(&self, theta: f64, phi: f64) -> ([f64; 3], f64, f64) {
        let u = unit_direction(theta, phi);
        if self.downtilt_deg == 0.0 {
            return (u, theta, phi);
        }
        let (s, c) = self.downtilt_deg.to_radians().sin_cos();
        let local = [u[0] * c - u[2] * s, u[1], u[0] * s + u[2] * c];
        let theta_l = local[2].clamp(-1.0, 1.0).asin().to_degrees();
        let phi_l = local[1].atan2(local[0]).to_degrees();
        (local, theta_l, phi_l)
    }
}

fn extent(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Place every polarized element of the panel, centred on the origin.
pub fn build_layout(config: &PanelConfig) -> Result<ElementLayout> {
    config.validate()?;
    let PanelConfig { m1, m2, n1, n2, .. } = *config;
    let su_v = config.subarray_pitch_v();
    let su_h = config.subarray_pitch_h();

    // Raw offsets before centring: column grows along +y, row grows downwards.
    let y_of = |a: usize, j: usize| a as f64 * su_h + j as f64 * config.d_el_h;
    let z_of = |b: usize, i: usize| -(b as f64 * su_v + i as f64 * config.d_el_v);
    let y_mid = 0.5 * (y_of(0, 0) + y_of(n1 - 1, m2 - 1));
    let z_mid = 0.5 * (z_of(0, 0) + z_of(n2 - 1, m1 - 1));

    let ports_per_pol = n1 * n2;
    let mut entries = Vec::with_capacity(config.total_elements());
    for pol in 0..config.polarizations {
        let polarization = if pol == 0 { Polarization::Plus45 } else { Polarization::Minus45 };
        for a in 0..n1 {
            for b in 0..n2 {
                let default_port = pol * ports_per_pol + a * n2 + b;
                let port = config.port_permutation.as_ref().map_or(default_port, |perm| perm[default_port]);
                for i in 0..m1 {
                    for j in 0..m2 {
                        entries.push(ElementEntry {
                            position: [0.0, y_of(a, j) - y_mid, z_of(b, i) - z_mid],
                            polarization,
                            subarray: (b, a),
                            port,
                        });
                    }
                }
            }
        }
    }

    // Distinct element sites must not coincide (co-located +/-45 pairs are fine).
    let tol = 1e-9;
    let mut sites: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.polarization == Polarization::Plus45)
        .map(|e| (e.position[1], e.position[2]))
        .collect();
    sites.sort_by(|p, q| p.partial_cmp(q).unwrap());
    if sites.windows(2).any(|w| (w[0].0 - w[1].0).abs() < tol && (w[0].1 - w[1].1).abs() < tol) {
        return Err(Error::Config("subarray pitch makes element positions overlap".into()));
    }

    Ok(ElementLayout {
        entries,
        n_ports: config.n_ports(),
        port_size: m1 * m2,
        n1,
        n2,
        m1,
        m2,
        downtilt_deg: config.downtilt_deg,
        wavelength: config.wavelength(),
    })
}

/// Array manifold `exp(+j k r . u)` for every element in layout order.
pub fn steering_phases(layout: &ElementLayout, theta: f64, phi: f64, wavelength: f64) -> Result<Vec<Complex64>> {
    check_direction(theta, phi)?;
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength {wavelength} must be positive")));
    }
    let k = 2.0 * PI / wavelength;
    let (u, _, _) = layout.to_panel_frame(theta, phi);
    Ok(layout.entries.iter().map(|e| Complex64::from_polar(1.0, k * dot(&e.position, &u))).collect())
}

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
