//! 3D EIRP synthesis on an (elevation, azimuth) grid.
//!
//! For a precoder `W`, each layer/polarization field is
//! `sum_p W[p, l] * a_p(theta, phi)` where the port response `a_p` sums the
//! element amplitude and steering phase of the port's `m1 * m2` elements with
//! weight `1 / sqrt(m1 * m2)`. EIRP is the sum of the per-layer,
//! per-polarization powers.
//!
//! [`PatternStack`] evaluates a whole codebook at once by caching the power
//! of each distinct polarization sub-vector (see
//! [`crate::codebook::decompose`]).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{contiguous_blocks, decompose, PmIndex, PrecodingMatrix};
use crate::geometry::{dot, ElementLayout, ElementPattern};
use crate::{Error, Result};

/// Values below this (relative) level are clipped.
pub const FLOOR_DB: f64 = -100.0;

const NODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub resolution: f64,
}

impl AngularGrid {
    /// Uniform grid covering both ranges inclusively.
    pub fn new(theta_range: (f64, f64), phi_range: (f64, f64), resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        let axis = |(lo, hi): (f64, f64), limit: f64, name: &str| -> Result<Vec<f64>> {
            if !(lo <= hi && lo >= -limit && hi <= limit) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] invalid")));
            }
            let steps = (hi - lo) / resolution;
            let n = steps.round();
            if (steps - n).abs() > 1e-6 {
                return Err(Error::Config(format!("{name} range is not a multiple of the resolution")));
            }
            Ok((0..=n as usize).map(|i| lo + i as f64 * resolution).collect())
        };
        Ok(Self { theta: axis(theta_range, 90.0, "elevation")?, phi: axis(phi_range, 180.0, "azimuth")?, resolution })
    }

    /// Whole sphere, theta in [-90, 90], phi in [-180, 180].
    pub fn full(resolution: f64) -> Result<Self> {
        Self::new((-90.0, 90.0), (-180.0, 180.0), resolution)
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i * self.phi.len() + j
    }

    pub fn contains(&self, theta: f64, phi: f64) -> bool {
        let (t0, t1) = (self.theta[0], *self.theta.last().unwrap());
        let (p0, p1) = (self.phi[0], *self.phi.last().unwrap());
        theta >= t0 - NODE_TOL && theta <= t1 + NODE_TOL && phi >= p0 - NODE_TOL && phi <= p1 + NODE_TOL
    }

    /// Nearest grid indices to a direction.
    pub fn nearest(&self, theta: f64, phi: f64) -> (usize, usize) {
        let near = |axis: &[f64], x: f64| {
            let k = ((x - axis[0]) / self.resolution).round();
            (k.max(0.0) as usize).min(axis.len() - 1)
        };
        (near(&self.theta, theta), near(&self.phi, phi))
    }

    /// Bracketing index and fraction along one axis.
    fn locate(&self, axis: &[f64], x: f64) -> (usize, f64) {
        if axis.len() == 1 {
            return (0, 0.0);
        }
        let pos = (x - axis[0]) / self.resolution;
        let mut i = (pos.floor().max(0.0) as usize).min(axis.len() - 2);
        let mut f = pos - i as f64;
        if (f - 1.0).abs() < NODE_TOL {
            i += 1;
            f = 0.0;
        }
        if f.abs() < NODE_TOL {
            f = 0.0;
        }
        if i == axis.len() - 1 {
            return (i - 1, 1.0);
        }
        (i, f.clamp(0.0, 1.0))
    }

    /// Every (theta, phi) in cell order.
    pub fn directions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.theta.iter().flat_map(move |&t| self.phi.iter().map(move |&p| (t, p)))
    }
}

/// What 0 dB means in a [`RadiationPattern`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Reference {
    /// Each pattern normalized to its own maximum.
    PerPatternPeak,
    /// Normalized to the maximum over the whole pattern set and all directions.
    GlobalMax,
    /// EIRP in dBm for the given total transmit power.
    AbsoluteDbm { tx_power_dbm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiationPattern {
    pub grid: AngularGrid,
    /// Row-major, theta by phi.
    pub eirp_db: Vec<f64>,
    pub reference: Reference,
}

impl RadiationPattern {
    /// Build from linear power values; `norm` is the linear 0 dB level.
    pub fn from_linear(grid: AngularGrid, linear: &[f64], reference: Reference, norm: f64) -> Self {
        let offset = match reference {
            Reference::AbsoluteDbm { tx_power_dbm } => tx_power_dbm,
            _ => 0.0,
        };
        let eirp_db = linear.iter().map(|&p| to_db(p / norm) + offset).collect();
        Self { grid, eirp_db, reference }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.eirp_db[self.grid.cell(i, j)]
    }

    pub fn max_db(&self) -> f64 {
        self.eirp_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear values relative to the pattern's 0 dB.
    pub fn linear(&self) -> Vec<f64> {
        let offset = self.db_offset();
        self.eirp_db.iter().map(|&v| from_db(v - offset)).collect()
    }

    fn db_offset(&self) -> f64 {
        match self.reference {
            Reference::AbsoluteDbm { tx_power_dbm } => tx_power_dbm,
            _ => 0.0,
        }
    }

    /// Shift so the pattern maximum sits at 0 dB.
    pub fn normalized_to_peak(&self) -> Self {
        let m = self.max_db();
        Self {
            grid: self.grid.clone(),
            eirp_db: self.eirp_db.iter().map(|v| (v - m).max(FLOOR_DB)).collect(),
            reference: Reference::PerPatternPeak,
        }
    }
}

#[inline]
pub fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(FLOOR_DB)
    } else {
        FLOOR_DB
    }
}

#[inline]
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Complex response of every port toward every grid direction.
#[derive(Debug, Clone)]
pub struct PortManifold {
    pub grid: AngularGrid,
    pub n_ports: usize,
    /// `values[cell * n_ports + port]`.
    pub values: Vec<Complex64>,
}

impl PortManifold {
    pub fn new(layout: &ElementLayout, element: &ElementPattern, grid: &AngularGrid) -> Self {
        let n_ports = layout.n_ports;
        let k = 2.0 * PI / layout.wavelength;
        let sub_weight = 1.0 / (layout.port_size as f64).sqrt();
        let dirs: Vec<(f64, f64)> = grid.directions().collect();
        let values = dirs
            .par_iter()
            .flat_map_iter(|&(theta, phi)| {
                let (u, tl, pl) = layout.to_panel_frame(theta, phi);
                let amp = element.amplitude_unchecked(tl, pl) * sub_weight;
                let mut a = vec![Complex64::new(0.0, 0.0); n_ports];
                for e in &layout.entries {
                    a[e.port] += Complex64::from_polar(amp, k * dot(&e.position, &u));
                }
                a
            })
            .collect();
        Self { grid: grid.clone(), n_ports, values }
    }

    #[inline]
    pub fn ports(&self, cell: usize) -> &[Complex64] {
        &self.values[cell * self.n_ports..(cell + 1) * self.n_ports]
    }
}

fn check_ports(w: &PrecodingMatrix, layout: &ElementLayout) -> Result<()> {
    if w.n_ports() != layout.n_ports {
        return Err(Error::PortMismatch { precoder: w.n_ports(), layout: layout.n_ports });
    }
    Ok(())
}

/// Linear EIRP (per unit transmit power) of one precoder on a manifold.
pub fn linear_power(manifold: &PortManifold, port_pol: &[usize], w: &PrecodingMatrix) -> Vec<f64> {
    let n_pol = port_pol.iter().max().map_or(1, |m| m + 1);
    (0..manifold.grid.len())
        .map(|cell| {
            let a = manifold.ports(cell);
            let mut total = 0.0;
            for l in 0..w.rank() {
                let mut field = [Complex64::new(0.0, 0.0); 2];
                for (p, &ap) in a.iter().enumerate() {
                    field[port_pol[p]] += w.w[(p, l)] * ap;
                }
                total += field[..n_pol].iter().map(|f| f.norm_sqr()).sum::<f64>();
            }
            total
        })
        .collect()
}

/// EIRP pattern of a single precoder.
///
/// `GlobalMax` has only one pattern to take the maximum over, so it coincides
/// with `PerPatternPeak` here; use [`PatternStack`] for set-wide references.
pub fn pattern_for_pm(
    layout: &ElementLayout,
    element: &ElementPattern,
    w: &PrecodingMatrix,
    grid: &AngularGrid,
    reference: Reference,
) -> Result<RadiationPattern> {
    check_ports(w, layout)?;
    let manifold = PortManifold::new(layout, element, grid);
    let lin = linear_power(&manifold, &layout.port_polarizations(), w);
    let norm = match reference {
        Reference::AbsoluteDbm { .. } => 1.0,
        _ => lin.iter().copied().fold(0.0, f64::max),
    };
    Ok(RadiationPattern::from_linear(grid.clone(), &lin, reference, norm))
}

/// Patterns of a whole precoder set on a shared grid and reference.
#[derive(Debug, Clone)]
pub struct PatternStack {
    pub grid: AngularGrid,
    pub reference: Reference,
    pub indices: Vec<PmIndex>,
    component_power: Vec<Vec<f64>>,
    /// Per precoder: (component, weight) pairs whose weighted sum is the linear EIRP.
    terms: Vec<Vec<(usize, f64)>>,
    /// Per precoder linear 0 dB level.
    norms: Vec<f64>,
    global_max: f64,
}

impl PatternStack {
    pub fn build(
        layout: &ElementLayout,
        element: &ElementPattern,
        matrices: &[PrecodingMatrix],
        grid: &AngularGrid,
        reference: Reference,
    ) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::EmptySubset);
        }
        for w in matrices {
            check_ports(w, layout)?;
        }
        let manifold = PortManifold::new(layout, element, grid);
        Self::from_manifold(&manifold, layout, matrices, reference)
    }

    pub fn from_manifold(
        manifold: &PortManifold,
        layout: &ElementLayout,
        matrices: &[PrecodingMatrix],
        reference: Reference,
    ) -> Result<Self> {
        let blocks = if layout.polarization_blocks().len() > 1 {
            layout.polarization_blocks()
        } else {
            contiguous_blocks(layout.n_ports, 1)
        };
        let classes = block_classes(layout, &blocks);
        let dec = decompose(matrices, &blocks, Some(&classes))?;

        // Any block of a given class sees the same port responses; use the first.
        let class_ports: Vec<&Vec<usize>> =
            dec.component_class.iter().map(|&c| &blocks[classes.iter().position(|&k| k == c).unwrap()]).collect();
        let n_cells = manifold.grid.len();
        let component_power: Vec<Vec<f64>> = dec
            .components
            .par_iter()
            .zip(class_ports.par_iter())
            .map(|(comp, ports)| {
                (0..n_cells)
                    .map(|cell| {
                        let a = manifold.ports(cell);
                        comp.iter().zip(ports.iter()).map(|(c, &p)| c * a[p]).sum::<Complex64>().norm_sqr()
                    })
                    .collect()
            })
            .collect();

        let terms: Vec<Vec<(usize, f64)>> = dec
            .terms
            .iter()
            .map(|layers| layers.iter().flatten().map(|t| (t.component, t.scale.norm_sqr())).collect())
            .collect();

        let mut stack = Self {
            grid: manifold.grid.clone(),
            reference,
            indices: matrices.iter().map(|m| m.index).collect(),
            component_power,
            terms,
            norms: Vec::new(),
            global_max: 0.0,
        };
        let peaks: Vec<f64> =
            (0..stack.len()).into_par_iter().map(|i| stack.linear(i).into_iter().fold(0.0, f64::max)).collect();
        stack.global_max = peaks.iter().copied().fold(0.0, f64::max);
        stack.norms = match reference {
            Reference::PerPatternPeak => peaks,
            Reference::GlobalMax => vec![stack.global_max; stack.len()],
            Reference::AbsoluteDbm { .. } => vec![1.0; stack.len()],
        };
        Ok(stack)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Linear EIRP per unit transmit power, before normalization.
    pub fn linear(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for &(c, wt) in &self.terms[i] {
            for (o, p) in out.iter_mut().zip(&self.component_power[c]) {
                *o += wt * p;
            }
        }
        out
    }

    #[inline]
    fn linear_at_cell(&self, i: usize, cell: usize) -> f64 {
        self.terms[i].iter().map(|&(c, wt)| wt * self.component_power[c][cell]).sum()
    }

    fn offset(&self) -> f64 {
        match self.reference {
            Reference::AbsoluteDbm { tx_power_dbm } => tx_power_dbm,
            _ => 0.0,
        }
    }

    #[inline]
    pub fn db_at_cell(&self, i: usize, cell: usize) -> f64 {
        to_db(self.linear_at_cell(i, cell) / self.norms[i]) + self.offset()
    }

    /// Linear value relative to the stack reference.
    #[inline]
    pub fn relative_at_cell(&self, i: usize, cell: usize) -> f64 {
        self.linear_at_cell(i, cell) / self.norms[i]
    }

    pub fn pattern(&self, i: usize) -> RadiationPattern {
        RadiationPattern::from_linear(self.grid.clone(), &self.linear(i), self.reference, self.norms[i])
    }

    /// Bilinear interpolation of codeword `i`'s dB pattern at the target.
    pub fn eirp_at(&self, i: usize, theta: f64, phi: f64) -> Result<f64> {
        bilinear(&self.grid, theta, phi, |ti, pj| self.db_at_cell(i, self.grid.cell(ti, pj)))
    }

    pub fn eirp_at_all(&self, theta: f64, phi: f64) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.eirp_at(i, theta, phi)).collect()
    }

    pub fn global_max_linear(&self) -> f64 {
        self.global_max
    }

    /// Linear mean of the selected patterns (by position in the stack).
    ///
    /// With a per-pattern-peak reference the mean is renormalized to its own
    /// peak; otherwise it keeps the stack reference.
    pub fn average(&self, ids: &[usize]) -> Result<RadiationPattern> {
        if ids.is_empty() {
            return Err(Error::EmptySubset);
        }
        let n = ids.len() as f64;
        let mean: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|cell| ids.iter().map(|&i| self.relative_at_cell(i, cell)).sum::<f64>() / n)
            .collect();
        let (norm, reference) = match self.reference {
            Reference::PerPatternPeak => (mean.iter().copied().fold(0.0, f64::max), Reference::PerPatternPeak),
            Reference::GlobalMax => (1.0, Reference::GlobalMax),
            r @ Reference::AbsoluteDbm { .. } => (1.0, r),
        };
        Ok(RadiationPattern::from_linear(self.grid.clone(), &mean, reference, norm))
    }

    pub fn average_all(&self) -> Result<RadiationPattern> {
        self.average(&(0..self.len()).collect::<Vec<_>>())
    }
}

/// Label blocks whose ports have identical element sites with the same class.
fn block_classes(layout: &ElementLayout, blocks: &[Vec<usize>]) -> Vec<usize> {
    let signature = |ports: &Vec<usize>| -> Vec<Vec<(i64, i64, i64)>> {
        ports
            .iter()
            .map(|&p| {
                let mut s: Vec<_> = layout
                    .entries
                    .iter()
                    .filter(|e| e.port == p)
                    .map(|e| {
                        let q = |x: f64| (x * 1e9).round() as i64;
                        (q(e.position[0]), q(e.position[1]), q(e.position[2]))
                    })
                    .collect();
                s.sort();
                s
            })
            .collect()
    };
    let sigs: Vec<_> = blocks.iter().map(signature).collect();
    (0..blocks.len()).map(|b| (0..=b).find(|&a| sigs[a] == sigs[b]).unwrap()).collect()
}

fn bilinear(grid: &AngularGrid, theta: f64, phi: f64, value: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if !grid.contains(theta, phi) {
        return Err(Error::OutOfBounds { theta, phi });
    }
    let (i, ft) = grid.locate(&grid.theta, theta);
    let (j, fp) = grid.locate(&grid.phi, phi);
    let i1 = (i + 1).min(grid.n_theta() - 1);
    let j1 = (j + 1).min(grid.n_phi() - 1);
    let v00 = value(i, j);
    if ft == 0.0 && fp == 0.0 {
        return Ok(v00);
    }
    let v01 = value(i, j1);
    let v10 = value(i1, j);
    let v11 = value(i1, j1);
    Ok((1.0 - ft) * ((1.0 - fp) * v00 + fp * v01) + ft * ((1.0 - fp) * v10 + fp * v11))
}

/// Bilinear interpolation on the dB grid.
pub fn eirp_at(pattern: &RadiationPattern, theta: f64, phi: f64) -> Result<f64> {
    bilinear(&pattern.grid, theta, phi, |i, j| pattern.at(i, j))
}

/// Pointwise mean in the linear power domain.
pub fn average_pattern(patterns: &[RadiationPattern]) -> Result<RadiationPattern> {
    let first = patterns.first().ok_or(Error::EmptySubset)?;
    if patterns.iter().any(|p| p.grid != first.grid) {
        return Err(Error::GridMismatch);
    }
    if patterns.iter().any(|p| p.reference != first.reference) {
        return Err(Error::Config("patterns use different references".into()));
    }
    let n = patterns.len() as f64;
    let mut mean = vec![0.0; first.grid.len()];
    for p in patterns {
        for (m, v) in mean.iter_mut().zip(p.linear()) {
            *m += v / n;
        }
    }
    let norm = match first.reference {
        Reference::PerPatternPeak => mean.iter().copied().fold(0.0, f64::max),
        _ => 1.0,
    };
    Ok(RadiationPattern::from_linear(first.grid.clone(), &mean, first.reference, norm))
}

/// Grid argmax. Ties go to the smallest |theta|, then smallest |phi|, then
/// the lexicographically smallest (theta, phi).
pub fn find_peak(pattern: &RadiationPattern) -> (f64, f64) {
    let g = &pattern.grid;
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &t) in g.theta.iter().enumerate() {
        for (j, &p) in g.phi.iter().enumerate() {
            let v = pattern.at(i, j);
            let better = match best {
                None => true,
                Some((bv, bt, bp)) => {
                    v > bv
                        || (v == bv
                            && (t.abs(), p.abs(), t, p)
                                .partial_cmp(&(bt.abs(), bp.abs(), bt, bp))
                                .is_some_and(|o| o.is_lt()))
                }
            };
            if better {
                best = Some((v, t, p));
            }
        }
    }
    let (_, t, p) = best.expect("non-empty grid");
    (t, p)
}

/// Half-power interval edges about a peak along the two principal cuts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beamwidth {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
}

impl Beamwidth {
    pub fn theta_width(&self) -> f64 {
        self.theta_hi - self.theta_lo
    }

    pub fn phi_width(&self) -> f64 {
        self.phi_hi - self.phi_lo
    }
}

/// Walk from `peak` in direction `step` until the cut drops below `level`.
fn crossing(axis: &[f64], cut: &dyn Fn(usize) -> f64, peak: usize, level: f64, forward: bool) -> Option<f64> {
    let mut k = peak;
    loop {
        let next = if forward {
            if k + 1 >= axis.len() {
                return None;
            }
            k + 1
        } else {
            k.checked_sub(1)?
        };
        let (v0, v1) = (cut(k), cut(next));
        if v1 < level {
            let f = (v0 - level) / (v0 - v1);
            return Some(axis[k] + f * (axis[next] - axis[k]));
        }
        k = next;
    }
}

/// Contiguous -3 dB region around `peak` along the elevation cut at `phi_p`
/// and the azimuth cut at `theta_p`.
pub fn hpbw_of(pattern: &RadiationPattern, peak: (f64, f64)) -> Result<Beamwidth> {
    let g = &pattern.grid;
    let (pi, pj) = g.nearest(peak.0, peak.1);
    let level = pattern.at(pi, pj) - 10.0 * 2f64.log10();
    let el = |i: usize| pattern.at(i, pj);
    let az = |j: usize| pattern.at(pi, j);
    let theta_lo = crossing(&g.theta, &el, pi, level, false).ok_or(Error::UndefinedWidth("elevation"))?;
    let theta_hi = crossing(&g.theta, &el, pi, level, true).ok_or(Error::UndefinedWidth("elevation"))?;
    let phi_lo = crossing(&g.phi, &az, pj, level, false).ok_or(Error::UndefinedWidth("azimuth"))?;
    let phi_hi = crossing(&g.phi, &az, pj, level, true).ok_or(Error::UndefinedWidth("azimuth"))?;
    Ok(Beamwidth { theta_lo, theta_hi, phi_lo, phi_hi })
}

/// Which elements an SSB beam uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SsbAperture {
    /// All elements of the subarrays in panel column 0, both polarizations.
    FirstSubarrayColumn,
    /// Every element.
    FullPanel,
    /// Elements of the listed ports.
    Ports(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsbBeam {
    pub steer_theta_deg: f64,
    pub steer_phi_deg: f64,
    pub aperture: SsbAperture,
}

impl SsbBeam {
    pub fn column(theta: f64, phi: f64) -> Self {
        Self { steer_theta_deg: theta, steer_phi_deg: phi, aperture: SsbAperture::FirstSubarrayColumn }
    }
}

/// Named SSB steering sets.
pub fn ssb_preset(name: &str) -> Result<Vec<SsbBeam>> {
    match name {
        "ssb-332" => {
            let mut beams = Vec::new();
            for theta in [6.0, 0.0] {
                for phi in [-60.0, 0.5, 60.5] {
                    beams.push(SsbBeam::column(theta, phi));
                }
            }
            for phi in [-45.0, 45.0] {
                beams.push(SsbBeam::column(-3.0, phi));
            }
            Ok(beams)
        }
        other => Err(Error::Config(format!("unknown SSB preset '{other}'"))),
    }
}

/// Element-steered SSB pattern, normalized to its own peak.
pub fn ssb_pattern(
    layout: &ElementLayout,
    element: &ElementPattern,
    beam: &SsbBeam,
    grid: &AngularGrid,
) -> Result<RadiationPattern> {
    if !grid.contains(beam.steer_theta_deg, beam.steer_phi_deg) {
        return Err(Error::OutOfBounds { theta: beam.steer_theta_deg, phi: beam.steer_phi_deg });
    }
    let active: Vec<usize> = layout
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| match &beam.aperture {
            SsbAperture::FirstSubarrayColumn => e.subarray.1 == 0,
            SsbAperture::FullPanel => true,
            SsbAperture::Ports(ports) => ports.contains(&e.port),
        })
        .map(|(k, _)| k)
        .collect();
    if active.is_empty() {
        return Err(Error::Config("SSB aperture selects no elements".into()));
    }
    let k = 2.0 * PI / layout.wavelength;
    let (u0, _, _) = layout.to_panel_frame(beam.steer_theta_deg, beam.steer_phi_deg);
    let amp = 1.0 / (active.len() as f64).sqrt();
    let weights: Vec<(usize, Complex64)> =
        active.iter().map(|&e| (e, Complex64::from_polar(amp, -k * dot(&layout.entries[e].position, &u0)))).collect();
    let dirs: Vec<(f64, f64)> = grid.directions().collect();
    let lin: Vec<f64> = dirs
        .par_iter()
        .map(|&(theta, phi)| {
            let (u, tl, pl) = layout.to_panel_frame(theta, phi);
            let g = element.amplitude_unchecked(tl, pl);
            let mut field = [Complex64::new(0.0, 0.0); 2];
            for &(e, w) in &weights {
                let entry = &layout.entries[e];
                field[entry.polarization.index()] += w * Complex64::from_polar(g, k * dot(&entry.position, &u));
            }
            field[0].norm_sqr() + field[1].norm_sqr()
        })
        .collect();
    let peak = lin.iter().copied().fold(0.0, f64::max);
    Ok(RadiationPattern::from_linear(grid.clone(), &lin, Reference::PerPatternPeak, peak))
}

/// How an SSB shapes the PM set it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SsbCombination {
    /// Multiply each PM pattern by the normalized SSB power pattern.
    #[default]
    Mask,
    /// Keep only PMs whose peak lies inside the SSB half-power box.
    Association,
}

#[derive(Debug, Clone)]
pub struct SsbComposite {
    /// Linear mean of the per-PM composites.
    pub pattern: RadiationPattern,
    /// Composite EIRP (dB) at the target for each contributing PM.
    pub target_db: Vec<f64>,
    /// Stack positions of the contributing PMs.
    pub members: Vec<usize>,
}

/// Combine one SSB (normalized mask) with every PM of a stack.
pub fn ssb_pm_composite(
    ssb: &RadiationPattern,
    stack: &PatternStack,
    target: (f64, f64),
    mode: SsbCombination,
) -> Result<SsbComposite> {
    if ssb.grid != stack.grid {
        return Err(Error::GridMismatch);
    }
    let mask = ssb.normalized_to_peak();
    match mode {
        SsbCombination::Mask => {
            let mask_lin = mask.linear();
            let ids: Vec<usize> = (0..stack.len()).collect();
            let avg = stack.average(&ids)?;
            let offset = match avg.reference {
                Reference::AbsoluteDbm { tx_power_dbm } => tx_power_dbm,
                _ => 0.0,
            };
            let mean: Vec<f64> = avg.linear().iter().zip(&mask_lin).map(|(a, m)| a * m).collect();
            let pattern = RadiationPattern {
                grid: stack.grid.clone(),
                eirp_db: mean.iter().map(|&v| to_db(v) + offset).collect(),
                reference: avg.reference,
            };
            let mask_at = eirp_at(&mask, target.0, target.1)?;
            let target_db = ids
                .iter()
                .map(|&i| Ok((stack.eirp_at(i, target.0, target.1)? + mask_at).max(FLOOR_DB + offset)))
                .collect::<Result<_>>()?;
            Ok(SsbComposite { pattern, target_db, members: ids })
        }
        SsbCombination::Association => {
            let peak = find_peak(&mask);
            let bw = hpbw_of(&mask, peak)?;
            let members: Vec<usize> = (0..stack.len())
                .filter(|&i| {
                    let (t, p) = find_peak(&stack.pattern(i));
                    (bw.theta_lo..=bw.theta_hi).contains(&t) && (bw.phi_lo..=bw.phi_hi).contains(&p)
                })
                .collect();
            let pattern = stack.average(&members)?;
            let target_db = members.iter().map(|&i| stack.eirp_at(i, target.0, target.1)).collect::<Result<_>>()?;
            Ok(SsbComposite { pattern, target_db, members })
        }
    }
}

/// One composite per SSB of a set, pooled: patterns averaged, target series
/// concatenated in SSB order.
pub fn ssb_set_composite(
    ssbs: &[RadiationPattern],
    stack: &PatternStack,
    target: (f64, f64),
    mode: SsbCombination,
) -> Result<SsbComposite> {
    let parts = ssbs.iter().map(|s| ssb_pm_composite(s, stack, target, mode)).collect::<Result<Vec<_>>>()?;
    let non_empty: Vec<&SsbComposite> = parts.iter().filter(|c| !c.members.is_empty()).collect();
    let weights: Vec<f64> = non_empty.iter().map(|c| c.members.len() as f64).collect();
    let total: f64 = weights.iter().sum();
    if non_empty.is_empty() {
        return Err(Error::EmptySubset);
    }
    let first = &non_empty[0].pattern;
    let mut mean = vec![0.0; stack.grid.len()];
    for (c, w) in non_empty.iter().zip(&weights) {
        for (m, v) in mean.iter_mut().zip(c.pattern.linear()) {
            *m += v * w / total;
        }
    }
    let offset = match first.reference {
        Reference::AbsoluteDbm { tx_power_dbm } => tx_power_dbm,
        _ => 0.0,
    };
    let pattern = RadiationPattern {
        grid: stack.grid.clone(),
        eirp_db: mean.iter().map(|&v| to_db(v) + offset).collect(),
        reference: first.reference,
    };
    Ok(SsbComposite {
        pattern,
        target_db: parts.iter().flat_map(|c| c.target_db.iter().copied()).collect(),
        members: parts.iter().flat_map(|c| c.members.iter().copied()).collect(),
    })
}
