//! Type I single-panel codebook (codebook mode 1, ranks 1 and 2).
//!
//! Beams are Kronecker products of oversampled DFT vectors,
//! `v_{l,m}[a * n2 + b] = exp(j 2 pi (l a / (o1 n1) + m b / (o2 n2)))`, and the
//! two polarization halves of a codeword are tied together by the co-phasing
//! factor `exp(j pi i2 / 2)`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookConfig {
    pub n1: usize,
    pub n2: usize,
    pub o1: usize,
    pub o2: usize,
    pub rank: usize,
    pub codebook_mode: u8,
}

impl CodebookConfig {
    pub fn new(n1: usize, n2: usize, rank: usize) -> Self {
        Self { n1, n2, o1: 4, o2: if n2 == 1 { 1 } else { 4 }, rank, codebook_mode: 1 }
    }

    pub fn n_ports(&self) -> usize {
        2 * self.n1 * self.n2
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("n1 and n2 must be positive".into()));
        }
        if self.o1 == 0 || self.o2 == 0 {
            return Err(Error::Config("oversampling factors must be >= 1".into()));
        }
        if self.n_ports() > 32 {
            return Err(Error::Unsupported(format!("{} ports (max 32)", self.n_ports())));
        }
        if self.n_ports() < 4 {
            return Err(Error::Unsupported("2-port codebook".into()));
        }
        if self.n2 == 1 && self.o2 != 1 {
            return Err(Error::Config("o2 must be 1 when n2 = 1".into()));
        }
        if self.codebook_mode != 1 {
            return Err(Error::Unsupported(format!("codebook mode {}", self.codebook_mode)));
        }
        match self.rank {
            1 => Ok(()),
            2 if self.n1 >= self.n2 => Ok(()),
            2 => Err(Error::Unsupported(format!("shape n1={} < n2={} for rank 2", self.n1, self.n2))),
            r => Err(Error::Unsupported(format!("rank {r}"))),
        }
    }

    /// Beam-pair offsets `(k1, k2)` indexed by `i13` for rank 2.
    pub fn i13_offsets(&self) -> Vec<(usize, usize)> {
        let (o1, o2) = (self.o1, self.o2);
        match (self.n1, self.n2) {
            (2, 1) => vec![(0, 0), (o1, 0)],
            (_, 1) => vec![(0, 0), (o1, 0), (2 * o1, 0), (3 * o1, 0)],
            (a, b) if a == b => vec![(0, 0), (o1, 0), (0, o2), (o1, o2)],
            _ => vec![(0, 0), (o1, 0), (0, o2), (2 * o1, 0)],
        }
    }

    /// Number of codewords the enumeration produces.
    pub fn cardinality(&self) -> usize {
        let beams = self.n1 * self.o1 * self.n2 * self.o2;
        match self.rank {
            1 => beams * 4,
            _ => beams * self.i13_offsets().len() * 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PmIndex {
    pub i11: usize,
    pub i12: usize,
    pub i13: usize,
    pub i2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub index: PmIndex,
    /// Ports x layers.
    pub w: DMatrix<Complex64>,
}

impl PrecodingMatrix {
    pub fn n_ports(&self) -> usize {
        self.w.nrows()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }
}

/// Oversampled 2D DFT beam `v_{l,m}` of length `n1 * n2`.
pub fn dft_beam(n1: usize, n2: usize, o1: usize, o2: usize, l: usize, m: usize) -> Result<Vec<Complex64>> {
    if l >= n1 * o1 || m >= n2 * o2 {
        return Err(Error::IndexOutOfRange(format!("(l, m) = ({l}, {m}) outside [0, {}) x [0, {})", n1 * o1, n2 * o2)));
    }
    Ok(dft_beam_unchecked(n1, n2, o1, o2, l, m))
}

fn dft_beam_unchecked(n1: usize, n2: usize, o1: usize, o2: usize, l: usize, m: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(n1 * n2);
    for a in 0..n1 {
        for b in 0..n2 {
            // Reduce the phase numerators so large indices stay exact.
            let pa = ((l * a) % (o1 * n1)) as f64 / (o1 * n1) as f64;
            let pb = ((m * b) % (o2 * n2)) as f64 / (o2 * n2) as f64;
            v.push(Complex64::from_polar(1.0, 2.0 * PI * (pa + pb)));
        }
    }
    v
}

/// `exp(j pi n / 2)` computed exactly for the four quadrants.
fn cophase(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Enumerate the codebook in lexicographic `(i11, i12, i13, i2)` order.
pub fn generate_codebook(config: &CodebookConfig) -> Result<Vec<PrecodingMatrix>> {
    config.validate()?;
    let CodebookConfig { n1, n2, o1, o2, rank, .. } = *config;
    let (nl, nm) = (n1 * o1, n2 * o2);
    let half = n1 * n2;
    let ports = config.n_ports();
    let beams: Vec<Vec<Complex64>> = (0..nl)
        .flat_map(|l| (0..nm).map(move |m| (l, m)))
        .map(|(l, m)| dft_beam_unchecked(n1, n2, o1, o2, l, m))
        .collect();
    let beam = |l: usize, m: usize| &beams[(l % nl) * nm + (m % nm)];

    let mut out = Vec::with_capacity(config.cardinality());
    match rank {
        1 => {
            let scale = 1.0 / (ports as f64).sqrt();
            for i11 in 0..nl {
                for i12 in 0..nm {
                    let v = beam(i11, i12);
                    for i2 in 0..4 {
                        let phi = cophase(i2);
                        let w =
                            DMatrix::from_fn(
                                ports,
                                1,
                                |p, _| {
                                    if p < half {
                                        v[p] * scale
                                    } else {
                                        phi * v[p - half] * scale
                                    }
                                },
                            );
                        out.push(PrecodingMatrix { index: PmIndex { i11, i12, i13: 0, i2 }, w });
                    }
                }
            }
        }
        _ => {
            let scale = 1.0 / (2.0 * ports as f64).sqrt();
            let offsets = config.i13_offsets();
            for i11 in 0..nl {
                for i12 in 0..nm {
                    for (i13, &(k1, k2)) in offsets.iter().enumerate() {
                        let v = beam(i11, i12);
                        let vp = beam(i11 + k1, i12 + k2);
                        for i2 in 0..2 {
                            let phi = cophase(i2);
                            let w = DMatrix::from_fn(ports, 2, |p, c| {
                                let (x, sign) = match (p < half, c) {
                                    (true, 0) => (v[p], Complex64::new(1.0, 0.0)),
                                    (true, _) => (vp[p], Complex64::new(1.0, 0.0)),
                                    (false, 0) => (v[p - half], phi),
                                    (false, _) => (vp[p - half], -phi),
                                };
                                x * sign * scale
                            });
                            out.push(PrecodingMatrix { index: PmIndex { i11, i12, i13, i2 }, w });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A nonzero polarization block of a codeword column, written as
/// `scale * components[component]` with `|scale| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTerm {
    pub block: usize,
    pub component: usize,
    pub scale: Complex64,
}

/// Codewords split into their distinct per-polarization sub-vectors.
///
/// DFT codebooks reuse a small set of beams across many codewords; EIRP and
/// PMI search both work on the distinct beams and recombine.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub blocks: Vec<Vec<usize>>,
    pub components: Vec<Vec<Complex64>>,
    /// Block class each component was built for.
    pub component_class: Vec<usize>,
    /// `terms[matrix][layer]` lists the nonzero blocks of that column.
    pub terms: Vec<Vec<Vec<BlockTerm>>>,
}

const KEY_SCALE: f64 = 1e9;

/// `n` consecutive, equally sized port blocks.
pub fn contiguous_blocks(ports: usize, n: usize) -> Vec<Vec<usize>> {
    let len = ports.checked_div(n).unwrap_or(0);
    (0..n).map(|k| (k * len..(k + 1) * len).collect()).collect()
}

/// Decompose precoders over the given port blocks (equal sizes, disjoint).
///
/// `class_of_block` lets blocks that see identical port responses share
/// components; pass `None` to keep every block separate.
pub fn decompose(
    matrices: &[PrecodingMatrix],
    blocks: &[Vec<usize>],
    class_of_block: Option<&[usize]>,
) -> Result<Decomposition> {
    let ports = matrices.first().map_or(0, |m| m.n_ports());
    let n_blocks = blocks.len();
    let block_len = blocks.first().map_or(0, |b| b.len());
    if n_blocks == 0
        || blocks.iter().any(|b| b.len() != block_len)
        || n_blocks * block_len != ports
        || blocks.iter().flatten().any(|&p| p >= ports)
    {
        return Err(Error::Config(format!("port blocks do not partition {ports} ports")));
    }
    let mut index: HashMap<(usize, Vec<(i64, i64)>), usize> = HashMap::new();
    let mut component_class = Vec::new();
    let mut components = Vec::new();
    let mut terms = Vec::with_capacity(matrices.len());
    for pm in matrices {
        if pm.n_ports() != ports {
            return Err(Error::PortMismatch { precoder: pm.n_ports(), layout: ports });
        }
        let mut layers = Vec::with_capacity(pm.rank());
        for l in 0..pm.rank() {
            let mut nonzero = Vec::new();
            for (blk, ports_in_block) in blocks.iter().enumerate() {
                let x: Vec<Complex64> = ports_in_block.iter().map(|&p| pm.w[(p, l)]).collect();
                let Some(lead) = x.iter().find(|z| z.norm() > 1e-15) else {
                    continue;
                };
                let scale = lead / lead.norm();
                let comp: Vec<Complex64> = x.iter().map(|z| z * scale.conj()).collect();
                let key: Vec<(i64, i64)> = comp
                    .iter()
                    .map(|z| ((z.re * KEY_SCALE).round() as i64, (z.im * KEY_SCALE).round() as i64))
                    .collect();
                let class = class_of_block.map_or(blk, |c| c[blk]);
                let component = *index.entry((class, key)).or_insert_with(|| {
                    components.push(comp);
                    component_class.push(class);
                    components.len() - 1
                });
                nonzero.push(BlockTerm { block: blk, component, scale });
            }
            layers.push(nonzero);
        }
        terms.push(layers);
    }
    Ok(Decomposition { blocks: blocks.to_vec(), components, component_class, terms })
}
