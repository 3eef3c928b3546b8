//! File emission: CSV, JSONL manifests, provenance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nr_eirp::codebook::{PmIndex, PrecodingMatrix};
use nr_eirp::Complex64;

use crate::AppError;

/// Files written by one run, removed again if the run fails.
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, AppError> {
        fs::create_dir_all(dir).map_err(|e| AppError::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, AppError> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let mut f = fs::File::create(&path).map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
        f.write_all(contents.as_bytes()).map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn names(&self) -> Vec<String> {
        self.written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect()
    }

    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

/// Six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Two decimals for dB values.
pub fn db2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// One codeword per manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub position: usize,
    pub i11: usize,
    pub i12: usize,
    pub i13: usize,
    pub i2: usize,
    /// `w[port][layer] = [re, im]`; omitted in subset manifests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<[f64; 2]>>>,
}

impl ManifestRow {
    pub fn new(position: usize, index: PmIndex, w: Option<&PrecodingMatrix>) -> Self {
        Self {
            position,
            i11: index.i11,
            i12: index.i12,
            i13: index.i13,
            i2: index.i2,
            w: w.map(|m| {
                (0..m.n_ports()).map(|p| (0..m.rank()).map(|l| [m.w[(p, l)].re, m.w[(p, l)].im]).collect()).collect()
            }),
        }
    }

    pub fn index(&self) -> PmIndex {
        PmIndex { i11: self.i11, i12: self.i12, i13: self.i13, i2: self.i2 }
    }

    pub fn matrix(&self) -> Option<PrecodingMatrix> {
        let w = self.w.as_ref()?;
        let ports = w.len();
        let rank = w.first().map_or(0, |r| r.len());
        let m = nalgebra::DMatrix::from_fn(ports, rank, |p, l| Complex64::new(w[p][l][0], w[p][l][1]));
        Some(PrecodingMatrix { index: self.index(), w: m })
    }
}

pub fn emit_manifest(rows: &[ManifestRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("manifest rows serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[derive(Debug, Serialize)]
pub struct Provenance<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub scenario: &'a str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nr_eirp::codebook::{generate_codebook, CodebookConfig};

    #[test]
    fn number_formats() {
        assert_eq!(sig6(-90.0), "-90");
        assert_eq!(sig6(0.1), "0.1");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1.234567e-5), "0.0000123457");
        assert_eq!(db2(-3.14559), "-3.15");
        assert_eq!(db2(-0.001), "0.00");
    }

    #[test]
    fn manifest_round_trip() {
        let book = generate_codebook(&CodebookConfig::new(4, 4, 2)).unwrap();
        let rows: Vec<ManifestRow> =
            book.iter().enumerate().map(|(i, m)| ManifestRow::new(i, m.index, Some(m))).collect();
        let parsed = parse_manifest(&emit_manifest(&rows)).unwrap();
        assert_eq!(parsed, rows);
        for (r, m) in parsed.iter().zip(&book) {
            assert_eq!(r.matrix().unwrap(), *m);
        }
        let subset: Vec<ManifestRow> = rows.iter().take(5).map(|r| ManifestRow { w: None, ..r.clone() }).collect();
        assert_eq!(parse_manifest(&emit_manifest(&subset)).unwrap(), subset);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
