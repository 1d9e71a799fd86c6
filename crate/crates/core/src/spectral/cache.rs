//! On-disk cache for block spectra and reduced-element tables.
//!
//! File layout, all integers little-endian:
//!
//! | offset        | content                                   |
//! |---------------|-------------------------------------------|
//! | 0..8          | magic `ETHLAB\0\x01`                      |
//! | 8..16         | header length `h` as `u64`                |
//! | 16..16+h      | JSON header ([`CacheHeader`])             |
//! | 16+h..p       | zero padding to the next multiple of 8    |
//! | p..           | `f64` payload                             |
//!
//! Spectrum payload: `d` eigenvalues, then the `d×d` eigenvector matrix
//! column-major. Table payload: the `rows×cols` element matrix column-major.
//! Files are written to a temporary name in the cache directory and renamed
//! into place, so readers never see partial files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use thiserror::Error;

use super::{BlockSpectrum, MChoice, ReducedElementTable};
use crate::model_ops::{ModelSpec, TensorOpSpec};
use crate::spin_algebra::HalfInt;

pub const MAGIC: &[u8; 8] = b"ETHLAB\0\x01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O: {0}")]
    Io(#[from] io::Error),
    #[error("cache header: {0}")]
    Header(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format_version: u32,
    pub kind: String,
    pub key: String,
    pub n_qubits: usize,
    pub s_row: HalfInt,
    pub s_col: HalfInt,
    pub rows: usize,
    pub cols: usize,
    pub model_fingerprint: String,
    #[serde(default)]
    pub operator_fingerprint: Option<String>,
    #[serde(default)]
    pub choice: Option<MChoice>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub rank: Option<HalfInt>,
    #[serde(default)]
    pub component: Option<HalfInt>,
}

fn digest_hex<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("cache keys serialize");
    hex::encode(Sha256::digest(&json))
}

pub fn spectrum_key(model: &ModelSpec, s: HalfInt) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        kind: &'static str,
        format_version: u32,
        model: &'a ModelSpec,
        n_qubits: usize,
        s: HalfInt,
    }
    digest_hex(&Key { kind: "spectrum", format_version: FORMAT_VERSION, model, n_qubits: model.n_qubits, s })
}

pub fn table_key(model: &ModelSpec, op: &TensorOpSpec, s_row: HalfInt, s_col: HalfInt, choice: Option<&MChoice>) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        kind: &'static str,
        format_version: u32,
        model: &'a ModelSpec,
        operator: &'a TensorOpSpec,
        n_qubits: usize,
        s_row: HalfInt,
        s_col: HalfInt,
        choice: Option<(HalfInt, HalfInt)>,
    }
    digest_hex(&Key {
        kind: "table",
        format_version: FORMAT_VERSION,
        model,
        operator: op,
        n_qubits: model.n_qubits,
        s_row,
        s_col,
        choice: choice.map(|c| (c.m, c.m_prime)),
    })
}

#[derive(Clone, Debug)]
pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(SpectrumCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.bin"))
    }

    fn write(&self, header: &CacheHeader, payload: impl Iterator<Item = f64>) -> Result<PathBuf, CacheError> {
        let head = serde_json::to_vec(header)?;
        let mut buf = Vec::with_capacity(16 + head.len() + 8);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(head.len() as u64).to_le_bytes());
        buf.extend_from_slice(&head);
        while buf.len() % 8 != 0 {
            buf.push(0);
        }
        for x in payload {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&buf)?;
        tmp.as_file().sync_all()?;
        let path = self.path_for(&header.key);
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(path)
    }

    /// Header and payload, or `None` when the file is absent, truncated or of
    /// a different format.
    fn read(&self, key: &str) -> Result<Option<(CacheHeader, Vec<f64>)>, CacheError> {
        let bytes = match fs::read(self.path_for(key)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Ok(None);
        }
        let head_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let Some(head) = bytes.get(16..16 + head_len) else {
            return Ok(None);
        };
        let Ok(header) = serde_json::from_slice::<CacheHeader>(head) else {
            return Ok(None);
        };
        if header.format_version != FORMAT_VERSION || header.key != key {
            return Ok(None);
        }
        let start = (16 + head_len).div_ceil(8) * 8;
        let data = bytes.get(start..).unwrap_or(&[]);
        if data.len() % 8 != 0 {
            return Ok(None);
        }
        let payload = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Some((header, payload)))
    }

    pub fn store_spectrum(&self, model: &ModelSpec, spectrum: &BlockSpectrum) -> Result<PathBuf, CacheError> {
        let d = spectrum.dim();
        let header = CacheHeader {
            format_version: FORMAT_VERSION,
            kind: "spectrum".into(),
            key: spectrum_key(model, spectrum.s),
            n_qubits: spectrum.n_qubits,
            s_row: spectrum.s,
            s_col: spectrum.s,
            rows: d,
            cols: d,
            model_fingerprint: spectrum.model_fingerprint.clone(),
            operator_fingerprint: None,
            choice: None,
            label: None,
            rank: None,
            component: None,
        };
        self.write(&header, spectrum.eigenvalues.iter().chain(spectrum.eigenvectors.iter()).copied())
    }

    pub fn load_spectrum(&self, model: &ModelSpec, s: HalfInt) -> Result<Option<BlockSpectrum>, CacheError> {
        let key = spectrum_key(model, s);
        let Some((h, data)) = self.read(&key)? else {
            return Ok(None);
        };
        let d = h.rows;
        if h.kind != "spectrum" || h.s_row != s || h.model_fingerprint != model.fingerprint() || data.len() != d + d * d {
            return Ok(None);
        }
        Ok(Some(BlockSpectrum {
            s,
            n_qubits: h.n_qubits,
            model_fingerprint: h.model_fingerprint,
            eigenvalues: data[..d].to_vec(),
            eigenvectors: DMatrix::from_column_slice(d, d, &data[d..]),
        }))
    }

    pub fn store_table(&self, model: &ModelSpec, op: &TensorOpSpec, table: &ReducedElementTable) -> Result<PathBuf, CacheError> {
        let header = CacheHeader {
            format_version: FORMAT_VERSION,
            kind: "table".into(),
            key: table_key(model, op, table.s_row, table.s_col, Some(&table.choice)),
            n_qubits: model.n_qubits,
            s_row: table.s_row,
            s_col: table.s_col,
            rows: table.elements.nrows(),
            cols: table.elements.ncols(),
            model_fingerprint: table.model_fingerprint.clone(),
            operator_fingerprint: Some(table.operator_fingerprint.clone()),
            choice: Some(table.choice),
            label: Some(table.label.clone()),
            rank: Some(table.rank),
            component: Some(table.component),
        };
        self.write(&header, table.elements.iter().copied())
    }

    pub fn load_table(
        &self,
        model: &ModelSpec,
        op: &TensorOpSpec,
        s_row: HalfInt,
        s_col: HalfInt,
        choice: &MChoice,
    ) -> Result<Option<ReducedElementTable>, CacheError> {
        let key = table_key(model, op, s_row, s_col, Some(choice));
        let Some((h, data)) = self.read(&key)? else {
            return Ok(None);
        };
        let valid = h.kind == "table"
            && h.model_fingerprint == model.fingerprint()
            && h.operator_fingerprint.as_deref() == Some(op.fingerprint().as_str())
            && data.len() == h.rows * h.cols;
        let (Some(choice), true) = (h.choice, valid) else {
            return Ok(None);
        };
        Ok(Some(ReducedElementTable {
            s_row,
            s_col,
            rank: op.rank,
            component: op.component,
            label: op.label.clone(),
            operator_fingerprint: op.fingerprint(),
            model_fingerprint: h.model_fingerprint,
            choice,
            elements: DMatrix::from_column_slice(h.rows, h.cols, &data),
        }))
    }
}
