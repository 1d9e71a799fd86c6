//! CSV tables with a commented provenance header, and JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::CliError;

pub const CONVENTIONS: &[&str] = &[
    "energies in units of the coupling J; energy densities are E/N",
    "eigenvectors signed so the largest-magnitude coefficient (first on ties) is positive",
    "reduced elements <a||T||a'> = <a,m|T_q|a',m'> / <s,m|s',m';k,q>, Condon-Shortley phases",
    eth_core::eth_stats::DOS_CONVENTION,
    "|f| = sqrt(variance * D); D of the row sector when nu = 0, geometric mean of both sectors otherwise",
];

pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    canonical: serde_json::Value,
}

impl OutputDir {
    pub fn new(config: &PipelineConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&config.out_dir)?;
        Ok(OutputDir { dir: config.out_dir.clone(), hash: config.content_hash(), canonical: config.canonical() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Writes `# key: value` header lines, then the rows with a column header.
    pub fn write_csv<R: Serialize>(&self, name: &str, command: &str, notes: &[String], rows: &[R]) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        let mut head = format!("# eth-lab {command}\n# config_hash: {}\n", self.hash);
        for c in CONVENTIONS {
            head.push_str(&format!("# convention: {c}\n"));
        }
        for n in notes {
            head.push_str(&format!("# note: {n}\n"));
        }
        buf.extend_from_slice(head.as_bytes());
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        let path = self.dir.join(name);
        fs::write(&path, buf)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_sidecar<T: Serialize>(&self, name: &str, command: &str, files: &[PathBuf], summary: &T) -> Result<PathBuf, CliError> {
        let files: Vec<String> = files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect();
        let doc = serde_json::json!({
            "command": command,
            "config_hash": self.hash,
            "config": self.canonical,
            "conventions": CONVENTIONS,
            "files": files,
            "summary": summary,
        });
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: f64,
        b: Option<f64>,
    }

    #[test]
    fn csv_carries_hash_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig { out_dir: dir.path().to_path_buf(), ..PipelineConfig::default() };
        let out = OutputDir::new(&config).unwrap();
        let path = out.write_csv("t.csv", "test", &[], &[Row { a: 1.5, b: None }]).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.contains(&format!("# config_hash: {}", config.content_hash())));
        assert!(text.ends_with("a,b\n1.5,\n"));
    }
}
