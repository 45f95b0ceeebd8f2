//! Artifact writers. Every artifact carries the tool version, the config
//! hash, and the seed; wall-clock time lives only in run.json so that
//! data.csv and summary.json stay byte-identical across reruns and
//! worker counts.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{config_sha256, ExperimentConfig};

pub struct RunWriter {
    dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl RunWriter {
    pub fn new(dir: &Path, cfg: &ExperimentConfig) -> Result<RunWriter, String> {
        std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create output dir {}: {e}", dir.display()))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            config_hash: config_sha256(cfg),
            seed: cfg.seed,
        })
    }

    fn meta_lines(&self) -> String {
        format!(
            "# version={}\n# config_sha256={}\n# seed={}\n",
            cramerlab::VERSION,
            self.config_hash,
            self.seed
        )
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, String> {
        let path = self.dir.join(name);
        let mut f = std::fs::File::create(&path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        f.write_all(bytes)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        Ok(path)
    }

    pub fn write_csv(&self, header: &str, lines: &[String]) -> Result<PathBuf, String> {
        let mut out = self.meta_lines();
        out.push_str(header);
        out.push('\n');
        for line in lines {
            out.push_str(line);
            out.push('\n');
        }
        self.write("data.csv", out.as_bytes())
    }

    /// summary.json with the reproducibility envelope around the payload.
    pub fn write_summary(&self, subcommand: &str, payload: Value) -> Result<PathBuf, String> {
        let doc = json!({
            "version": cramerlab::VERSION,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "subcommand": subcommand,
            "results": payload,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        text.push('\n');
        self.write("summary.json", text.as_bytes())
    }

    /// run.json: the resolved config echo plus wall-clock seconds.
    pub fn write_run(
        &self,
        subcommand: &str,
        cfg: &ExperimentConfig,
        wall_seconds: f64,
    ) -> Result<PathBuf, String> {
        let doc = json!({
            "version": cramerlab::VERSION,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "subcommand": subcommand,
            "wall_clock_seconds": wall_seconds,
            "config": serde_json::to_value(cfg).expect("config serializes"),
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("run doc serializes");
        text.push('\n');
        self.write("run.json", text.as_bytes())
    }
}

/// Points file: one point per row, comma-separated coordinates, `#`
/// comment lines skipped; all rows must share one width.
pub fn read_points(path: &Path) -> Result<(Vec<Vec<f64>>, usize), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read points {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    let mut width = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| format!("points row {}: {e}", i + 1))?;
        if width == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(format!(
                "points row {} has {} coordinates, expected {width}",
                i + 1,
                row.len()
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format!("points file {} has no rows", path.display()));
    }
    Ok((rows, width))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pts.csv");
        std::fs::write(&p, "# comment\n0.1, 0.2\n-0.3,0.4\n\n").unwrap();
        let (rows, width) = read_points(&p).unwrap();
        assert_eq!(width, 2);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][0], -0.3);
        std::fs::write(&p, "0.1,0.2\n0.3\n").unwrap();
        assert!(read_points(&p).unwrap_err().contains("row 2"));
    }
}
