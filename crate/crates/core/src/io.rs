//! Config loading, CSV and plot-data writers, run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, SweepResult};

/// A validated config and its JSON echo with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub echoed: serde_json::Value,
}

impl LoadedConfig {
    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let echoed = serde_json::to_value(&config)?;
        Ok(LoadedConfig { config, echoed })
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<LoadedConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    config
        .validate()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    LoadedConfig::from_config(config)
}

/// Reads and validates a JSON config. Parse errors carry line and column,
/// unknown keys are rejected by name.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Shortest decimal that parses back to `x`; exponent form outside `[1e-4, 1e16)`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub const SWEEP_HEADER: &str = "alpha,classical_mc,classical_analytic,quantum_term,remainder,stderr";

/// Sweep table; numbers use the shortest round-trip decimal form.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    writeln!(s, "{SWEEP_HEADER}").unwrap();
    for r in &result.rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(r.alpha),
            fmt_num(r.classical_mc),
            opt(r.classical_analytic),
            fmt_num(r.quantum_term),
            fmt_num(r.remainder),
            fmt_num(r.stderr)
        )
        .unwrap();
    }
    s
}

/// Generic CSV from a header and rows of optional numbers.
pub fn table_csv(header: &[&str], rows: &[Vec<Option<f64>>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| opt(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Log-log plot data: `alpha |remainder| below_noise` per row, plus the fitted line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotData {
    pub data: String,
    pub fit: String,
}

pub fn plot_data(result: &SweepResult) -> Result<PlotData> {
    if result.rows.is_empty() {
        return Err(Error::Invalid("sweep table is empty".into()));
    }
    let mut data = String::new();
    for r in &result.rows {
        writeln!(
            data,
            "{:.16e} {:.16e} {}",
            r.alpha,
            r.remainder.abs(),
            u8::from(r.below_noise)
        )
        .unwrap();
    }
    let mut fit = String::new();
    match result.fit {
        Some(line) => {
            writeln!(fit, "# slope={} intercept={}", line.slope, line.intercept).unwrap();
            let hi = result.rows.iter().map(|r| r.alpha).fold(f64::MIN, f64::max);
            let lo = result.rows.iter().map(|r| r.alpha).fold(f64::MAX, f64::min);
            for a in [hi, lo] {
                let y = (line.intercept + line.slope * a.ln()).exp();
                writeln!(fit, "{a:.16e} {y:.16e}").unwrap();
            }
        }
        None => writeln!(fit, "# noise-limited").unwrap(),
    }
    Ok(PlotData { data, fit })
}

/// Writes `<stem>.dat` and `<stem>_fit.dat` into `dir`.
pub fn emit_plot_data(result: &SweepResult, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let p = plot_data(result)?;
    let data = dir.join(format!("{stem}.dat"));
    let fit = dir.join(format!("{stem}_fit.dat"));
    fs::write(&data, p.data)?;
    fs::write(&fit, p.fit)?;
    Ok((data, fit))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub subcommand: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    pub results: Vec<ResultFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// The embedded config, validated.
    pub fn loaded_config(&self) -> Result<LoadedConfig> {
        let cfg: ExperimentConfig = serde_json::from_value(self.config.clone())
            .map_err(|e| Error::Config(format!("manifest config: {e}")))?;
        LoadedConfig::from_config(cfg)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

/// Writes `contents` to `dir/name` and returns its manifest entry.
pub fn write_result(dir: &Path, name: &str, contents: &[u8]) -> Result<ResultFile> {
    fs::write(dir.join(name), contents)?;
    Ok(ResultFile {
        path: name.to_string(),
        sha256: sha256_hex(contents),
    })
}
