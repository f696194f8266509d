//! Subcommand dispatch: run an experiment, write its artifacts and manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{self, SecondMomentState};
use crate::io::{self, LoadedConfig, ResultFile, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subcommand {
    Sweep,
    PureState,
    HigherOrder,
    NonGaussian,
    FiniteQm,
    MomentsCheck,
    Chebyshev,
    SubAlpha,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Sweep,
        Subcommand::PureState,
        Subcommand::HigherOrder,
        Subcommand::NonGaussian,
        Subcommand::FiniteQm,
        Subcommand::MomentsCheck,
        Subcommand::Chebyshev,
        Subcommand::SubAlpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Sweep => "sweep",
            Subcommand::PureState => "pure-state",
            Subcommand::HigherOrder => "higher-order",
            Subcommand::NonGaussian => "nongaussian",
            Subcommand::FiniteQm => "finite-qm",
            Subcommand::MomentsCheck => "moments-check",
            Subcommand::Chebyshev => "chebyshev",
            Subcommand::SubAlpha => "sub-alpha",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads for sampling; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Replaces the config seed (and is echoed into the manifest).
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

impl Outcome {
    /// 0 when every band holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct ResultDoc<'a, R: Serialize> {
    subcommand: &'a str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_slope: Option<f64>,
    report: &'a R,
}

struct Artifacts {
    passed: bool,
    files: Vec<(String, Vec<u8>)>,
}

fn result_json<R: Serialize>(
    sub: Subcommand,
    passed: bool,
    fitted_slope: Option<f64>,
    report: &R,
) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(&ResultDoc {
        subcommand: sub.name(),
        passed,
        fitted_slope,
        report,
    })?;
    v.push(b'\n');
    Ok(v)
}

fn finish<R: Serialize>(
    sub: Subcommand,
    passed: bool,
    report: &R,
    mut files: Vec<(String, Vec<u8>)>,
) -> Result<Artifacts> {
    files.push(("result.json".into(), result_json(sub, passed, None, report)?));
    Ok(Artifacts { passed, files })
}

fn execute(sub: Subcommand, loaded: &LoadedConfig) -> Result<Artifacts> {
    let cfg = &loaded.config;
    let csv_name = format!("{}.csv", sub.name());
    match sub {
        Subcommand::Sweep => {
            let r = experiment::alpha_sweep(cfg)?;
            let plot = io::plot_data(&r)?;
            let files = vec![
                (csv_name, io::sweep_csv(&r).into_bytes()),
                ("sweep_plot.dat".into(), plot.data.into_bytes()),
                ("sweep_fit.dat".into(), plot.fit.into_bytes()),
                (
                    "result.json".into(),
                    result_json(sub, r.passed, r.fitted_slope(), &r)?,
                ),
            ];
            Ok(Artifacts {
                passed: r.passed,
                files,
            })
        }
        Subcommand::PureState => {
            let psi = cfg.state.psi().ok_or_else(|| {
                Error::Config("pure-state needs a rank1 state with an explicit psi".into())
            })?;
            let r = experiment::pure_state_experiment(
                &psi,
                cfg.alpha_grid[0],
                &cfg.observable()?,
                cfg.mc_samples,
                cfg.seed,
                cfg.chunk_size,
            )?;
            let mut rows = Vec::new();
            for (i, row) in r.covariance.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    let p = psi.as_slice();
                    rows.push(vec![
                        Some((i + 1) as f64),
                        Some((j + 1) as f64),
                        Some(e.mean),
                        Some(e.stderr),
                        Some(p[i] * p[j]),
                    ]);
                }
            }
            let csv = io::table_csv(&["i", "j", "covariance_over_alpha", "stderr", "target"], &rows);
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
        Subcommand::HigherOrder => {
            let r = experiment::higher_order_experiment(
                &cfg.functional()?,
                &cfg.density()?,
                cfg.order,
                &cfg.alpha_grid,
            )?;
            let rows: Vec<_> = r
                .rows
                .iter()
                .map(|x| vec![Some(x.alpha), Some(x.analytic), Some(x.generalized), Some(x.relative_gap), x.exact])
                .collect();
            let csv = io::table_csv(&["alpha", "analytic", "generalized", "relative_gap", "exact"], &rows);
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
        Subcommand::NonGaussian => {
            let state = SecondMomentState::with_covariance(cfg.sampler, cfg.covariance()?)?;
            let r = experiment::nongaussian_experiment(
                &state,
                &cfg.observable()?,
                cfg.mc_samples,
                cfg.seed,
                cfg.chunk_size,
            )?;
            let rows = vec![
                vec![Some(2.0), Some(r.quadratic.mean), Some(r.quadratic.stderr), Some(r.trace_value)],
                vec![Some(4.0), Some(r.quartic.mean), Some(r.quartic.stderr), Some(r.quartic_exact)],
                vec![
                    Some(4.0),
                    Some(r.quartic_gaussian.mean),
                    Some(r.quartic_gaussian.stderr),
                    Some(r.quartic_wick),
                ],
            ];
            let csv = io::table_csv(&["degree", "mc", "stderr", "exact"], &rows);
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
        Subcommand::FiniteQm => {
            let r = experiment::finite_qm_demo(cfg)?;
            let rows: Vec<_> = r
                .rows
                .iter()
                .map(|x| {
                    vec![
                        Some(x.alpha),
                        Some(x.classical_mc.mean),
                        Some(x.classical_mc.stderr),
                        x.classical_exact,
                        Some(x.quantum_term),
                        Some(x.amplified_gap),
                        Some(x.generalized),
                    ]
                })
                .collect();
            let csv = io::table_csv(
                &[
                    "alpha",
                    "classical_mc",
                    "stderr",
                    "classical_exact",
                    "quantum_term",
                    "amplified_gap",
                    "generalized",
                ],
                &rows,
            );
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
        Subcommand::MomentsCheck => {
            let r = experiment::moments_experiment(
                &cfg.covariance()?,
                cfg.order,
                cfg.mc_samples,
                cfg.seed,
                cfg.chunk_size,
            )?;
            let mut csv = String::from("label,order,analytic,mc,stderr,z\n");
            for x in &r.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    x.label,
                    x.order,
                    io::fmt_num(x.check.analytic),
                    io::fmt_num(x.check.mc),
                    io::fmt_num(x.check.stderr),
                    io::fmt_num(x.z)
                ));
            }
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
        Subcommand::Chebyshev => {
            let r = experiment::chebyshev_experiment(
                &cfg.density()?,
                &cfg.alpha_grid,
                cfg.mc_samples,
                cfg.seed,
                cfg.chunk_size,
            )?;
            let rows: Vec<_> = r
                .rows
                .iter()
                .map(|x| vec![Some(x.alpha), Some(x.threshold), Some(x.bound), Some(x.empirical)])
                .collect();
            let csv = io::table_csv(&["alpha", "threshold", "bound", "empirical"], &rows);
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
        Subcommand::SubAlpha => {
            let alpha = cfg.alpha_grid[0];
            let shrink = cfg.shrink.unwrap_or(alpha);
            let r = experiment::sub_alpha_states(
                alpha,
                shrink,
                &cfg.density()?,
                &cfg.observable()?,
                cfg.mc_samples,
                cfg.seed,
                cfg.chunk_size,
            )?;
            let rows = vec![vec![
                Some(r.alpha),
                Some(r.dispersion),
                Some(r.energy.mean),
                Some(r.energy.stderr),
                Some(r.energy_bound),
            ]];
            let csv = io::table_csv(&["alpha", "dispersion", "energy", "stderr", "energy_bound"], &rows);
            finish(sub, r.passed, &r, vec![(csv_name, csv.into_bytes())])
        }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {k} threads: {e}")))?;
        return Ok(pool.install(job));
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(job())
}

/// Runs `sub`, writing its CSV tables, `result.json` and `manifest.json` into
/// `opts.out_dir`.
pub fn run(sub: Subcommand, loaded: &LoadedConfig, opts: &RunOptions) -> Result<Outcome> {
    let loaded = match opts.seed {
        Some(seed) => {
            let mut cfg = loaded.config.clone();
            cfg.seed = seed;
            LoadedConfig::from_config(cfg)?
        }
        None => loaded.clone(),
    };
    let artifacts = in_pool(opts.threads, || execute(sub, &loaded))??;
    fs::create_dir_all(&opts.out_dir)?;
    let results = artifacts
        .files
        .iter()
        .map(|(name, bytes)| io::write_result(&opts.out_dir, name, bytes))
        .collect::<Result<Vec<ResultFile>>>()?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: sub.name().to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seeds: vec![loaded.config.seed],
        threads: opts.threads,
        config: loaded.echoed.clone(),
        results,
    };
    let manifest_path = opts.out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(Outcome {
        passed: artifacts.passed,
        manifest,
        manifest_path,
    })
}

/// Re-runs a manifest's config and checks every recorded hash.
pub fn verify_manifest(manifest_path: &Path, scratch_dir: &Path) -> Result<bool> {
    let m = RunManifest::load(manifest_path)?;
    let sub: Subcommand = m.subcommand.parse()?;
    let loaded = m.loaded_config()?;
    let again = run(
        sub,
        &loaded,
        &RunOptions {
            out_dir: scratch_dir.to_path_buf(),
            threads: m.threads,
            seed: None,
        },
    )?;
    Ok(again.manifest.results == m.results)
}
