//! Commands behind the `stochhom` binary. Every command writes its numeric outputs as CSV
//! next to a `manifest.json` recording the configuration, derived parameters and checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use stochhom_core::config::Config;
use stochhom_core::fem::{sorted_eigenvalues, EffectiveSample, MaterialField};
use stochhom_core::mc::{campaign_stats, prob_band, Campaign, CampaignStats, Failure};
use stochhom_core::voigt::{upper_labels, upper_triangle};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_SCHEMA: &str = "1";
/// Half-widths reported by the sensitivity study.
pub const STUDY_ETAS: [f64; 3] = [0.02, 0.04, 0.08];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] stochhom_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a configuration file. A manifest is accepted too, through its `config` entry.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = match value.get("config") {
        Some(inner) if value.get("schema").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub mesh: Option<usize>,
    pub kappa: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: Config) -> Config {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(m) = self.mesh {
            cfg.mesh = m;
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        cfg
    }
}

/// Fixed 17-significant-digit formatting used in every CSV.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Derived quantities echoed into every manifest.
pub fn derived_params(cfg: &Config) -> Result<Value> {
    let d = cfg.derive()?;
    Ok(json!({
        "sigma_c": d.mfp.sigma_c(),
        "alpha": d.mfp.alpha(),
        "c0": d.mean.c0(),
        "c1": d.mean.c1(),
        "c_epsilon": d.mfp.c_epsilon(&d.mean),
        "delta_s": d.dist.delta_s(),
        "w_min": d.dist.w_min(),
        "w_max": d.dist.w_max(),
        "eta_nu": d.grid.eta_nu(),
        "nu": d.grid.len(),
        "shear_moduli": cfg.mean.shear_moduli(),
        "c_bar_upper": upper_triangle(d.mean.c_bar()).to_vec(),
        "free_dofs": d.mesh.n_free_dofs(),
    }))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    csv_schema: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a Config,
    derived: Value,
    started: String,
    finished: String,
    outputs: BTreeMap<String, String>,
    extra: Value,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &Config,
    started: String,
    files: &[&str],
    extra: Value,
) -> Result<PathBuf> {
    let outputs = files
        .iter()
        .map(|f| Ok((f.to_string(), sha256_file(&dir.join(f))?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let m = Manifest {
        schema: "stochhom-manifest/1",
        csv_schema: CSV_SCHEMA,
        version: VERSION,
        command,
        seed: cfg.seed,
        config: cfg,
        derived: derived_params(cfg)?,
        started,
        finished: now(),
        outputs,
        extra,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Header of `field.csv`.
pub fn field_header() -> Vec<String> {
    let mut h: Vec<String> = ["x1", "x2", "x3"].map(String::from).to_vec();
    h.extend(upper_labels("c"));
    h.push("lambda_min".into());
    h
}

/// Header of `records.csv`.
pub fn records_header() -> Vec<String> {
    let mut h = vec!["kappa".to_string()];
    h.extend(upper_labels("c"));
    h.extend((1..=6).map(|i| format!("lambda{i}")));
    h
}

/// Cell-centred grid of `counts` points per axis.
pub fn sample_points(counts: [usize; 3]) -> Vec<[f64; 3]> {
    let axis = |n: usize| (0..n).map(move |i| (i as f64 + 0.5) / n as f64);
    let mut pts = Vec::new();
    for x in axis(counts[0]) {
        for y in axis(counts[1]) {
            for z in axis(counts[2]) {
                pts.push([x, y, z]);
            }
        }
    }
    pts
}

/// Evaluates realization 0 of the configured campaign on the sample grid; writes `field.csv`.
pub fn cmd_sample_field(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let started = now();
    create_dir(out)?;
    let campaign = Campaign::from_config(cfg)?;
    let field = campaign.field(0)?;
    let rows = sample_points(cfg.sample_grid)
        .into_iter()
        .map(|x| {
            let c = field.eval(x)?;
            let lmin = sorted_eigenvalues(&c)[5];
            let mut row: Vec<String> = x.iter().map(|v| fmt_num(*v)).collect();
            row.extend(upper_triangle(&c).iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(lmin));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("field.csv");
    write_csv(&path, &field_header(), rows)?;
    let cert = field.certificate();
    write_manifest(
        out,
        "sample-field",
        cfg,
        started,
        &["field.csv"],
        json!({ "kappa": 0, "gamma_c": cert.gamma_c, "gamma_elasticity": cert.gamma_elast }),
    )?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct HomogenizeReport {
    pub records: Vec<EffectiveSample>,
    pub failures: Vec<Failure>,
    pub stats: Option<CampaignStats>,
}

fn record_row(r: &EffectiveSample) -> Vec<String> {
    let mut row = vec![r.kappa.to_string()];
    row.extend(upper_triangle(&r.c_eff).iter().map(|v| fmt_num(*v)));
    row.extend(r.lambda.iter().map(|v| fmt_num(*v)));
    row
}

/// Runs one campaign and writes `records.csv`, `conv.csv`, `pdf.csv`, `peta.csv`.
pub fn cmd_homogenize(cfg: &Config, out: &Path) -> Result<HomogenizeReport> {
    let started = now();
    create_dir(out)?;
    let campaign = Campaign::from_config(cfg)?;
    let output = campaign.run_with_threads(cfg.threads)?;
    let records = output.records;

    write_csv(&out.join("records.csv"), &records_header(), records.iter().map(record_row))?;

    let stats = if records.len() >= 2 {
        Some(campaign_stats(&records, &campaign.mean, &cfg.eta, cfg.kde_points)?)
    } else {
        log::warn!("fewer than 2 successful realizations; statistics skipped");
        None
    };
    let conv = stats.as_ref().map(|s| s.conv.clone()).unwrap_or_else(|| {
        stochhom_core::mc::convergence(&records, campaign.mean.c_bar().norm())
    });
    write_csv(
        &out.join("conv.csv"),
        &["kappa".into(), "conv".into()],
        conv.iter()
            .enumerate()
            .map(|(k, c)| vec![(k + 1).to_string(), fmt_num(*c)]),
    )?;
    let pdf_rows: Vec<Vec<String>> = stats
        .as_ref()
        .and_then(|s| s.pdf.as_ref())
        .map(|k| {
            k.grid
                .iter()
                .zip(&k.density)
                .map(|(g, d)| vec![fmt_num(*g), fmt_num(*d)])
                .collect()
        })
        .unwrap_or_default();
    write_csv(&out.join("pdf.csv"), &["lambda1_grid".into(), "density".into()], pdf_rows)?;
    let peta_rows: Vec<Vec<String>> = stats
        .as_ref()
        .map(|s| s.p_eta.iter().map(|(e, p)| vec![fmt_num(*e), fmt_num(*p)]).collect())
        .unwrap_or_default();
    write_csv(&out.join("peta.csv"), &["eta".into(), "P".into()], peta_rows)?;

    let failures: Vec<Value> = output
        .failures
        .iter()
        .map(|f| json!({ "kappa": f.kappa, "reason": f.reason }))
        .collect();
    write_manifest(
        out,
        "homogenize",
        cfg,
        started,
        &["records.csv", "conv.csv", "pdf.csv", "peta.csv"],
        json!({
            "effective_samples": records.len(),
            "failures": failures,
            "mean_lambda1": stats.as_ref().map(|s| s.mean_lambda1),
            "kde_bandwidth": stats.as_ref().and_then(|s| s.pdf.as_ref()).map(|k| k.bandwidth),
        }),
    )?;
    Ok(HomogenizeReport {
        records,
        failures: output.failures,
        stats,
    })
}

/// One row of `study.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub corr_length: f64,
    pub delta_unc: f64,
    pub mean_lambda1: f64,
    pub p: [f64; 3],
    pub samples: usize,
}

pub fn study_header() -> Vec<String> {
    ["L_c", "delta_unc", "E_Lambda1", "P_0.02", "P_0.04", "P_0.08"]
        .map(String::from)
        .to_vec()
}

pub fn cell_dir_name(corr_length: f64, delta: f64) -> String {
    format!("cell_Lc{corr_length}_d{delta}")
}

/// Runs one campaign per `(L_c, delta)` cell, each in its own subdirectory, and writes `study.csv`.
pub fn cmd_study(cfg: &Config, out: &Path) -> Result<Vec<StudyRow>> {
    let started = now();
    create_dir(out)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &lc in &cfg.study.corr_lengths {
        for &d in &cfg.study.deltas {
            let cell_cfg = cfg.clone().with_uncertainty(lc, d);
            let name = cell_dir_name(lc, d);
            log::info!("study cell L_c = {lc}, delta = {d}");
            let rep = cmd_homogenize(&cell_cfg, &out.join(&name))?;
            let (mean_lambda1, p) = match &rep.stats {
                Some(s) => (
                    s.mean_lambda1,
                    STUDY_ETAS.map(|e| prob_band(&s.lambda1_normalized, e)),
                ),
                None => (f64::NAN, [f64::NAN; 3]),
            };
            rows.push(StudyRow {
                corr_length: lc,
                delta_unc: d,
                mean_lambda1,
                p,
                samples: rep.records.len(),
            });
            cells.push(name);
        }
    }
    write_csv(
        &out.join("study.csv"),
        &study_header(),
        rows.iter().map(|r| {
            let mut v = vec![fmt_num(r.corr_length), fmt_num(r.delta_unc), fmt_num(r.mean_lambda1)];
            v.extend(r.p.iter().map(|p| fmt_num(*p)));
            v
        }),
    )?;
    write_manifest(out, "study", cfg, started, &["study.csv"], json!({ "cells": cells }))?;
    Ok(rows)
}

/// Validates the configuration and returns the derived parameters.
pub fn cmd_validate_config(cfg: &Config) -> Result<Value> {
    derived_params(cfg)
}

/// Parses a CSV file written by this crate into a header and numeric rows.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| CliError::Config(format!("{}: bad number {s:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
