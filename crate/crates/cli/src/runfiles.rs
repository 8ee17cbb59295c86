//! Run directories: manifest, append-only task ledger, CSV/JSON summaries.
//!
//! Task rows go to rows.jsonl in one canonical order no matter how many
//! workers run, so reruns are bit-identical and an interrupted ledger is a
//! prefix of the complete one. Summaries are derived from the ledger and
//! written last.

use crate::{CliError, Result, EXIT_OK};
use polymer_core::experiments::{self, ExperimentConfig, TaskRecord};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(serde::Serialize, serde::Deserialize)]
struct Manifest {
    config_hash: String,
    master_seed: u64,
    code_version: String,
    started_unix: u64,
    finished_unix: Option<u64>,
    tasks_total: usize,
    tasks_done: usize,
    config: serde_json::Value,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn io_err(what: &str, e: std::io::Error) -> CliError {
    CliError::Resource(format!("{what}: {e}"))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| io_err("write", e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err("rename", e))
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn task_key(r: &TaskRecord) -> (u64, u64, u64) {
    (r.n, r.tau.to_bits(), r.replica)
}

/// Parse the existing ledger, dropping a torn trailing line if present.
fn load_ledger(path: &Path) -> Result<Vec<TaskRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_err("rows.jsonl", e))?;
    let mut out = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<TaskRecord>(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => {
                eprintln!("warning: dropping torn final ledger line ({e})");
            }
            Err(e) => {
                return Err(CliError::Resource(format!(
                    "rows.jsonl line {}: {e}",
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn run_exponent(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
    resume: bool,
) -> Result<u8> {
    let replicas = experiments::validate(cfg).map_err(map_experiment_err)?;
    let coords = experiments::task_coords(cfg);
    let mut keys = Vec::new();
    for &(n, tau) in &coords {
        for rep in 0..replicas as u64 {
            keys.push((n, tau, rep));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_err("create out dir", e))?;
    let manifest_path = out_dir.join("manifest.json");
    let rows_path = out_dir.join("rows.jsonl");
    let hash = config_hash(cfg);

    let mut done: HashMap<(u64, u64, u64), TaskRecord> = HashMap::new();
    if resume {
        if !manifest_path.exists() {
            return Err(CliError::Resource(
                "--resume: no manifest.json in the output directory".into(),
            ));
        }
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| io_err("manifest.json", e))?;
        let old: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Resource(format!("manifest.json: {e}")))?;
        if old.config_hash != hash || old.master_seed != cfg.master_seed {
            return Err(CliError::Resource(
                "--resume manifest conflicts with the requested flags (config hash mismatch)"
                    .into(),
            ));
        }
        for r in load_ledger(&rows_path)? {
            done.insert(task_key(&r), r);
        }
        // rewrite the ledger in canonical order in case a torn line was cut
        let mut text = String::new();
        for &(n, tau, rep) in &keys {
            if let Some(r) = done.get(&(n, tau.to_bits(), rep)) {
                text.push_str(&serde_json::to_string(r).unwrap());
                text.push('\n');
            }
        }
        std::fs::write(&rows_path, text).map_err(|e| io_err("rows.jsonl", e))?;
    } else {
        if manifest_path.exists() {
            let text =
                std::fs::read_to_string(&manifest_path).map_err(|e| io_err("manifest.json", e))?;
            if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
                if old.finished_unix.is_none() {
                    return Err(CliError::Resource(
                        "output directory holds an unfinished run; pass --resume or use a fresh --out"
                            .into(),
                    ));
                }
            }
        }
        let _ = std::fs::remove_file(&rows_path);
    }

    let manifest = Manifest {
        config_hash: hash.clone(),
        master_seed: cfg.master_seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        started_unix: now_unix(),
        finished_unix: None,
        tasks_total: keys.len(),
        tasks_done: done.len(),
        config: serde_json::to_value(cfg).unwrap(),
    };
    write_atomic(&manifest_path, &serde_json::to_string_pretty(&manifest).unwrap())?;

    let mut ledger = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&rows_path)
        .map_err(|e| io_err("rows.jsonl", e))?;
    let pending: Vec<(u64, f64, u64)> = keys
        .iter()
        .filter(|&&(n, tau, rep)| !done.contains_key(&(n, tau.to_bits(), rep)))
        .copied()
        .collect();
    let chunk_size = (pool.current_num_threads() * 8).max(16);
    for chunk in pending.chunks(chunk_size) {
        let results: std::result::Result<Vec<TaskRecord>, _> = pool.install(|| {
            use rayon::prelude::*;
            chunk
                .par_iter()
                .map(|&(n, tau, rep)| {
                    experiments::simulate_task(cfg, n, tau, rep).map(|values| TaskRecord {
                        n,
                        tau,
                        replica: rep,
                        values,
                    })
                })
                .collect()
        });
        let results = results.map_err(map_experiment_err)?;
        let mut buf = String::new();
        for r in results {
            buf.push_str(&serde_json::to_string(&r).unwrap());
            buf.push('\n');
            done.insert(task_key(&r), r);
        }
        ledger.write_all(buf.as_bytes()).map_err(|e| io_err("rows.jsonl", e))?;
        ledger.flush().map_err(|e| io_err("rows.jsonl", e))?;
    }
    drop(ledger);

    let tasks: Vec<TaskRecord> = keys
        .iter()
        .map(|&(n, tau, rep)| {
            done.get(&(n, tau.to_bits(), rep)).cloned().ok_or_else(|| {
                CliError::Resource(format!("task (n={n}, tau={tau}, rep={rep}) missing after run"))
            })
        })
        .collect::<Result<_>>()?;
    let report = pool
        .install(|| experiments::summarize(cfg, replicas, tasks))
        .map_err(map_experiment_err)?;

    let mut csv = String::from("kind,alpha,beta0,tau,n,replicas,delta,statistic,value,se\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.kind, r.alpha, r.beta0, r.tau, r.n, r.replicas, r.delta, r.statistic, r.value, r.se
        ));
    }
    write_atomic(&out_dir.join("rows.csv"), &csv)?;
    write_atomic(
        &out_dir.join("fits.json"),
        &serde_json::to_string_pretty(&report.fits).unwrap(),
    )?;
    write_atomic(
        &out_dir.join("summary.json"),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;
    let manifest = Manifest {
        finished_unix: Some(now_unix()),
        tasks_done: keys.len(),
        ..manifest
    };
    write_atomic(&manifest_path, &serde_json::to_string_pretty(&manifest).unwrap())?;
    println!("{}", serde_json::to_string(&report.fits).unwrap());
    Ok(EXIT_OK)
}

fn map_experiment_err(e: experiments::ExperimentError) -> CliError {
    use experiments::ExperimentError as E;
    match e {
        E::Env(polymer_core::environment::EnvError::Budget { .. }) => {
            CliError::Resource(e.to_string())
        }
        _ => CliError::Config(e.to_string()),
    }
}

pub fn write_simulate(
    out_dir: &Path,
    rows: &[String],
    summary: &impl serde::Serialize,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err("create out dir", e))?;
    let mut text = String::new();
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(out_dir.join("rows.jsonl"), text).map_err(|e| io_err("rows.jsonl", e))?;
    write_atomic(
        &out_dir.join("summary.json"),
        &serde_json::to_string_pretty(summary).unwrap(),
    )
}

pub fn write_lines(out_dir: &Path, name: &str, lines: &[String]) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err("create out dir", e))?;
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(out_dir.join(name), text).map_err(|e| io_err(name, e))
}
