//! The batch subcommands.
//!
//! `run` writes into its output directory:
//!
//! | file | content |
//! |---|---|
//! | `config.toml` | the effective config, overrides applied |
//! | `metrics.csv` | one row per evaluation point |
//! | `summaries.csv` | one row per episode |
//! | `aggregate.csv` | mean and standard error per (policy, round) |
//! | `records.jsonl` | every interaction record, tagged with its episode |
//! | `failures.json` | episodes aborted by a numerical error |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use isgp::experiment::report::{
    emit_report, read_metrics_path, write_aggregate, write_metrics, write_summaries, METRICS_FILE,
};
use isgp::experiment::{
    aggregate, generate_synthetic, run_experiment_in, DataSource, ExperimentConfig, ExperimentOutcome,
};
use isgp::{InteractionRecord, PolicyKind};
use serde::Serialize;

use crate::{GenerateArgs, Overrides, ReportArgs, RunArgs};

pub const SUMMARIES_FILE: &str = "summaries.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const FAILURES_FILE: &str = "failures.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Loads the config (or defaults) and applies command-line overrides.
pub fn load_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(p) = &o.policies {
        cfg.policies = p.clone();
    }
    if let Some(eta) = o.eta {
        cfg.eta = eta;
    }
    if let Some(ordering) = o.ordering {
        cfg.ordering = ordering;
    }
    if let Some(folds) = o.folds {
        cfg.folds = folds;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let cfg = load_config(&args.overrides)?;
    let DataSource::Synthetic(mut spec) = cfg.data else {
        anyhow::bail!("generate needs a synthetic data source");
    };
    if let Some(seed) = args.overrides.seed {
        spec.seed = seed;
    }
    let data = generate_synthetic(&spec)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let file = File::create(&args.out).with_context(|| args.out.display().to_string())?;
    data.write_csv(BufWriter::new(file))?;
    log::info!("wrote {} points to {}", data.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TaggedRecord<'a> {
    seed: u64,
    fold: usize,
    policy: PolicyKind,
    #[serde(flatten)]
    record: &'a InteractionRecord,
}

pub fn run(args: &RunArgs) -> Result<ExperimentOutcome> {
    let cfg = load_config(&args.overrides)?;
    let base = args.overrides.config.as_deref().and_then(Path::parent);
    let outcome = run_experiment_in(&cfg, base)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = out.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| path.display().to_string())?,
        ))
    };

    fs::write(out.join(CONFIG_FILE), cfg.to_toml_string())?;
    write_metrics(create(METRICS_FILE)?, &outcome.rows)?;
    let summaries: Vec<_> = outcome.summaries().cloned().collect();
    write_summaries(create(SUMMARIES_FILE)?, &summaries)?;
    write_aggregate(create(AGGREGATE_FILE)?, &aggregate(&outcome.rows))?;
    let mut records = create(RECORDS_FILE)?;
    for ep in &outcome.episodes {
        for record in &ep.records {
            let tagged = TaggedRecord {
                seed: ep.key.seed,
                fold: ep.key.fold,
                policy: ep.key.policy,
                record,
            };
            serde_json::to_writer(&mut records, &tagged)?;
            records.write_all(b"\n")?;
        }
    }
    records.flush()?;
    let mut failures = create(FAILURES_FILE)?;
    serde_json::to_writer_pretty(&mut failures, &outcome.failures)?;
    failures.flush()?;

    log::info!(
        "{} episodes ({} failed), {} metric rows written to {}",
        outcome.episodes.len() + outcome.failures.len(),
        outcome.failures.len(),
        outcome.rows.len(),
        out.display()
    );
    Ok(outcome)
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let rows = read_metrics_path(&args.results.join(METRICS_FILE))?;
    let out = args.out.as_deref().unwrap_or(&args.results);
    let title = match ExperimentConfig::from_path(&args.results.join(CONFIG_FILE)) {
        Ok(cfg) => format!("η = {}, {}", cfg.eta, cfg.ordering),
        Err(_) => args.results.display().to_string(),
    };
    let files = emit_report(&rows, out, &title)?;
    let path = out.join(AGGREGATE_FILE);
    write_aggregate(BufWriter::new(File::create(&path)?), &aggregate(&rows))?;
    for f in files.figures {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}
