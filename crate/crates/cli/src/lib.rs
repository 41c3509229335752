//! Runner for the verification experiments: configuration, orchestration
//! and result files.
//!
//! A run writes three kinds of file into the output directory:
//! `results.json` (versioned, sorted keys, 15 significant digits),
//! two-column CSV tables for plotting, and a plain-text `run.log`.

pub mod config;
pub mod error;
pub mod output;
pub mod suite;
pub mod tasks;

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};
use crate::error::{CliError, EXIT_FAILED, EXIT_OK};
use crate::output::{round_json, to_json, TaskOutcome, SCHEMA_VERSION};
use crate::suite::SuiteTask;
use crate::tasks::*;

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub document: Value,
    pub exit_code: i32,
    pub log: Vec<String>,
}

/// Runs one configured command, writes its files and returns the report.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let (outcome, mut log) = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Compute(format!("cannot start thread pool: {e}")))?
            .install(|| execute(cfg))?,
        None => execute(cfg)?,
    };
    let passed = outcome.passed();
    let document = round_json(json!({
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "tolerance_scale": cfg.tolerance_scale,
        "parameters": serde_json::to_value(cfg.params.values())?,
        "results": outcome.results,
        "assertions": to_json(&outcome.assertions)?,
        "failed": outcome.failed(),
        "passed": passed,
    }));

    for a in &outcome.assertions {
        let status = if a.passed { "ok  " } else { "FAIL" };
        log.push(format!(
            "{status} {}: {:e} {} {:e}",
            a.name, a.value, a.relation, a.limit
        ));
    }
    log.push(format!(
        "{}: {} of {} checks passed",
        cfg.command.name(),
        outcome.assertions.iter().filter(|a| a.passed).count(),
        outcome.assertions.len()
    ));

    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out, &document)?;
    for t in &outcome.tables {
        t.write(&cfg.out)?;
    }
    fs::write(cfg.out.join("run.log"), log.join("\n") + "\n")?;
    Ok(RunReport {
        document,
        exit_code: if passed { EXIT_OK } else { EXIT_FAILED },
        log,
    })
}

fn execute(cfg: &ExperimentConfig) -> Result<(TaskOutcome, Vec<String>), CliError> {
    let ctx = Context {
        seed: cfg.seed,
        tolerance_scale: cfg.tolerance_scale,
    };
    let p = &cfg.params;
    let mut log = vec![format!(
        "command {} seed {} tolerance_scale {}",
        cfg.command.name(),
        cfg.seed,
        cfg.tolerance_scale
    )];
    let outcome = match cfg.command {
        Command::Spectrum => SpectrumTask::from_params(p)?.run(&ctx)?,
        Command::Ward => WardTask::from_params(p)?.run(&ctx)?,
        Command::Threshold => ThresholdTask::from_params(p)?.run(&ctx)?,
        Command::Energy => EnergyTask::from_params(p)?.run(&ctx)?,
        Command::Residual => ResidualTask::from_params(p)?.run(&ctx)?,
        Command::Bounds => BoundsTask::from_params(p)?.run(&ctx)?,
        Command::Laplacian => LaplacianTask::from_params(p)?.run(&ctx)?,
        Command::Ode => OdeTask::from_params(p)?.run(&ctx)?,
        Command::Flow => FlowTask::from_params(p)?.run(&ctx)?,
        Command::Suite => {
            let reports = SuiteTask::from_params(p)?.reports(&ctx);
            log.extend(reports.iter().map(|r| r.line()));
            suite::merge(&reports)
        }
    };
    Ok((outcome, log))
}

fn write_json(dir: &Path, doc: &Value) -> Result<(), CliError> {
    fs::write(dir.join("results.json"), serde_json::to_string_pretty(doc)? + "\n")?;
    Ok(())
}

/// Best-effort `results.json` for a run that stopped with an error.
pub fn write_error(dir: &Path, command: Option<Command>, err: &CliError) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.map(|c| c.name()),
        "error": err.to_string(),
        "exit_status": err.exit_code(),
        "passed": false,
    });
    write_json(dir, &doc)?;
    fs::write(dir.join("run.log"), format!("{err}\n"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Overrides, Params};

    fn cfg(command: Command, dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(command);
        c.out = dir.to_path_buf();
        c
    }

    #[test]
    fn threshold_run_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(&cfg(Command::Threshold, dir.path())).unwrap();
        assert_eq!(r.exit_code, EXIT_OK);
        assert_eq!(r.document["schema_version"], 1);
        let text = fs::read_to_string(dir.path().join("results.json")).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert!((doc["results"]["alpha_star"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
        assert!(dir.path().join("run.log").exists());
    }

    #[test]
    fn failing_assertions_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Command::Ward, dir.path());
        c.tolerance_scale = 1e-30;
        c.params = Params::new(Command::Ward, [("points".to_string(), toml::Value::Integer(3))].into()).unwrap();
        let r = run(&c).unwrap();
        assert_eq!(r.exit_code, EXIT_FAILED);
        assert!(!r.document["failed"].as_array().unwrap().is_empty());
        assert_eq!(r.document["passed"], false);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut flags = Overrides {
            command: Some(Command::Bounds),
            threads: Some(1),
            out: Some(a.path().into()),
            ..Default::default()
        };
        flags.params.insert("maps_2d".into(), toml::Value::Integer(4));
        flags.params.insert("maps_4d".into(), toml::Value::Integer(2));
        let one = ExperimentConfig::resolve(None, flags.clone()).unwrap();
        flags.threads = Some(3);
        flags.out = Some(b.path().into());
        let three = ExperimentConfig::resolve(None, flags).unwrap();
        run(&one).unwrap();
        run(&three).unwrap();
        assert_eq!(
            fs::read(a.path().join("results.json")).unwrap(),
            fs::read(b.path().join("results.json")).unwrap()
        );
    }

    #[test]
    fn error_documents() {
        let dir = tempfile::tempdir().unwrap();
        write_error(
            dir.path(),
            Some(Command::Energy),
            &CliError::ResourceCap("too big".into()),
        )
        .unwrap();
        let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
        assert_eq!(doc["exit_status"], 3);
    }
}
