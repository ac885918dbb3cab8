//! Batch front end: reads a run configuration, executes one command and
//! writes its table, report and plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

pub use commands::Outcome;
pub use config::RunConfig;
pub use error::CliError;

pub const OUT_DIR_ENV: &str = "PLAPLAB_OUT_DIR";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "plaplab",
    version,
    about = "Experiments on the critical p-Laplace equation"
)]
pub struct Args {
    /// JSON run configuration.
    pub config: PathBuf,
    /// Override a config entry, e.g. `--set quad.rel_tol=1e-10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; wins over the config and the environment.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub config: RunConfig,
    pub outcome: Outcome,
    pub written: Vec<PathBuf>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.outcome.passed()
    }

    pub fn line(&self) -> String {
        let checks = &self.outcome.checks;
        let ok = checks.iter().filter(|c| c.pass).count();
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{verdict} {}: {ok}/{} checks",
            self.config.command.name(),
            checks.len()
        );
        if !failed.is_empty() {
            line.push_str(&format!(" (failed: {})", failed.join("; ")));
        }
        line
    }
}

fn out_dir(args: &Args, cfg: &RunConfig) -> PathBuf {
    args.out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("plaplab-out"))
}

/// Every artifact as (file name, bytes).
pub fn render(
    cfg: &RunConfig,
    overrides: &[String],
    outcome: &Outcome,
) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    let name = cfg.command.name();
    let report = json!({
        "header": {
            "command": name,
            "overrides": overrides,
            "quad_id": cfg.quad.id(),
            "passed": outcome.passed(),
        },
        "config_echo": cfg,
        "records": outcome.records,
        "slopes": outcome.slopes,
        "checks": outcome.checks,
    });
    let mut report_bytes =
        serde_json::to_vec_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
    report_bytes.push(b'\n');
    let mut files = vec![
        (format!("{name}.csv"), outcome.table.to_csv()?),
        (format!("{name}.json"), report_bytes),
    ];
    for (stem, svg) in &outcome.plots {
        files.push((format!("{stem}.svg"), svg.clone().into_bytes()));
    }
    Ok(files)
}

/// Write all files or none: everything goes to temporary names first and
/// is renamed only once every write has succeeded.
fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let staged: Vec<(PathBuf, PathBuf)> = files
        .iter()
        .map(|(name, _)| (dir.join(format!(".{name}.tmp")), dir.join(name)))
        .collect();
    let cleanup = || {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for ((tmp, _), (_, bytes)) in staged.iter().zip(files) {
        if let Err(e) = fs::write(tmp, bytes) {
            cleanup();
            return Err(CliError::io(tmp, e));
        }
    }
    for (tmp, fin) in &staged {
        if let Err(e) = fs::rename(tmp, fin) {
            cleanup();
            return Err(CliError::io(fin, e));
        }
    }
    Ok(staged.into_iter().map(|(_, f)| f).collect())
}

pub fn run(args: &Args) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let cfg = config::load(&text, &args.overrides)?;
    for o in &args.overrides {
        log::info!("override {o}");
    }
    let outcome = commands::execute(&cfg)?;
    let files = render(&cfg, &args.overrides, &outcome)?;
    let written = write_all(&out_dir(args, &cfg), &files)?;
    Ok(RunSummary {
        config: cfg,
        outcome,
        written,
    })
}
