//! `quasikdv`: batch front-end for the experiments.
//!
//! Every run writes its artifacts and a `manifest.json` into the output
//! directory. Exit codes: 0 all checks passed, 1 module error, 2 invalid
//! arguments or configuration, 3 a check failed.

mod args;
mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Deserialize;
use serde_json::{json, Value};

use args::{Cli, Command};
use manifest::{error_record, to_json_string, Recorder};

const DEFAULT_OUTPUT_DIR: &str = "quasikdv-out";

/// The `--config` file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    command: Option<String>,
    #[serde(default)]
    parameters: Value,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
}

struct Resolved {
    command: Option<Command>,
    output_dir: PathBuf,
    seed: u64,
}

impl Resolved {
    /// What the config hash covers: command, resolved parameters and seed.
    fn echo(&self) -> Value {
        json!({
            "command": self.command.as_ref().map(Command::name),
            "parameters": self.command.as_ref().map_or(json!({}), Command::parameters),
            "seed": self.seed,
        })
    }
}

fn resolve(cli: Cli) -> Result<Resolved, String> {
    let (command, file_dir, file_seed) = match &cli.config {
        Some(path) => {
            if cli.command.is_some() {
                return Err("give either a subcommand or --config, not both".into());
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
            let command = match cfg.command {
                Some(name) => Some(Command::from_config(&name, cfg.parameters)?),
                None if cfg.parameters.is_null() => None,
                None => return Err("parameters given without a command".into()),
            };
            (command, cfg.output_dir, cfg.seed)
        }
        None => (cli.command, None, None),
    };
    Ok(Resolved {
        command,
        output_dir: cli
            .output_dir
            .or(file_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        seed: cli.seed.or(file_seed).unwrap_or(0),
    })
}

fn fail(record: Value) {
    eprint!("{}", to_json_string(&json!({ "error": record })));
}

fn write_manifest(dir: &Path, manifest: &Value) -> std::io::Result<()> {
    std::fs::write(dir.join("manifest.json"), to_json_string(manifest))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            fail(error_record("InvalidArguments", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    let threads = cli.threads;
    let resolved = match resolve(cli) {
        Ok(r) => r,
        Err(msg) => {
            fail(error_record("InvalidConfig", &msg));
            return ExitCode::from(2);
        }
    };
    let dir = resolved.output_dir.clone();
    if let Err(e) = std::fs::create_dir_all(&dir) {
        fail(error_record(
            "InvalidConfig",
            &format!("cannot create {}: {e}", dir.display()),
        ));
        return ExitCode::from(2);
    }
    let echo = resolved.echo();
    let mut rec = Recorder::new(&dir);

    let job = match resolved
        .command
        .as_ref()
        .map(|c| commands::plan(c, resolved.seed))
        .transpose()
    {
        Ok(job) => job,
        Err(e) => {
            let record = error_record(e.kind(), &e.to_string());
            let m = manifest::manifest(
                &echo,
                threads,
                &rec,
                Some(record.clone()),
                start.elapsed().as_secs_f64(),
            );
            let _ = write_manifest(&dir, &m);
            fail(record);
            return ExitCode::from(2);
        }
    };

    let outcome = match &job {
        None => {
            eprintln!("no command given: wrote an empty manifest (see --help)");
            Ok(())
        }
        Some(job) if threads > 0 => quasikdv::exec::with_workers(threads, || job.run(&mut rec)),
        Some(job) => job.run(&mut rec),
    };
    let error = outcome
        .err()
        .map(|e| error_record(e.kind(), &e.to_string()));
    let m = manifest::manifest(
        &echo,
        threads,
        &rec,
        error.clone(),
        start.elapsed().as_secs_f64(),
    );
    if let Err(e) = write_manifest(&dir, &m) {
        fail(error_record("Io", &format!("cannot write manifest: {e}")));
        return ExitCode::FAILURE;
    }
    if let Some(record) = error {
        fail(record);
        return ExitCode::FAILURE;
    }
    let status = m["status"].as_str().unwrap_or("fail");
    println!("{status}: {}", dir.join("manifest.json").display());
    if status == "pass" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}
