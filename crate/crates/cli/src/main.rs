//! `plate-interpen <subcommand> <scenario.toml> [--out DIR] [--set key=value]...`

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plate_interpen::diagnostics::{frac_report, gamma_study, k_study};
use plate_interpen::error::{Error, Result};
use plate_interpen::io;
use plate_interpen::mms::mms_sweep;
use plate_interpen::models::run_with_system;
use plate_interpen::scenario::{parse_override, parse_scenario, Scenario};

#[derive(Parser, Debug)]
#[command(name = "plate-interpen", version, about = "Dynamic plate contact with limited interpenetration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a scenario entry, e.g. `--set contact.k=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Advance the scenario to its final time and write the ledger and snapshots.
    Run(Common),
    /// Rerun for each cap index in `study.k_list`.
    KStudy(Common),
    /// Rerun for each barrier depth in `study.gamma_list`.
    GammaStudy(Common),
    /// Manufactured-solution convergence sweep.
    Mms(Common),
    /// Parse and validate only.
    Validate(Common),
}

fn load(c: &Common) -> Result<Scenario> {
    let overrides = c.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    parse_scenario(&c.scenario, &overrides)
}

fn study_of(s: &Scenario) -> Result<&plate_interpen::scenario::StudySpec> {
    s.study.as_ref().ok_or_else(|| Error::Invalid { invariant: "study section present", message: "the scenario has no [study] table".into() })
}

fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Validate(c) => {
            load(c)?;
            Ok(format!("ok {}", c.scenario.display()))
        }
        Command::Run(c) => {
            let s = load(c)?;
            let (sys, traj) = run_with_system(&s)?;
            let files = io::write_run(&c.out, &sys, &traj)?;
            if let Some(k) = &s.model.memory {
                io::write_frac(&c.out, &frac_report(&sys, &traj, k.alpha)?)?;
            }
            Ok(format!("run: {} steps, {} files in {}", traj.steps(), files.len(), c.out.display()))
        }
        Command::KStudy(c) => {
            let s = load(c)?;
            let st = study_of(&s)?;
            if st.k_list.is_empty() {
                return Err(Error::Invalid { invariant: "k_list non-empty", message: "study.k_list is empty".into() });
            }
            let rows = k_study(&s, &st.k_list)?;
            let p = io::write_k_study(&c.out, &rows)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            Ok(format!("k-study: {} rows ({failed} failed) in {}", rows.len(), p.display()))
        }
        Command::GammaStudy(c) => {
            let s = load(c)?;
            let st = study_of(&s)?;
            let report = gamma_study(&s, &st.gamma_list, st.gamma_k)?;
            let p = io::write_gamma_study(&c.out, &report)?;
            Ok(format!("gamma-study: {} rows in {}", report.rows.len(), p.display()))
        }
        Command::Mms(c) => {
            let s = load(c)?;
            let report = mms_sweep(&s)?;
            let p = io::write_mms(&c.out, &report)?;
            Ok(format!(
                "mms: spatial orders {:?}, temporal orders {:?}, written to {}",
                report.spatial_orders,
                report.temporal_orders,
                p.display()
            ))
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Run(c) | Command::KStudy(c) | Command::GammaStudy(c) | Command::Mms(c) | Command::Validate(c) => c,
    }
}

fn error_line(e: &Error) -> String {
    format!("error kind={} message={:?}", e.kind(), e.to_string())
}

fn mark_incomplete(out: &Path, line: &str) {
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(out.join(io::INCOMPLETE), format!("{line}\n"));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let writes = !matches!(cli.command, Command::Validate(_));
    let out = common(&cli.command).out.clone();
    match execute(&cli.command) {
        Ok(msg) => {
            if writes {
                let _ = std::fs::remove_file(out.join(io::INCOMPLETE));
            }
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = error_line(&e);
            if writes {
                mark_incomplete(&out, &line);
            }
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
