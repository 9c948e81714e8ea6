//! Result files. Every float is written with 17 significant digits and
//! nothing time- or host-dependent goes into a file, so reruns are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{fmt17, FracReport, KStudyRow, LedgerRow, SignoriniReport};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::mms::MmsReport;
use crate::models::{System, Trajectory};
use crate::scenario::ModelKind;

/// Marker left in an output directory whose command failed.
pub const INCOMPLETE: &str = "INCOMPLETE";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn ledger_csv(rows: &[LedgerRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 300);
    s.push_str(LedgerRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

fn component_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::ReissnerMindlin => &["u", "phi1", "phi2"],
        ModelKind::FullVonKarman => &["u", "uvec1", "uvec2"],
        _ => &["u"],
    }
}

/// Writes `ledger.csv`, `times.csv` and one interior-node CSV per recorded
/// snapshot and component under `snapshots/`. Returns the written paths.
pub fn write_run(dir: &Path, sys: &System, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join("ledger.csv");
    write_file(&p, &ledger_csv(&traj.ledger))?;
    written.push(p);

    let mut times = String::from("snapshot,step,t\n");
    for (i, &n) in traj.snapshots.iter().enumerate() {
        times.push_str(&format!("{i},{n},{}\n", fmt17(traj.times[n])));
        for (c, name) in component_names(sys.kind).iter().enumerate() {
            let f = Field::from_vec(sys.grid, sys.component(&traj.states[n], c))?;
            let p = dir.join("snapshots").join(format!("{name}_{n:07}.csv"));
            write_file(&p, &f.to_csv())?;
            written.push(p);
        }
    }
    let p = dir.join("snapshots.csv");
    write_file(&p, &times)?;
    written.push(p);
    Ok(written)
}

pub fn k_study_csv(rows: &[KStudyRow]) -> String {
    let mut s = String::from(KStudyRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

pub fn write_k_study(dir: &Path, rows: &[KStudyRow]) -> Result<PathBuf> {
    let p = dir.join("k_study.csv");
    write_file(&p, &k_study_csv(rows))?;
    Ok(p)
}

pub fn write_gamma_study(dir: &Path, report: &SignoriniReport) -> Result<PathBuf> {
    let p = dir.join("gamma_study.csv");
    write_file(&p, &report.csv())?;
    let r = dir.join("gamma_refinement.csv");
    write_file(&r, &format!("k,refinement_error\n{},{}\n", report.k, report.refinement_error.map(fmt17).unwrap_or_default()))?;
    Ok(p)
}

pub fn write_mms(dir: &Path, report: &MmsReport) -> Result<PathBuf> {
    write_file(&dir.join("mms_levels.csv"), &report.csv())?;
    let p = dir.join("orders.csv");
    write_file(&p, &report.orders_csv())?;
    Ok(p)
}

pub fn write_frac(dir: &Path, r: &FracReport) -> Result<PathBuf> {
    let p = dir.join("frac_norms.csv");
    write_file(&p, &format!("alpha,deflection,airy\n{},{},{}\n", fmt17(r.alpha), fmt17(r.deflection), r.airy.map(fmt17).unwrap_or_default()))?;
    Ok(p)
}
