//! Result rows, the summary ledger, and the run manifest.
//!
//! `results.csv` has one fixed header shared by every scenario; fields
//! that do not apply stay empty. Bodies are byte-identical across reruns
//! with the same config and seeds; anything time-dependent goes to the
//! manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str =
    "scenario,seed,designer,kch_db,gamma_db,rho,epsilon,rate,quantity,value,mc_value,mc_se,terms_used";

/// One scheduled measurement.
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub scenario: String,
    pub seed: String,
    pub designer: String,
    pub kch_db: String,
    pub gamma_db: String,
    pub rho: String,
    pub epsilon: String,
    pub rate: Option<f64>,
    pub quantity: String,
    pub value: Option<f64>,
    pub mc_value: Option<f64>,
    pub mc_se: Option<f64>,
    pub terms_used: Option<usize>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.seed,
            self.designer,
            self.kch_db,
            self.gamma_db,
            self.rho,
            self.epsilon,
            fmt_opt(self.rate),
            self.quantity,
            fmt_opt(self.value),
            fmt_opt(self.mc_value),
            fmt_opt(self.mc_se),
            self.terms_used.map(|t| t.to_string()).unwrap_or_default(),
        )
    }
}

/// Incremental CSV writer; rows are flushed as they are produced so an
/// interrupted run still leaves the completed prefix on disk.
pub struct ResultWriter {
    out: BufWriter<File>,
    pub rows_written: usize,
    path: PathBuf,
}

impl ResultWriter {
    pub fn create(dir: &Path) -> std::io::Result<ResultWriter> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("results.csv");
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(ResultWriter {
            out,
            rows_written: 0,
            path,
        })
    }

    pub fn write(&mut self, row: &Row) -> std::io::Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.out.flush()?;
        self.rows_written += 1;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// One named pass/fail verdict embedded in a scenario.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Scenario outcome: emitted rows plus the embedded checks.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    pub rows_written: usize,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn write_summary(dir: &Path, checks: &[Check]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(dir.join("summary.txt"))?);
    for check in checks {
        writeln!(
            out,
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        )?;
    }
    let overall = checks.iter().all(|c| c.passed);
    writeln!(out, "overall: {}", if overall { "PASS" } else { "FAIL" })?;
    out.flush()
}

/// FNV-1a over the config text, recorded so a result directory can be
/// matched back to the exact configuration that produced it.
pub fn config_hash(text: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in text.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn write_manifest(
    dir: &Path,
    scenario: &str,
    cfg_hash: u64,
    seeds: &[u64],
    wall_time_ms: u128,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(dir.join("manifest.txt"))?);
    writeln!(out, "scenario: {scenario}")?;
    writeln!(out, "config_hash: {cfg_hash:016x}")?;
    writeln!(
        out,
        "seeds: {}",
        seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    )?;
    writeln!(out, "tool_version: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "wall_time_ms: {wall_time_ms}")?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(out, "unix_time: {stamp}")?;
    out.flush()
}
