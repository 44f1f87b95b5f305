//! Flat key-value experiment configuration with typed sections.
//!
//! ```text
//! [scenario]
//! name = outage-vs-rate
//! seeds = 1,2,3
//! output_dir = out/demo
//!
//! [network]
//! users = 3
//! tx_antennas = 2
//! rx_antennas = 2
//! streams = 1
//! rho_tx = 0.0
//! rho_rx = 0.0
//!
//! [sweep]
//! rate = 0.25:5.0:20          # min:max:count, or a comma list
//! kch_db = 10,20,30,inf
//! gamma_db = 15
//! epsilon = 0.1
//!
//! [run]
//! designer = iia              # iia | max-sinr | proposed
//! trials = 100000
//! ```
//!
//! `kch_db` and `gamma_db` are decibel values converted once at parse
//! time; `inf` selects the error-free (perfect CSI) branch.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Designer {
    Iia,
    MaxSinr,
    Proposed,
}

impl Designer {
    pub fn name(self) -> &'static str {
        match self {
            Designer::Iia => "iia",
            Designer::MaxSinr => "max-sinr",
            Designer::Proposed => "proposed",
        }
    }

    pub fn parse(s: &str) -> Option<Designer> {
        match s {
            "iia" => Some(Designer::Iia),
            "max-sinr" => Some(Designer::MaxSinr),
            "proposed" => Some(Designer::Proposed),
            _ => None,
        }
    }
}

/// Channel K factor axis value: finite dB or perfect CSI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KFactorPoint {
    Db(f64),
    Perfect,
}

impl KFactorPoint {
    pub fn label(&self) -> String {
        match self {
            KFactorPoint::Db(db) => format!("{db}"),
            KFactorPoint::Perfect => "inf".to_string(),
        }
    }

    /// CSI error variance under the estimate normalization (identity or
    /// trace-preserving correlations): `sigma_h^2 = 1/K_ch`.
    pub fn csi_error_var(&self) -> f64 {
        match self {
            KFactorPoint::Db(db) => 10f64.powf(-db / 10.0),
            KFactorPoint::Perfect => 0.0,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub streams: usize,
    pub rho_tx: f64,
    pub rho_rx: f64,
    pub rate_grid: Vec<f64>,
    pub kch_points: Vec<KFactorPoint>,
    pub gamma_db: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub designer: Designer,
    pub trials: u64,
    /// 0 selects the automatically scaled adaptive truncation.
    pub series_max_terms: usize,
    pub series_target: f64,
}

struct Raw {
    entries: BTreeMap<String, String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                err(
                    &format!("line {}", lineno + 1),
                    format!("expected `key = value`, got {line:?}"),
                )
            })?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            entries.insert(full, value.trim().to_string());
        }
        Ok(Raw { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<String, ConfigError> {
        self.take(key).ok_or_else(|| err(key, "missing"))
    }

    fn parse_as<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| err(key, format!("{e}"))),
        }
    }
}

fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
    let text = text.trim();
    if let Some((rest, count)) = text.rsplit_once(':') {
        if let Some((lo, hi)) = rest.split_once(':') {
            let lo: f64 = lo.trim().parse().map_err(|e| err(key, format!("{e}")))?;
            let hi: f64 = hi.trim().parse().map_err(|e| err(key, format!("{e}")))?;
            let n: usize = count.trim().parse().map_err(|e| err(key, format!("{e}")))?;
            if n < 2 || hi <= lo {
                return Err(err(key, "range grid needs hi > lo and count >= 2"));
            }
            return Ok((0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect());
        }
    }
    let values: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    values.map_err(|e| err(key, format!("{e}")))
}

fn check_grid(key: &str, grid: &[f64]) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(err(key, "grid must be nonempty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(err(key, "grid must be strictly increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut raw = Raw::parse(text)?;
        let name = raw.required("scenario.name")?;
        let seeds_text = raw.take("scenario.seeds").unwrap_or_else(|| "1".into());
        let seeds: Result<Vec<u64>, _> = seeds_text
            .split(',')
            .map(|t| t.trim().parse::<u64>())
            .collect();
        let seeds = seeds.map_err(|e| err("scenario.seeds", format!("{e}")))?;
        if seeds.is_empty() {
            return Err(err("scenario.seeds", "need at least one seed"));
        }
        let output_dir = raw.required("scenario.output_dir")?;

        let users = raw.parse_as("network.users", 3usize)?;
        let tx_antennas = raw.parse_as("network.tx_antennas", 2usize)?;
        let rx_antennas = raw.parse_as("network.rx_antennas", 2usize)?;
        let streams = raw.parse_as("network.streams", 1usize)?;
        let rho_tx = raw.parse_as("network.rho_tx", 0.0f64)?;
        let rho_rx = raw.parse_as("network.rho_rx", 0.0f64)?;
        for (key, rho) in [("network.rho_tx", rho_tx), ("network.rho_rx", rho_rx)] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(err(key, "correlation strength must be in [0, 1]"));
            }
        }

        let rate_grid = match raw.take("sweep.rate") {
            Some(text) => parse_grid("sweep.rate", &text)?,
            None => (1..=20).map(|i| 0.25 * i as f64).collect(),
        };
        check_grid("sweep.rate", &rate_grid)?;

        let kch_text = raw.take("sweep.kch_db").unwrap_or_else(|| "20".into());
        let mut kch_points = Vec::new();
        for tok in kch_text.split(',') {
            let tok = tok.trim();
            if tok.eq_ignore_ascii_case("inf") {
                kch_points.push(KFactorPoint::Perfect);
            } else {
                let db: f64 = tok
                    .parse()
                    .map_err(|e| err("sweep.kch_db", format!("{e}")))?;
                kch_points.push(KFactorPoint::Db(db));
            }
        }
        if kch_points.is_empty() {
            return Err(err("sweep.kch_db", "grid must be nonempty"));
        }

        let gamma_text = raw.take("sweep.gamma_db").unwrap_or_else(|| "15".into());
        let gamma_db: Result<Vec<f64>, _> =
            gamma_text.split(',').map(|t| t.trim().parse()).collect();
        let gamma_db = gamma_db.map_err(|e| err("sweep.gamma_db", format!("{e}")))?;
        check_grid("sweep.gamma_db", &gamma_db)?;

        let eps_text = raw.take("sweep.epsilon").unwrap_or_else(|| "0.1".into());
        let epsilon: Result<Vec<f64>, _> = eps_text.split(',').map(|t| t.trim().parse()).collect();
        let epsilon = epsilon.map_err(|e| err("sweep.epsilon", format!("{e}")))?;
        for &e in &epsilon {
            if !(0.0 < e && e < 1.0) {
                return Err(err("sweep.epsilon", "outage budget must be in (0, 1)"));
            }
        }

        let designer_text = raw.take("run.designer").unwrap_or_else(|| "iia".into());
        let designer = Designer::parse(&designer_text)
            .ok_or_else(|| err("run.designer", "expected iia | max-sinr | proposed"))?;
        let trials = raw.parse_as("run.trials", 100_000u64)?;
        let series_max_terms = raw.parse_as("run.series_max_terms", 0usize)?;
        let series_target = raw.parse_as("run.series_target", 1e-8f64)?;

        if let Some((key, _)) = raw.entries.iter().next() {
            return Err(err(key, "unknown key"));
        }

        Ok(ExperimentConfig {
            name,
            seeds,
            output_dir,
            users,
            tx_antennas,
            rx_antennas,
            streams,
            rho_tx,
            rho_rx,
            rate_grid,
            kch_points,
            gamma_db,
            epsilon,
            designer,
            trials,
            series_max_terms,
            series_target,
        })
    }
}
