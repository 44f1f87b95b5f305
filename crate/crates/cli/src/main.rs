//! `obeam`: outage analysis and outage-constrained beam design for MIMO
//! interference channels.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use obeam_cli::config::{Designer, ExperimentConfig};
use obeam_cli::error::CliError;
use obeam_cli::rows::{config_hash, write_manifest, write_summary, ResultWriter, Row};
use obeam_cli::scenarios;
use obeam_core::beamdesign::{design_outage_rate, DesignOptions};
use obeam_core::channel::{generate_estimates, stream_covariance_restricted, stream_mean_restricted, threshold_tau};
use obeam_core::matio::write_beam_set;
use obeam_core::outage::{mc_outage, outage_probability, OutageQuery};
use obeam_core::quadform::{standardize, upper_tail_with_trace, SeriesControl, DEFAULT_CLUSTER_TOL};

#[derive(Parser)]
#[command(
    name = "obeam",
    about = "Outage probabilities and outage-constrained beam design for MIMO interference channels",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct NetworkArgs {
    /// Transmitter-receiver pairs (K).
    #[arg(long, default_value_t = 3)]
    users: usize,
    /// Transmit antennas per node.
    #[arg(long, default_value_t = 2)]
    tx_antennas: usize,
    /// Receive antennas per node.
    #[arg(long, default_value_t = 2)]
    rx_antennas: usize,
    /// Streams per user.
    #[arg(long, default_value_t = 1)]
    streams: usize,
    /// Channel K factor in dB (CSI quality); `inf` for perfect CSI.
    #[arg(long, default_value = "20")]
    kch_db: String,
    /// Receive SNR in dB.
    #[arg(long, default_value_t = 15.0)]
    gamma_db: f64,
    /// Exponential antenna correlation strength (both ends).
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
}

impl NetworkArgs {
    fn to_experiment(&self, seed: u64, out: &str) -> Result<ExperimentConfig, CliError> {
        let text = format!(
            "[scenario]\nname = sweep\nseeds = {seed}\noutput_dir = {out}\n\
             [network]\nusers = {}\ntx_antennas = {}\nrx_antennas = {}\nstreams = {}\n\
             rho_tx = {}\nrho_rx = {}\n\
             [sweep]\nkch_db = {}\ngamma_db = {}\n",
            self.users,
            self.tx_antennas,
            self.rx_antennas,
            self.streams,
            self.rho,
            self.rho,
            self.kch_db,
            self.gamma_db,
        );
        Ok(ExperimentConfig::parse(&text)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario described by a config file.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Full-scale run: 10x Monte Carlo trials.
        #[arg(long)]
        full: bool,
    },
    /// Run the generic outage grid (rates x CSI qualities) from a config.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Evaluate one outage query and print the report.
    Outage {
        #[command(flatten)]
        network: NetworkArgs,
        /// Target rate (bits per channel use).
        #[arg(long)]
        rate: f64,
        /// Receiver index.
        #[arg(long, default_value_t = 0)]
        user: usize,
        /// Stream index.
        #[arg(long, default_value_t = 0)]
        stream: usize,
        /// Perfectly-known links (repeatable).
        #[arg(long)]
        known: Vec<usize>,
        /// Beam designer applied before the query.
        #[arg(long, default_value = "iia")]
        designer: String,
        /// Outage budget for the proposed designer.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Channel realization seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Monte Carlo cross-check trials (0 disables).
        #[arg(long, default_value_t = 0)]
        trials: u64,
        /// Dump per-term series magnitudes to a CSV (cluster,n,term).
        #[arg(long)]
        dump_terms: Option<PathBuf>,
    },
    /// Run one designer and dump beams, rates, and the trajectory.
    Design {
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long, default_value = "proposed")]
        designer: String,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out/design")]
        output_dir: PathBuf,
    },
    /// Oracle-equivalence suite: residue series vs Monte Carlo on
    /// randomized instances. Exits 0 only if every instance agrees.
    McValidate {
        #[arg(long, default_value_t = 20)]
        instances: u64,
        #[arg(long, default_value_t = 10)]
        thresholds: usize,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out/mc-validate")]
        output_dir: PathBuf,
    },
    /// Residue series vs Laguerre series fitting on the benchmark form.
    SeriesCompare {
        /// Truncation depths, comma separated.
        #[arg(long, default_value = "5,10,15,20")]
        terms: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out/series-compare")]
        output_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("one or more embedded checks failed (see summary.txt)");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2))
        }
    }
}

fn dispatch() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            full,
        } => {
            let mut text = std::fs::read_to_string(&config)?;
            if full {
                // Full-scale runs multiply the Monte Carlo budget tenfold.
                let exp = ExperimentConfig::parse(&text)?;
                text.push_str(&format!("\n[run]\ntrials = {}\n", exp.trials * 10));
            }
            let outcome = scenarios::run_config_text(&text, output_dir.as_deref())?;
            Ok(outcome.passed())
        }
        Command::Sweep { config, output_dir } => {
            let text = std::fs::read_to_string(&config)?;
            let start = std::time::Instant::now();
            let exp = ExperimentConfig::parse(&text)?;
            let dir = output_dir.unwrap_or_else(|| PathBuf::from(&exp.output_dir));
            let mut writer = ResultWriter::create(&dir)?;
            let outcome = scenarios::outage_vs_rate(&exp, &mut writer, "sweep")?;
            write_summary(&dir, &outcome.checks)?;
            write_manifest(
                &dir,
                "sweep",
                config_hash(&text),
                &exp.seeds,
                start.elapsed().as_millis(),
            )?;
            Ok(outcome.passed())
        }
        Command::Outage {
            network,
            rate,
            user,
            stream,
            known,
            designer,
            epsilon,
            seed,
            trials,
            dump_terms,
        } => {
            let designer = Designer::parse(&designer)
                .ok_or_else(|| CliError::Usage("unknown designer".into()))?;
            let exp = network.to_experiment(seed, "out/outage")?;
            let cfg = scenarios::build_network(&exp, exp.kch_points[0], exp.gamma_db[0])?;
            let h_hat = generate_estimates(&cfg, seed);
            let beams = scenarios::design_beams(designer, &h_hat, &cfg, epsilon, seed)?;
            let q = OutageQuery::new(user, stream, rate).with_known_links(&known);
            let report = outage_probability(&beams, &h_hat, &cfg, &q)?;
            println!("probability: {:.12e}", report.probability);
            println!("tau: {:.12e}", report.tau);
            println!("method: {:?}", report.method);
            println!("terms_used: {}", report.terms_used);
            println!("error_estimate: {:.3e}", report.error_estimate);
            if trials > 0 {
                let mc = mc_outage(&beams, &h_hat, &cfg, &q, trials, seed)?;
                println!("mc_estimate: {:.12e}", mc.estimate);
                println!("mc_std_error: {:.3e}", mc.std_error);
            }
            if let Some(path) = dump_terms {
                let rest: Vec<usize> = (0..cfg.users)
                    .filter(|i| !known.contains(i) && cfg.sigma_h_sq(user, *i) > 0.0)
                    .collect();
                let mu = stream_mean_restricted(&beams, &h_hat, user, stream, &rest);
                let cov = stream_covariance_restricted(&beams, &cfg, user, stream, &rest);
                let tau = threshold_tau(&beams, &h_hat, &cfg, user, stream, rate, &known)?;
                let params = standardize(&mu, &cov, DEFAULT_CLUSTER_TOL)?;
                let ctl = SeriesControl::auto_for(&params);
                let (_, trace) = upper_tail_with_trace(&params, tau, &ctl);
                let mut text = String::from("cluster,n,term\n");
                for t in &trace {
                    text.push_str(&format!("{},{},{:.12e}\n", t.cluster, t.n, t.term));
                }
                std::fs::write(&path, text)?;
                println!("terms dumped to {}", path.display());
            }
            Ok(true)
        }
        Command::Design {
            network,
            designer,
            epsilon,
            seed,
            output_dir,
        } => {
            let start = std::time::Instant::now();
            let designer = Designer::parse(&designer)
                .ok_or_else(|| CliError::Usage("unknown designer".into()))?;
            let exp = network.to_experiment(seed, output_dir.to_str().unwrap_or("out/design"))?;
            let cfg = scenarios::build_network(&exp, exp.kch_points[0], exp.gamma_db[0])?;
            let h_hat = generate_estimates(&cfg, seed);
            let mut writer = ResultWriter::create(&output_dir)?;
            let (beams, rates, trajectory) = match designer {
                Designer::Proposed => {
                    let opts = DesignOptions::new(epsilon, seed);
                    let result = design_outage_rate(&h_hat, &cfg, &opts)?;
                    (result.beams, result.rates, result.trajectory)
                }
                _ => {
                    let beams = scenarios::design_beams(designer, &h_hat, &cfg, epsilon, seed)?;
                    let rates: Vec<Vec<f64>> = (0..cfg.users)
                        .map(|k| {
                            (0..cfg.streams)
                                .map(|m| {
                                    obeam_core::outage::epsilon_outage_rate(
                                        &beams, &h_hat, &cfg, k, m, epsilon, &[], None,
                                    )
                                })
                                .collect::<Result<_, _>>()
                        })
                        .collect::<Result<_, _>>()?;
                    let sum = rates.iter().flatten().sum::<f64>();
                    (beams, rates, vec![sum])
                }
            };
            std::fs::write(output_dir.join("beams.txt"), write_beam_set(&beams))?;
            for (it, sum) in trajectory.iter().enumerate() {
                writer.write(&Row {
                    scenario: "design".into(),
                    seed: seed.to_string(),
                    designer: designer.name().into(),
                    epsilon: format!("{epsilon}"),
                    quantity: "sum_rate_trajectory".into(),
                    value: Some(*sum),
                    terms_used: Some(it),
                    ..Row::default()
                })?;
            }
            for (k, row) in rates.iter().enumerate() {
                for (m, &r) in row.iter().enumerate() {
                    writer.write(&Row {
                        scenario: "design".into(),
                        seed: seed.to_string(),
                        designer: designer.name().into(),
                        epsilon: format!("{epsilon}"),
                        quantity: format!("stream_rate_{k}_{m}"),
                        value: Some(r),
                        ..Row::default()
                    })?;
                }
            }
            write_summary(&output_dir, &[])?;
            write_manifest(
                &output_dir,
                "design",
                config_hash(&format!("{designer:?}/{epsilon}/{seed}")),
                &[seed],
                start.elapsed().as_millis(),
            )?;
            println!("sum rate: {:.6}", trajectory.last().unwrap_or(&0.0));
            println!("artifacts in {}", output_dir.display());
            Ok(true)
        }
        Command::McValidate {
            instances,
            thresholds,
            trials,
            seed,
            output_dir,
        } => {
            let start = std::time::Instant::now();
            let mut writer = ResultWriter::create(&output_dir)?;
            let outcome =
                scenarios::mc_validate(instances, thresholds, trials, seed, &mut writer)?;
            write_summary(&output_dir, &outcome.checks)?;
            write_manifest(
                &output_dir,
                "mc-validate",
                config_hash(&format!("{instances}/{thresholds}/{trials}/{seed}")),
                &[seed],
                start.elapsed().as_millis(),
            )?;
            for check in &outcome.checks {
                println!(
                    "{} {}: {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            Ok(outcome.passed())
        }
        Command::SeriesCompare {
            terms,
            trials,
            seed,
            output_dir,
        } => {
            let start = std::time::Instant::now();
            let terms: Vec<usize> = terms
                .split(',')
                .map(|t| t.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(format!("bad --terms: {e}")))?;
            let mut writer = ResultWriter::create(&output_dir)?;
            let outcome = scenarios::series_compare(&terms, trials, seed, &mut writer)?;
            write_summary(&output_dir, &outcome.checks)?;
            write_manifest(
                &output_dir,
                "series-compare",
                config_hash(&format!("{terms:?}/{trials}/{seed}")),
                &[seed],
                start.elapsed().as_millis(),
            )?;
            for check in &outcome.checks {
                println!(
                    "{} {}: {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            Ok(outcome.passed())
        }
    }
}
