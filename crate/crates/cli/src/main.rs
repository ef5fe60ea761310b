use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coprime_music::harness::{self, ExperimentConfig, Scenario};
use coprime_music::music::{self, PeakReport};
use coprime_music::signal::{ChannelSet, SampleBatch};
use coprime_music::Error;

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_ESTIMATION: u8 = 3;
const EXIT_PATTERN_MISMATCH: u8 = 4;

/// Sweep threshold for the full channel set under `sweep --check`.
const SWEEP_MIN_RATE: f64 = 0.9;

#[derive(Parser)]
#[command(
    name = "coprime-music",
    version,
    about = "Frequency estimation from coprime sub-Nyquist channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for result files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Search grid step in Hz.
    #[arg(long, global = true)]
    step: Option<f64>,

    /// Compare against the expected outcome and exit 4 on mismatch.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Two-channel candidate matching.
    Fig1 {
        #[arg(long, value_delimiter = ',', default_values_t = [22.0, 50.0])]
        freqs: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4])]
        ratios: Vec<u32>,
        #[arg(long, default_value_t = 60.0)]
        f_max: f64,
        /// Candidate intersection tolerance in Hz (default: half the step).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sample-level comparison of 25+50 Hz against 5+10 Hz.
    Fig2 {
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4])]
        ratios: Vec<u32>,
        #[arg(long, default_value_t = 60.0)]
        f_max: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// MUSIC over every channel subset for one seeded trial.
    Fig3 {
        /// Built-in tone set a, b or c (ignored with --config).
        #[arg(long, default_value = "a")]
        scenario: String,
    },
    /// Monte Carlo success rates per channel subset.
    Sweep {
        #[arg(long, default_value = "a")]
        scenario: String,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Estimate frequencies from sample CSVs, or from a synthesized signal.
    Estimate {
        /// `RATIO=PATH` of a `nyquist_index,re,im` CSV; repeat per channel.
        #[arg(long = "samples", value_name = "RATIO=PATH")]
        samples: Vec<String>,
        /// Number of tones.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 60.0)]
        f_max: f64,
        /// Snapshot count L.
        #[arg(long)]
        snapshots: Option<usize>,
        #[arg(long, default_value = "a")]
        scenario: String,
    },
}

enum Failure {
    Config(String),
    Estimation(String),
    Mismatch(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidSignal(_)
            | Error::InvalidChannels(_)
            | Error::InvalidArgument(_)
            | Error::FrequencyOutOfRange { .. }
            | Error::FoldedOutOfRange { .. }
            | Error::NonCoprimeRatios { .. }
            | Error::NonPairwiseCoprime(_)
            | Error::TooManyComponents { .. }
            | Error::KTooLarge { .. } => Failure::Config(e.to_string()),
            _ => Failure::Estimation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID_CONFIG)
        }
        Err(Failure::Estimation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ESTIMATION)
        }
        Err(Failure::Mismatch(lines)) => {
            for line in lines {
                eprintln!("mismatch: {line}");
            }
            ExitCode::from(EXIT_PATTERN_MISMATCH)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = cli.common;
    match cli.command {
        Command::Fig1 {
            freqs,
            ratios,
            f_max,
            tol,
        } => fig1(&common, freqs, ratios, f_max, tol),
        Command::Fig2 {
            ratios,
            f_max,
            samples,
        } => fig2(&common, &ratios, f_max, samples),
        Command::Fig3 { scenario } => fig3(&common, &scenario),
        Command::Sweep { scenario, trials } => sweep(&common, &scenario, trials),
        Command::Estimate {
            samples,
            k,
            f_max,
            snapshots,
            scenario,
        } => estimate(&common, &samples, k, f_max, snapshots, &scenario),
    }
}

fn load_config(common: &Common, scenario: &str) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let sc = Scenario::parse(scenario).ok_or_else(|| {
                Failure::Config(format!("unknown scenario {scenario:?}; use a, b or c"))
            })?;
            ExperimentConfig::for_scenario(sc)
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(step) = common.step {
        cfg.step = step;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(common: &Common) -> Result<Option<&Path>, Failure> {
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::Estimation(format!("{}: {e}", dir.display())))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn fig1(
    common: &Common,
    freqs: Vec<f64>,
    ratios: Vec<u32>,
    f_max: f64,
    tol: Option<f64>,
) -> Result<(), Failure> {
    let (freqs, ratios, f_max) = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            (
                cfg.signal.freqs.clone(),
                cfg.ratios.clone(),
                cfg.signal.f_max,
            )
        }
        None => (freqs, ratios, f_max),
    };
    let [a, b] = ratios[..] else {
        return Err(Failure::Config(format!(
            "fig1 needs exactly two ratios, got {ratios:?}"
        )));
    };
    let tol = tol.unwrap_or(0.5 * common.step.unwrap_or(harness::DEFAULT_STEP));
    let report = harness::run_fig1(&freqs, [a, b], f_max, tol)?;
    if let Some(dir) = prepare_out(common)? {
        harness::write_json(&dir.join("fig1.json"), &report)?;
    }
    print_json(&report);
    if common.check && report.report.ambiguous == report.predicted.is_empty() {
        return Err(Failure::Mismatch(vec![format!(
            "matcher ambiguous={} but collision predicate found {} pair(s)",
            report.report.ambiguous,
            report.predicted.len()
        )]));
    }
    Ok(())
}

fn fig2(common: &Common, ratios: &[u32], f_max: f64, samples: usize) -> Result<(), Failure> {
    let report = harness::run_fig2(f_max, ratios, samples)?;
    if let Some(dir) = prepare_out(common)? {
        harness::write_json(&dir.join("fig2.json"), &report)?;
    }
    print_json(&report);
    if common.check && !report.indistinguishable(1e-9) {
        return Err(Failure::Mismatch(
            report
                .channels
                .iter()
                .filter(|c| c.max_discrepancy >= 1e-9)
                .map(|c| format!("ratio {}: max discrepancy {:e}", c.ratio, c.max_discrepancy))
                .collect(),
        ));
    }
    Ok(())
}

fn fig3(common: &Common, scenario: &str) -> Result<(), Failure> {
    let cfg = load_config(common, scenario)?;
    let expected = cfg.scenario();
    if common.check && expected.is_none() {
        return Err(Failure::Config(
            "--check needs one of the built-in tone sets at f_max 60 Hz, 1 Hz step".into(),
        ));
    }
    let run = harness::run_fig3(&cfg)?;
    if let Some(dir) = prepare_out(common)? {
        run.write(&cfg, dir)?;
    }
    println!("true frequencies: {:?}", run.true_freqs);
    for r in &run.results {
        println!(
            "{:>7}  {}  {:?}",
            harness::subset_label(&r.subset),
            if r.success { "success" } else { "failure" },
            r.estimated
        );
    }
    if let (true, Some(sc)) = (common.check, expected) {
        let mismatches = run.pattern_mismatches(sc);
        if !mismatches.is_empty() {
            return Err(Failure::Mismatch(mismatches));
        }
    }
    Ok(())
}

fn sweep(common: &Common, scenario: &str, trials: Option<usize>) -> Result<(), Failure> {
    let mut cfg = load_config(common, scenario)?;
    if let Some(t) = trials {
        cfg.trials = t;
        cfg.validate()?;
    }
    let rows = harness::run_sweep(&cfg)?;
    if let Some(dir) = prepare_out(common)? {
        harness::write_json(&dir.join("config.json"), &cfg)?;
        let file = fs::File::create(dir.join("sweep.csv")).map_err(Error::from)?;
        harness::write_sweep_csv(&rows, file)?;
    }
    harness::write_sweep_csv(&rows, std::io::stdout())?;
    if common.check {
        let full = harness::subset_label(&cfg.ratios);
        let low: Vec<String> = rows
            .iter()
            .filter(|r| r.subset == full && r.rate < SWEEP_MIN_RATE)
            .map(|r| {
                format!(
                    "subset {}: rate {} below {SWEEP_MIN_RATE}",
                    r.subset, r.rate
                )
            })
            .collect();
        if !low.is_empty() {
            return Err(Failure::Mismatch(low));
        }
    }
    Ok(())
}

fn parse_sample_arg(arg: &str) -> Result<SampleBatch, Failure> {
    let (ratio, path) = arg
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("expected RATIO=PATH, got {arg:?}")))?;
    let ratio: u32 = ratio
        .trim()
        .parse()
        .map_err(|_| Failure::Config(format!("bad ratio in {arg:?}")))?;
    let file = fs::File::open(path).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
    SampleBatch::read_csv(ratio, file).map_err(|e| Failure::Config(format!("{path}: {e}")))
}

fn estimate(
    common: &Common,
    samples: &[String],
    k: Option<usize>,
    f_max: f64,
    snapshots: Option<usize>,
    scenario: &str,
) -> Result<(), Failure> {
    let step = common.step.unwrap_or(harness::DEFAULT_STEP);
    let (batches, ratios, f_max, k, snapshots, truth) = if samples.is_empty() {
        let cfg = load_config(common, scenario)?;
        let spec = cfg.signal_spec(cfg.seed)?;
        let snapshots = snapshots.unwrap_or(cfg.snapshots);
        let batches =
            ChannelSet::new(cfg.ratios.clone(), spec.f_max())?.acquire(&spec, snapshots)?;
        let k = k.unwrap_or(spec.k());
        (
            batches,
            cfg.ratios.clone(),
            spec.f_max(),
            k,
            snapshots,
            Some(spec.freqs().to_vec()),
        )
    } else {
        let batches = samples
            .iter()
            .map(|s| parse_sample_arg(s))
            .collect::<Result<Vec<_>, _>>()?;
        let ratios: Vec<u32> = batches.iter().map(SampleBatch::ratio).collect();
        let k = k.ok_or_else(|| Failure::Config("--k is required with --samples".into()))?;
        let period: u64 = ratios.iter().map(|&r| u64::from(r)).product();
        let available = batches
            .iter()
            .map(|b| b.len() as u64 * u64::from(b.ratio()) / period)
            .min()
            .unwrap_or(0) as usize;
        (
            batches,
            ratios,
            f_max,
            k,
            snapshots.unwrap_or(available),
            None,
        )
    };

    let spectrum = music::estimate_spectrum(&batches, &ratios, f_max, k, step, snapshots)?;
    let report = PeakReport {
        peaks_hz: spectrum.peaks.clone(),
        ratios: ratios.clone(),
        k,
    };
    if let Some(dir) = prepare_out(common)? {
        let file = fs::File::create(dir.join("pseudospectrum.csv")).map_err(Error::from)?;
        spectrum.write_csv(file)?;
        harness::write_json(&dir.join("peaks.json"), &report)?;
    }
    print_json(&report);
    if let (true, Some(truth)) = (common.check, truth) {
        if !harness::same_on_grid(&spectrum.peaks, &truth, step) {
            return Err(Failure::Mismatch(vec![format!(
                "estimated {:?}, true {:?}",
                spectrum.peaks, truth
            )]));
        }
    }
    Ok(())
}
