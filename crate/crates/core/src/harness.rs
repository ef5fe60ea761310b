//! Experiment runners: two-channel candidate matching, sample-level
//! indistinguishability of aliased tone pairs, MUSIC over channel subsets,
//! and Monte Carlo success-rate sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{self, CandidateSet, Collision, MatchReport};
use crate::error::{Error, Result};
use crate::music::{self, Pseudospectrum};
use crate::signal::{self, Amplitude, ChannelSet, SignalSpec, Snr};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_F_MAX: f64 = 60.0;
pub const DEFAULT_RATIOS: [u32; 3] = [3, 4, 5];
pub const DEFAULT_MAGNITUDES: [f64; 3] = [0.6, 0.7, 0.8];
pub const DEFAULT_SNR_DB: f64 = 10.0;
pub const DEFAULT_SNAPSHOTS: usize = 100;
pub const DEFAULT_STEP: f64 = 1.0;

/// The three tone sets of the channel-subset comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    A,
    B,
    C,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::A, Scenario::B, Scenario::C];

    pub fn freqs(self) -> [f64; 3] {
        match self {
            Scenario::A => [5.0, 10.0, 15.0],
            Scenario::B => [5.0, 10.0, 18.0],
            Scenario::C => [5.0, 10.0, 26.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::A => "a",
            Scenario::B => "b",
            Scenario::C => "c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
    }

    /// Recognizes a scenario from its tones (in any order).
    pub fn from_freqs(freqs: &[f64]) -> Option<Self> {
        let mut sorted = freqs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self::ALL
            .into_iter()
            .find(|sc| sc.freqs().as_slice() == sorted.as_slice())
    }

    /// Expected MUSIC outcome with ratios (3, 4, 5) at f_max = 60 Hz:
    /// `true` for success. `None` for subsets outside that comparison.
    pub fn expected_success(self, subset: &[u32]) -> Option<bool> {
        let mut s = subset.to_vec();
        s.sort_unstable();
        let pair = match s.as_slice() {
            [3, 4, 5] => return Some(true),
            [3, 4] => (3, 4),
            [3, 5] => (3, 5),
            [4, 5] => (4, 5),
            _ => return None,
        };
        Some(match (self, pair) {
            (Scenario::A, (3, 4)) => false,
            (Scenario::A, _) => true,
            (Scenario::B, (4, 5)) => true,
            (Scenario::B, _) => false,
            (Scenario::C, _) => false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Radians; drawn uniformly from the trial seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    pub f_max: f64,
    pub snr_db: Snr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalConfig,
    pub ratios: Vec<u32>,
    pub channel_subsets: Vec<Vec<u32>>,
    #[serde(rename = "L")]
    pub snapshots: usize,
    pub step: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Ratios (3, 4, 5), f_max = 60 Hz, amplitudes 0.6/0.7/0.8 with random
    /// phases, 10 dB, L = 100, 1 Hz grid, every pair plus the full triple.
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self {
            signal: SignalConfig {
                freqs: scenario.freqs().to_vec(),
                magnitudes: DEFAULT_MAGNITUDES.to_vec(),
                phases: None,
                f_max: DEFAULT_F_MAX,
                snr_db: Snr::Db(DEFAULT_SNR_DB),
            },
            ratios: DEFAULT_RATIOS.to_vec(),
            channel_subsets: vec![vec![3, 4], vec![3, 5], vec![4, 5], vec![3, 4, 5]],
            snapshots: DEFAULT_SNAPSHOTS,
            step: DEFAULT_STEP,
            trials: 100,
            seed: DEFAULT_SEED,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        ChannelSet::new(self.ratios.clone(), self.signal.f_max)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.channel_subsets.is_empty() {
            return bad("channel_subsets is empty".into());
        }
        for subset in &self.channel_subsets {
            if let Some(r) = subset.iter().find(|r| !self.ratios.contains(r)) {
                return bad(format!("subset {subset:?} uses ratio {r} not in ratios"));
            }
            ChannelSet::new(subset.clone(), self.signal.f_max)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snapshots == 0 {
            return bad("L must be at least 1".into());
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if let Some(p) = &self.signal.phases {
            if p.len() != self.signal.freqs.len() {
                return bad("phases and freqs differ in length".into());
            }
        }
        self.signal_spec(self.seed)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn signal_spec(&self, seed: u64) -> Result<SignalSpec> {
        let s = &self.signal;
        match &s.phases {
            Some(phases) => {
                if phases.len() != s.magnitudes.len() {
                    return Err(Error::InvalidSignal(
                        "phases and magnitudes differ in length".into(),
                    ));
                }
                let amps = s
                    .magnitudes
                    .iter()
                    .zip(phases)
                    .map(|(&m, &p)| Amplitude::new(m, p))
                    .collect();
                SignalSpec::new(s.freqs.clone(), amps, s.f_max, s.snr_db, seed)
            }
            None => SignalSpec::with_random_phases(
                s.freqs.clone(),
                &s.magnitudes,
                s.f_max,
                s.snr_db,
                seed,
            ),
        }
    }

    pub fn scenario(&self) -> Option<Scenario> {
        let standard_setup = self.signal.f_max == DEFAULT_F_MAX && self.step == DEFAULT_STEP;
        standard_setup
            .then(|| Scenario::from_freqs(&self.signal.freqs))
            .flatten()
    }
}

pub fn subset_label(subset: &[u32]) -> String {
    subset
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

/// Grid-resolution equality of two frequency sets.
pub fn same_on_grid(estimated: &[f64], truth: &[f64], step: f64) -> bool {
    let snap = |fs: &[f64]| {
        let mut v: Vec<i64> = fs.iter().map(|f| (f / step).round() as i64).collect();
        v.sort_unstable();
        v
    };
    estimated.len() == truth.len() && snap(estimated) == snap(truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub freqs: Vec<f64>,
    pub ratios: [u32; 2],
    pub f_max: f64,
    pub candidates_a: Vec<CandidateSet>,
    pub candidates_b: Vec<CandidateSet>,
    pub report: MatchReport,
    /// Collisions among the true tones.
    pub predicted: Vec<Collision>,
}

/// Folds the true tones on two channels, unfolds the candidates and
/// matches them.
pub fn run_fig1(freqs: &[f64], ratios: [u32; 2], f_max: f64, tol: f64) -> Result<Fig1Report> {
    let [a, b] = ratios;
    let fold_all = |r: u32| {
        freqs
            .iter()
            .map(|&f| signal::fold_frequency(f, r, f_max))
            .collect::<Result<Vec<_>>>()
    };
    let folded_a = fold_all(a)?;
    let folded_b = fold_all(b)?;
    let unfold_all = |folded: &[f64], r: u32| {
        folded
            .iter()
            .map(|&f| ambiguity::unfold(f, r, f_max))
            .collect::<Result<Vec<_>>>()
    };
    Ok(Fig1Report {
        freqs: freqs.to_vec(),
        ratios,
        f_max,
        candidates_a: unfold_all(&folded_a, a)?,
        candidates_b: unfold_all(&folded_b, b)?,
        report: ambiguity::match_two_channels(&folded_a, &folded_b, a, b, f_max, tol)?,
        predicted: ambiguity::predict_collision(freqs, a, b, f_max, 1e-9)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDiscrepancy {
    pub ratio: u32,
    pub samples: usize,
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Report {
    pub x1_freqs: Vec<f64>,
    pub x2_freqs: Vec<f64>,
    pub f_max: f64,
    pub channels: Vec<ChannelDiscrepancy>,
}

impl Fig2Report {
    pub fn indistinguishable(&self, tol: f64) -> bool {
        self.channels.iter().all(|c| c.max_discrepancy < tol)
    }
}

pub const FIG2_X1: [f64; 2] = [25.0, 50.0];
pub const FIG2_X2: [f64; 2] = [5.0, 10.0];

/// Samples unit tones at 25 + 50 Hz and 5 + 10 Hz on each channel and
/// reports the largest sample difference per channel.
pub fn run_fig2(f_max: f64, ratios: &[u32], n_samples: usize) -> Result<Fig2Report> {
    let x1 = SignalSpec::unit_tones(&FIG2_X1, f_max)?;
    let x2 = SignalSpec::unit_tones(&FIG2_X2, f_max)?;
    let channels = ratios
        .iter()
        .map(|&r| {
            let s1 = signal::synthesize(&x1, r, n_samples)?;
            let s2 = signal::synthesize(&x2, r, n_samples)?;
            let max_discrepancy = s1
                .values()
                .iter()
                .zip(s2.values())
                .map(|(u, v)| (u - v).norm())
                .fold(0.0, f64::max);
            Ok(ChannelDiscrepancy {
                ratio: r,
                samples: n_samples,
                max_discrepancy,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Fig2Report {
        x1_freqs: FIG2_X1.to_vec(),
        x2_freqs: FIG2_X2.to_vec(),
        f_max,
        channels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub subset: Vec<u32>,
    pub estimated: Vec<f64>,
    pub success: bool,
    /// Relative to the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudospectrum_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Fig3Run {
    pub true_freqs: Vec<f64>,
    pub results: Vec<TrialResult>,
    pub spectra: Vec<Pseudospectrum>,
}

#[derive(Debug, Serialize)]
struct Fig3Results<'a> {
    true_freqs: &'a [f64],
    results: &'a [TrialResult],
}

type SubsetOutcomes = Vec<(TrialResult, Pseudospectrum)>;

fn run_subsets(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<f64>, SubsetOutcomes)> {
    let spec = cfg.signal_spec(seed)?;
    let k = spec.k();
    let out = cfg
        .channel_subsets
        .iter()
        .map(|subset| {
            let channels = ChannelSet::new(subset.clone(), spec.f_max())?;
            let batches = channels.acquire(&spec, cfg.snapshots)?;
            let spectrum = music::estimate_spectrum(
                &batches,
                subset,
                spec.f_max(),
                k,
                cfg.step,
                cfg.snapshots,
            )?;
            let result = TrialResult {
                subset: subset.clone(),
                success: same_on_grid(&spectrum.peaks, spec.freqs(), cfg.step),
                estimated: spectrum.peaks.clone(),
                pseudospectrum_path: Some(PathBuf::from(format!(
                    "pseudospectrum_{}.csv",
                    subset_label(subset)
                ))),
            };
            Ok((result, spectrum))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spec.freqs().to_vec(), out))
}

/// One MUSIC estimate per channel subset, all subsets seeing the same
/// channel samples (seeded by `config.seed`).
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Fig3Run> {
    cfg.validate()?;
    let (true_freqs, out) = run_subsets(cfg, cfg.seed)?;
    let (results, spectra) = out.into_iter().unzip();
    Ok(Fig3Run {
        true_freqs,
        results,
        spectra,
    })
}

impl Fig3Run {
    /// Writes `config.json`, `pseudospectrum_<subset>.csv` and `results.json`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("config.json"), cfg)?;
        for (result, spectrum) in self.results.iter().zip(&self.spectra) {
            if let Some(name) = &result.pseudospectrum_path {
                spectrum.write_csv(fs::File::create(dir.join(name))?)?;
            }
        }
        write_json(
            &dir.join("results.json"),
            &Fig3Results {
                true_freqs: &self.true_freqs,
                results: &self.results,
            },
        )
    }

    /// Subsets whose outcome differs from the expected pattern.
    pub fn pattern_mismatches(&self, scenario: Scenario) -> Vec<String> {
        self.results
            .iter()
            .filter_map(|r| {
                let expected = scenario.expected_success(&r.subset)?;
                (expected != r.success).then(|| {
                    format!(
                        "scenario {} subset {}: expected {}, got {} (peaks {:?})",
                        scenario.name(),
                        subset_label(&r.subset),
                        if expected { "success" } else { "failure" },
                        if r.success { "success" } else { "failure" },
                        r.estimated
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub subset: String,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Success rate per subset over `trials` independent trials; trial `t`
/// draws phases and noise from seed `config.seed + t`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let outcomes: Vec<Vec<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (_, out) = run_subsets(cfg, cfg.seed.wrapping_add(t as u64))?;
            Ok(out.into_iter().map(|(r, _)| r.success).collect())
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .channel_subsets
        .iter()
        .enumerate()
        .map(|(i, subset)| {
            let successes = outcomes.iter().filter(|o| o[i]).count();
            SweepRow {
                subset: subset_label(subset),
                trials: cfg.trials,
                successes,
                rate: successes as f64 / cfg.trials as f64,
            }
        })
        .collect())
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_cases() {
        let a = run_fig1(&[22.0, 50.0], [3, 4], 60.0, 0.5).unwrap();
        assert_eq!(a.report.assignments, vec![vec![22.0, 50.0]]);
        assert!(!a.report.ambiguous && a.predicted.is_empty());
        assert_eq!(a.candidates_a[0].candidates, vec![2.0, 22.0, 42.0]);
        assert_eq!(a.candidates_b[0].candidates, vec![7.0, 22.0, 37.0, 52.0]);

        let b = run_fig1(&[25.0, 50.0], [3, 4], 60.0, 0.5).unwrap();
        assert!(b.report.ambiguous);
        assert_eq!(
            b.report.assignments,
            vec![vec![25.0, 50.0], vec![5.0, 10.0]]
        );
        assert_eq!(b.predicted.len(), 1);

        let c = run_fig1(&[7.0, 30.0], [3, 4], 60.0, 0.5).unwrap();
        assert!(!c.report.ambiguous);
        assert_eq!(c.report.assignments, vec![vec![7.0, 30.0]]);
    }

    #[test]
    fn fig2_cases() {
        let r = run_fig2(60.0, &[3, 4], 1000).unwrap();
        assert!(r.indistinguishable(1e-9));
        let r = run_fig2(60.0, &[3, 5], 1000).unwrap();
        assert!(r.channels.iter().any(|c| c.max_discrepancy > 0.1));
        let r = run_fig2(60.0, &[1], 100).unwrap();
        assert!(r.channels[0].max_discrepancy > 0.1);
    }

    #[test]
    fn expected_pattern_table() {
        use Scenario::*;
        let t = |s: Scenario| -> Vec<bool> {
            [[3, 4].as_slice(), &[3, 5], &[4, 5], &[3, 4, 5]]
                .iter()
                .map(|sub| s.expected_success(sub).unwrap())
                .collect()
        };
        assert_eq!(t(A), vec![false, true, true, true]);
        assert_eq!(t(B), vec![false, false, true, true]);
        assert_eq!(t(C), vec![false, false, false, true]);
        assert_eq!(A.expected_success(&[2, 3]), None);
        assert_eq!(Scenario::from_freqs(&[26.0, 5.0, 10.0]), Some(C));
        assert_eq!(Scenario::parse("B"), Some(B));
    }

    #[test]
    fn config_json_round_trip_and_strictness() {
        let cfg = ExperimentConfig::for_scenario(Scenario::B);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"L\":100"));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);

        let typo = text.replace("\"trials\"", "\"trails\"");
        assert!(matches!(
            ExperimentConfig::from_json(&typo),
            Err(Error::InvalidConfig(_))
        ));
        let extra = text.replace("\"seed\"", "\"colour\":1,\"seed\"");
        assert!(ExperimentConfig::from_json(&extra).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::for_scenario(Scenario::A);
        cfg.channel_subsets.push(vec![3, 7]);
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_scenario(Scenario::A);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_scenario(Scenario::A);
        cfg.signal.freqs.push(70.0);
        cfg.signal.magnitudes.push(1.0);
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_scenario(Scenario::A);
        cfg.signal.phases = Some(vec![0.0; 2]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_equality() {
        assert!(same_on_grid(&[10.0, 5.0], &[5.0, 10.0], 1.0));
        assert!(!same_on_grid(&[5.0], &[5.0, 10.0], 1.0));
        assert!(!same_on_grid(&[5.0, 11.0], &[5.0, 10.0], 1.0));
    }

    #[test]
    fn subset_labels() {
        assert_eq!(subset_label(&[3, 4, 5]), "3-4-5");
    }
}
