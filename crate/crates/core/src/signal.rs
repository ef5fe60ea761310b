//! Multi-tone complex signal model and sub-Nyquist channel sampling.
//!
//! All channels share the time origin t = 0 and sample on the common
//! Nyquist grid `n / f_max`; a channel with ratio `r` observes Nyquist
//! indices `r, 2r, 3r, ...`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Signal-to-noise ratio: total signal power over noise power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Db(f64),
    Noiseless,
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Db(db) => s.serialize_f64(*db),
            Snr::Noiseless => s.serialize_str("noiseless"),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct SnrVisitor;

        impl Visitor<'_> for SnrVisitor {
            type Value = Snr;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an SNR in dB or the string \"noiseless\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Snr, E> {
                if v.is_finite() {
                    Ok(Snr::Db(v))
                } else {
                    Err(E::custom("SNR must be finite"))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Snr, E> {
                Ok(Snr::Db(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Snr, E> {
                Ok(Snr::Db(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Snr, E> {
                if v == "noiseless" {
                    Ok(Snr::Noiseless)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        d.deserialize_any(SnrVisitor)
    }
}

/// Complex amplitude stored in polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub magnitude: f64,
    /// Radians.
    pub phase: f64,
}

impl Amplitude {
    pub fn new(magnitude: f64, phase: f64) -> Self {
        Self { magnitude, phase }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

/// Ground truth for a sum of `K` complex tones in white Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    freqs: Vec<f64>,
    amps: Vec<Amplitude>,
    f_max: f64,
    snr: Snr,
    seed: u64,
}

impl SignalSpec {
    pub fn new(
        freqs: Vec<f64>,
        amps: Vec<Amplitude>,
        f_max: f64,
        snr: Snr,
        seed: u64,
    ) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::InvalidSignal("at least one tone is required".into()));
        }
        if freqs.len() != amps.len() {
            return Err(Error::InvalidSignal(format!(
                "{} frequencies but {} amplitudes",
                freqs.len(),
                amps.len()
            )));
        }
        if !(f_max.is_finite() && f_max > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "f_max must be positive, got {f_max}"
            )));
        }
        for &f in &freqs {
            if !(f > 0.0 && f < f_max) {
                return Err(Error::FrequencyOutOfRange { freq: f, f_max });
            }
        }
        for (i, &fi) in freqs.iter().enumerate() {
            if freqs[i + 1..].contains(&fi) {
                return Err(Error::InvalidSignal(format!("duplicate frequency {fi} Hz")));
            }
        }
        for a in &amps {
            if !(a.magnitude.is_finite() && a.magnitude > 0.0 && a.phase.is_finite()) {
                return Err(Error::InvalidSignal(format!("bad amplitude {a:?}")));
            }
        }
        if let Snr::Db(db) = snr {
            if !db.is_finite() {
                return Err(Error::InvalidSignal("SNR must be finite".into()));
            }
        }
        Ok(Self {
            freqs,
            amps,
            f_max,
            snr,
            seed,
        })
    }

    /// Builds a spec whose phases are drawn uniformly on [0, 2π) from the
    /// seeded stream.
    pub fn with_random_phases(
        freqs: Vec<f64>,
        magnitudes: &[f64],
        f_max: f64,
        snr: Snr,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = phase_rng(seed);
        let amps = magnitudes
            .iter()
            .map(|&m| Amplitude::new(m, rng.random_range(0.0..2.0 * PI)))
            .collect();
        Self::new(freqs, amps, f_max, snr, seed)
    }

    /// Unit-magnitude, zero-phase tones without noise.
    pub fn unit_tones(freqs: &[f64], f_max: f64) -> Result<Self> {
        let amps = vec![Amplitude::new(1.0, 0.0); freqs.len()];
        Self::new(freqs.to_vec(), amps, f_max, Snr::Noiseless, 0)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn snr(&self) -> Snr {
        self.snr
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr == Snr::Noiseless
    }

    pub fn signal_power(&self) -> f64 {
        self.amps.iter().map(|a| a.magnitude * a.magnitude).sum()
    }

    /// Returns a copy with every amplitude multiplied by `scale`.
    pub fn scaled(&self, scale: Complex64) -> Result<Self> {
        let amps = self
            .amps
            .iter()
            .map(|a| {
                let c = a.to_complex() * scale;
                Amplitude::new(c.norm(), c.arg())
            })
            .collect();
        Self::new(self.freqs.clone(), amps, self.f_max, self.snr, self.seed)
    }
}

// Stream 0 holds the phases; channel noise uses stream = ratio >= 1.
fn phase_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn noise_rng(seed: u64, ratio: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(ratio));
    rng
}

/// The undersampling ratios of a multi-channel acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    ratios: Vec<u32>,
    f_max: f64,
}

impl ChannelSet {
    pub fn new(ratios: Vec<u32>, f_max: f64) -> Result<Self> {
        if !(2..=3).contains(&ratios.len()) {
            return Err(Error::InvalidChannels(format!(
                "expected 2 or 3 ratios, got {}",
                ratios.len()
            )));
        }
        if let Some(&r) = ratios.iter().find(|&&r| r <= 1) {
            return Err(Error::InvalidChannels(format!(
                "ratio {r} does not undersample"
            )));
        }
        for (i, r) in ratios.iter().enumerate() {
            if ratios[i + 1..].contains(r) {
                return Err(Error::InvalidChannels(format!("ratio {r} repeated")));
            }
        }
        if !(f_max.is_finite() && f_max > 0.0) {
            return Err(Error::InvalidChannels(format!(
                "f_max must be positive, got {f_max}"
            )));
        }
        Ok(Self { ratios, f_max })
    }

    pub fn ratios(&self) -> &[u32] {
        &self.ratios
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn rates(&self) -> Vec<f64> {
        self.ratios
            .iter()
            .map(|&r| self.f_max / f64::from(r))
            .collect()
    }

    /// Product of the ratios: the Nyquist-index length of one snapshot.
    pub fn period(&self) -> u64 {
        self.ratios.iter().map(|&r| u64::from(r)).product()
    }

    /// Samples every channel long enough to fill `snapshots` snapshots.
    pub fn acquire(&self, spec: &SignalSpec, snapshots: usize) -> Result<Vec<SampleBatch>> {
        let span = self.period() * snapshots as u64;
        self.ratios
            .iter()
            .map(|&r| synthesize(spec, r, (span / u64::from(r)) as usize))
            .collect()
    }
}

/// Consecutive samples of one channel, tagged with their Nyquist indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    ratio: u32,
    indices: Vec<u64>,
    values: Vec<Complex64>,
}

impl SampleBatch {
    pub fn new(ratio: u32, values: Vec<Complex64>) -> Result<Self> {
        if ratio == 0 {
            return Err(Error::InvalidArgument("ratio must be positive".into()));
        }
        let indices = (1..=values.len() as u64)
            .map(|j| j * u64::from(ratio))
            .collect();
        Ok(Self {
            ratio,
            indices,
            values,
        })
    }

    pub fn ratio(&self) -> u32 {
        self.ratio
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample at a Nyquist index, if this channel observed it.
    pub fn at(&self, nyquist_index: u64) -> Option<Complex64> {
        let r = u64::from(self.ratio);
        if nyquist_index == 0 || !nyquist_index.is_multiple_of(r) {
            return None;
        }
        self.values.get((nyquist_index / r - 1) as usize).copied()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["nyquist_index", "re", "im"])?;
        for (n, v) in self.indices.iter().zip(&self.values) {
            w.write_record([
                n.to_string(),
                format!("{:.16e}", v.re),
                format!("{:.16e}", v.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a batch written by [`SampleBatch::write_csv`]. Indices must be
    /// `ratio, 2·ratio, ...` without gaps.
    pub fn read_csv<R: Read>(ratio: u32, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["nyquist_index", "re", "im"] {
            return Err(Error::InvalidArgument(format!(
                "unexpected CSV header {headers:?}"
            )));
        }
        let mut values = Vec::new();
        for (j, record) in r.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number {:?}", &record[i])))
            };
            let index: u64 = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad index {:?}", &record[0])))?;
            let expected = (j as u64 + 1) * u64::from(ratio);
            if index != expected {
                return Err(Error::InvalidArgument(format!(
                    "row {j}: Nyquist index {index}, expected {expected}"
                )));
            }
            values.push(Complex64::new(parse(1)?, parse(2)?));
        }
        Self::new(ratio, values)
    }
}

/// Noise variance σ² implied by the spec's SNR.
pub fn noise_variance(spec: &SignalSpec) -> f64 {
    match spec.snr {
        Snr::Noiseless => 0.0,
        Snr::Db(db) => spec.signal_power() * 10f64.powf(-db / 10.0),
    }
}

/// Samples the signal at `f_max / ratio`, starting at Nyquist index `ratio`.
///
/// Noise is circular complex Gaussian with variance σ², drawn from a stream
/// determined by `(spec.seed, ratio)` so that channels are independent and
/// reproducible.
pub fn synthesize(spec: &SignalSpec, ratio: u32, n_samples: usize) -> Result<SampleBatch> {
    if ratio == 0 {
        return Err(Error::InvalidArgument("ratio must be at least 1".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let sources: Vec<(f64, Complex64)> = spec
        .freqs
        .iter()
        .zip(&spec.amps)
        .map(|(&f, a)| (f / spec.f_max, a.to_complex()))
        .collect();

    let sigma = (noise_variance(spec) / 2.0).sqrt();
    let mut rng = noise_rng(spec.seed, ratio);

    let values = (1..=n_samples as u64)
        .map(|j| {
            let n = (j * u64::from(ratio)) as f64;
            let clean: Complex64 = sources
                .iter()
                .map(|&(norm_f, s)| s * Complex64::cis(2.0 * PI * (norm_f * n).fract()))
                .sum();
            if sigma > 0.0 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                clean + Complex64::new(re, im) * sigma
            } else {
                clean
            }
        })
        .collect();
    SampleBatch::new(ratio, values)
}

/// Aliased frequency seen by a channel: `f mod (f_max / ratio)`.
pub fn fold_frequency(f: f64, ratio: u32, f_max: f64) -> Result<f64> {
    if !(f > 0.0 && f < f_max) {
        return Err(Error::FrequencyOutOfRange { freq: f, f_max });
    }
    if ratio == 0 {
        return Err(Error::InvalidArgument("ratio must be at least 1".into()));
    }
    let rate = f_max / f64::from(ratio);
    let folded = f.rem_euclid(rate);
    Ok(if folded >= rate { 0.0 } else { folded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn noise_variance_conventions() {
        let one = SignalSpec::new(
            vec![10.0],
            vec![Amplitude::new(1.0, 0.0)],
            60.0,
            Snr::Db(0.0),
            0,
        )
        .unwrap();
        assert_eq!(noise_variance(&one), 1.0);

        let three = SignalSpec::with_random_phases(
            vec![5.0, 10.0, 15.0],
            &[0.6, 0.7, 0.8],
            60.0,
            Snr::Db(10.0),
            3,
        )
        .unwrap();
        assert!((noise_variance(&three) - 0.149).abs() < 1e-12);

        let quiet = SignalSpec::unit_tones(&[10.0], 60.0).unwrap();
        assert_eq!(noise_variance(&quiet), 0.0);
    }

    #[test]
    fn quarter_band_tone() {
        let spec = SignalSpec::unit_tones(&[15.0], 60.0).unwrap();
        let batch = synthesize(&spec, 1, 4).unwrap();
        let expected = [
            Complex64::i(),
            Complex64::new(-1.0, 0.0),
            -Complex64::i(),
            Complex64::new(1.0, 0.0),
        ];
        assert_eq!(batch.indices(), &[1, 2, 3, 4]);
        for (v, e) in batch.values().iter().zip(expected) {
            assert!(close(*v, e, 1e-12), "{v} vs {e}");
        }
    }

    #[test]
    fn coprime_pair_cannot_separate_aliased_pairs() {
        let x1 = SignalSpec::unit_tones(&[25.0, 50.0], 60.0).unwrap();
        let x2 = SignalSpec::unit_tones(&[5.0, 10.0], 60.0).unwrap();
        for ratio in [3, 4] {
            let a = synthesize(&x1, ratio, 500).unwrap();
            let b = synthesize(&x2, ratio, 500).unwrap();
            assert_eq!(a.indices(), b.indices());
            for (u, v) in a.values().iter().zip(b.values()) {
                assert!(close(*u, *v, 1e-9));
            }
        }
    }

    #[test]
    fn synthesize_rejects_empty_batch() {
        let spec = SignalSpec::unit_tones(&[15.0], 60.0).unwrap();
        assert!(synthesize(&spec, 3, 0).is_err());
    }

    #[test]
    fn fold_examples() {
        assert_eq!(fold_frequency(22.0, 3, 60.0).unwrap(), 2.0);
        assert_eq!(fold_frequency(25.0, 4, 60.0).unwrap(), 10.0);
        assert_eq!(fold_frequency(5.0, 3, 60.0).unwrap(), 5.0);
        assert!(fold_frequency(0.0, 3, 60.0).is_err());
        assert!(fold_frequency(60.0, 3, 60.0).is_err());
    }

    #[test]
    fn spec_validation() {
        let amp = Amplitude::new(1.0, 0.0);
        assert!(SignalSpec::new(vec![], vec![], 60.0, Snr::Noiseless, 0).is_err());
        assert!(SignalSpec::new(vec![5.0], vec![], 60.0, Snr::Noiseless, 0).is_err());
        assert!(SignalSpec::new(vec![60.0], vec![amp], 60.0, Snr::Noiseless, 0).is_err());
        assert!(SignalSpec::new(vec![5.0, 5.0], vec![amp, amp], 60.0, Snr::Noiseless, 0).is_err());
        assert!(SignalSpec::new(
            vec![5.0],
            vec![Amplitude::new(0.0, 0.0)],
            60.0,
            Snr::Noiseless,
            0
        )
        .is_err());
        assert!(SignalSpec::new(vec![5.0], vec![amp], 60.0, Snr::Db(f64::NAN), 0).is_err());
    }

    #[test]
    fn channel_set_validation() {
        let ch = ChannelSet::new(vec![3, 4, 5], 60.0).unwrap();
        assert_eq!(ch.rates(), vec![20.0, 15.0, 12.0]);
        assert_eq!(ch.period(), 60);
        assert!(ChannelSet::new(vec![3], 60.0).is_err());
        assert!(ChannelSet::new(vec![1, 4], 60.0).is_err());
        assert!(ChannelSet::new(vec![4, 4], 60.0).is_err());
        assert!(ChannelSet::new(vec![2, 3, 5, 7], 60.0).is_err());
    }

    #[test]
    fn noise_is_deterministic_per_seed_and_ratio() {
        let spec =
            SignalSpec::with_random_phases(vec![7.0], &[1.0], 60.0, Snr::Db(0.0), 42).unwrap();
        let a = synthesize(&spec, 3, 64).unwrap();
        let b = synthesize(&spec, 3, 64).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&spec, 4, 64).unwrap();
        assert_ne!(a.values()[0], c.values()[0]);
    }

    #[test]
    fn noise_statistics() {
        // A zero-power tone is not allowed, so measure noise as residual
        // from the clean signal.
        let n = 100_000;
        let noisy = SignalSpec::new(
            vec![7.0],
            vec![Amplitude::new(1.0, 0.3)],
            60.0,
            Snr::Db(3.0),
            9,
        )
        .unwrap();
        let clean = SignalSpec::new(
            vec![7.0],
            vec![Amplitude::new(1.0, 0.3)],
            60.0,
            Snr::Noiseless,
            9,
        )
        .unwrap();
        let var = noise_variance(&noisy);
        let w: Vec<Complex64> = synthesize(&noisy, 2, n)
            .unwrap()
            .values()
            .iter()
            .zip(synthesize(&clean, 2, n).unwrap().values())
            .map(|(a, b)| a - b)
            .collect();
        let mean: Complex64 = w.iter().sum::<Complex64>() / n as f64;
        let sample_var = w.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
        assert!(
            mean.norm() <= 3.0 * var.sqrt() / (n as f64).sqrt(),
            "mean {mean}"
        );
        assert!(
            (sample_var / var - 1.0).abs() < 0.05,
            "var {sample_var} vs {var}"
        );
        let re_var = w.iter().map(|x| x.re * x.re).sum::<f64>() / n as f64;
        assert!((re_var / (var / 2.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn csv_round_trip() {
        let spec =
            SignalSpec::with_random_phases(vec![7.0, 31.5], &[1.0, 0.4], 60.0, Snr::Db(5.0), 1)
                .unwrap();
        let batch = synthesize(&spec, 4, 25).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("nyquist_index,re,im\n4,"));
        let back = SampleBatch::read_csv(4, buf.as_slice()).unwrap();
        assert_eq!(back, batch);
        assert!(SampleBatch::read_csv(3, buf.as_slice()).is_err());
    }

    #[test]
    fn snr_serde() {
        assert_eq!(serde_json::from_str::<Snr>("10").unwrap(), Snr::Db(10.0));
        assert_eq!(serde_json::from_str::<Snr>("-2.5").unwrap(), Snr::Db(-2.5));
        assert_eq!(
            serde_json::from_str::<Snr>("\"noiseless\"").unwrap(),
            Snr::Noiseless
        );
        assert!(serde_json::from_str::<Snr>("\"quiet\"").is_err());
        assert_eq!(
            serde_json::to_string(&Snr::Noiseless).unwrap(),
            "\"noiseless\""
        );
    }
}
