//! Joint multi-channel MUSIC.
//!
//! One snapshot collects every sample whose Nyquist index falls in a window
//! of `period = ∏ ratios` Nyquist intervals. Viewed on the Nyquist grid the
//! snapshot is a non-uniform "array" whose element positions are the
//! multiples of any ratio in `1..=period`. Consecutive snapshots are shifted
//! by `period`, so tone `k` advances by `exp(i·2π·f_k·period / f_max)` per
//! snapshot.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, CVector};
use crate::signal::SampleBatch;
use crate::Complex64;

/// Row layout of a snapshot: which Nyquist indices within one period are
/// observed, in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotIndexLayout {
    ratios: Vec<u32>,
    period: u64,
    indices: Vec<u64>,
}

impl SnapshotIndexLayout {
    pub fn ratios(&self) -> &[u32] {
        &self.ratios
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    /// Snapshot dimension.
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// Same index set with rows in the order `a, b, c, 2a, 2b, 2c, ...`,
    /// each index kept at its first appearance.
    pub fn interleaved(&self) -> Self {
        let mut indices = Vec::with_capacity(self.indices.len());
        let max_mult = self.period / u64::from(*self.ratios.iter().min().unwrap());
        for k in 1..=max_mult {
            for &r in &self.ratios {
                let i = k * u64::from(r);
                if i <= self.period && !indices.contains(&i) {
                    indices.push(i);
                }
            }
        }
        Self {
            indices,
            ..self.clone()
        }
    }

    /// Reorders rows; `order[j]` is the current row placed at position `j`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.m()];
        if order.len() != self.m()
            || !order
                .iter()
                .all(|&j| j < self.m() && !std::mem::replace(&mut seen[j], true))
        {
            return Err(Error::InvalidArgument(
                "row order must be a permutation".into(),
            ));
        }
        let indices = order.iter().map(|&j| self.indices[j]).collect();
        Ok(Self {
            indices,
            ..self.clone()
        })
    }
}

/// Sorted union of the multiples of each ratio up to the ratios' product.
pub fn build_layout(ratios: &[u32]) -> Result<SnapshotIndexLayout> {
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
    let period: u64 = ratios.iter().map(|&r| u64::from(r)).product();
    let indices = (1..=period)
        .filter(|i| ratios.iter().any(|&r| i % u64::from(r) == 0))
        .collect();
    Ok(SnapshotIndexLayout {
        ratios: ratios.to_vec(),
        period,
        indices,
    })
}

/// `m × L` matrix whose column `l` is the `l`-th snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub layout: SnapshotIndexLayout,
    pub data: CMatrix,
}

impl SnapshotMatrix {
    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// Fills row `i`, column `l` with the sample at Nyquist index
/// `indices[i] + period·l`.
///
/// An index observed by two channels is taken from the channel listed first
/// in the layout's ratios. With `duplicate_tol = Some(tol)` the other
/// channels' samples at that index must agree within `tol`, which only makes
/// sense for noiseless data.
pub fn assemble_snapshots(
    batches: &[SampleBatch],
    layout: &SnapshotIndexLayout,
    snapshots: usize,
    duplicate_tol: Option<f64>,
) -> Result<SnapshotMatrix> {
    if snapshots == 0 {
        return Err(Error::InvalidArgument("need at least one snapshot".into()));
    }
    let by_ratio: Vec<Option<&SampleBatch>> = layout
        .ratios
        .iter()
        .map(|&r| batches.iter().find(|b| b.ratio() == r))
        .collect();

    let mut data = CMatrix::zeros(layout.m(), snapshots);
    for (row, &base) in layout.indices.iter().enumerate() {
        let owners: Vec<&SampleBatch> = layout
            .ratios
            .iter()
            .zip(&by_ratio)
            .filter(|(&r, _)| base % u64::from(r) == 0)
            .filter_map(|(_, b)| *b)
            .collect();
        for col in 0..snapshots {
            let index = base + layout.period * col as u64;
            let mut found = owners.iter().filter_map(|b| b.at(index));
            let value = found.next().ok_or(Error::MissingIndex { index })?;
            if let Some(tol) = duplicate_tol {
                for other in found {
                    let diff = (other - value).norm();
                    if diff > tol {
                        return Err(Error::InconsistentDuplicate { index, diff });
                    }
                }
            }
            data[(row, col)] = value;
        }
    }
    Ok(SnapshotMatrix {
        layout: layout.clone(),
        data,
    })
}

/// Response of the snapshot rows to a unit tone at `f`:
/// `exp(i·2π·f·index / f_max)` per row.
pub fn steering_vector(f: f64, layout: &SnapshotIndexLayout, f_max: f64) -> Result<CVector> {
    if !(f >= 0.0 && f < f_max) {
        return Err(Error::FrequencyOutOfRange { freq: f, f_max });
    }
    Ok(steering(f / f_max, &layout.indices))
}

fn steering(norm_f: f64, indices: &[u64]) -> CVector {
    CVector::from_iterator(
        indices.len(),
        indices
            .iter()
            .map(|&i| Complex64::cis(2.0 * PI * (norm_f * i as f64).fract())),
    )
}

/// `R = X Xᴴ / L`, symmetrized to be exactly Hermitian.
pub fn sample_autocorrelation(x: &SnapshotMatrix) -> CMatrix {
    let l = x.snapshots() as f64;
    let r = &x.data * x.data.adjoint() / Complex64::new(l, 0.0);
    (&r + r.adjoint()) * Complex64::new(0.5, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudospectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Ascending.
    pub peaks: Vec<f64>,
    /// Dimension of the noise subspace used.
    pub noise_dim: usize,
}

impl Pseudospectrum {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["freq_hz", "value"])?;
        for (f, v) in self.grid.iter().zip(&self.values) {
            w.write_record([f.to_string(), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Serialized estimate: `{"peaks_hz": [..], "ratios": [..], "K": n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakReport {
    pub peaks_hz: Vec<f64>,
    pub ratios: Vec<u32>,
    #[serde(rename = "K")]
    pub k: usize,
}

/// Grid `0, step, 2·step, ...` strictly below `f_max`.
pub fn frequency_grid(f_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && f_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad grid: step {step}, f_max {f_max}"
        )));
    }
    let n = (f_max / step - 1e-9).ceil() as usize;
    Ok((0..n).map(|i| i as f64 * step).collect())
}

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// MUSIC pseudospectrum `1 / ‖Eₙᴴ a(f)‖²` over a uniform grid, where `Eₙ`
/// spans the eigenvectors of the `m − K` smallest eigenvalues of `R`.
///
/// If `R` has numerical rank `r < K` (coherent tones with no noise), the
/// `m − K` smallest eigenvalues are all zero and their eigenvectors are not
/// unique; `Eₙ` is then the whole numerical null space of dimension `m − r`.
///
/// Peaks are the `K` largest strict local maxima (plateaus resolve to their
/// lowest frequency). When the grid covers a whole period `[0, f_max)` the
/// spectrum is treated as circular. Fewer than `K` peaks are returned when
/// the spectrum has fewer local maxima.
pub fn pseudospectrum(
    r: &CMatrix,
    k: usize,
    layout: &SnapshotIndexLayout,
    f_max: f64,
    step: f64,
) -> Result<Pseudospectrum> {
    let m = layout.m();
    if r.nrows() != m || r.ncols() != m {
        return Err(Error::InvalidArgument(format!(
            "autocorrelation is {}x{}, layout has {m} rows",
            r.nrows(),
            r.ncols()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if k >= m {
        return Err(Error::KTooLarge { k, m });
    }
    let grid = frequency_grid(f_max, step)?;
    let eig = hermitian_eig(r)?;
    let cutoff = RANK_TOL * eig.values[0].max(0.0);
    let rank = eig.values.iter().filter(|&&v| v > cutoff).count();
    let signal_dim = k.min(rank);
    let noise_dim = m - signal_dim;
    let noise_adj = eig.vectors.columns(signal_dim, noise_dim).adjoint();

    let values: Vec<f64> = grid
        .par_iter()
        .map(|&f| {
            let proj = &noise_adj * steering(f / f_max, &layout.indices);
            1.0 / proj.norm_squared().max(f64::MIN_POSITIVE)
        })
        .collect();

    let circular = ((grid.len() as f64) * step - f_max).abs() <= 1e-9 * f_max;
    let mut peaks: Vec<f64> = pick_peaks(&values, k, circular)
        .into_iter()
        .map(|i| grid[i])
        .collect();
    peaks.sort_by(f64::total_cmp);
    Ok(Pseudospectrum {
        grid,
        values,
        peaks,
        noise_dim,
    })
}

/// Indices of the `k` largest strict local maxima, ties to the lower index.
fn pick_peaks(values: &[f64], k: usize, circular: bool) -> Vec<usize> {
    let n = values.len();
    let left = |i: usize| match i {
        0 if circular && n > 1 => values[n - 1],
        0 => f64::NEG_INFINITY,
        _ => values[i - 1],
    };
    let right = |i: usize| match i {
        _ if i + 1 < n => values[i + 1],
        _ if circular && n > 1 => values[0],
        _ => f64::NEG_INFINITY,
    };
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = values[i];
            // A plateau counts once, at its first point.
            v > left(i) && v >= right(i) && {
                let mut j = i;
                let mut clear = true;
                while right(j) == v {
                    j = (j + 1) % n;
                    if j == i {
                        clear = false;
                        break;
                    }
                }
                clear && v > right(j)
            }
        })
        .collect();
    maxima.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    maxima.truncate(k);
    maxima
}

/// Full pipeline from channel samples to the pseudospectrum.
pub fn estimate_spectrum(
    batches: &[SampleBatch],
    ratios: &[u32],
    f_max: f64,
    k: usize,
    step: f64,
    snapshots: usize,
) -> Result<Pseudospectrum> {
    let layout = build_layout(ratios)?;
    let x = assemble_snapshots(batches, &layout, snapshots, None)?;
    let r = sample_autocorrelation(&x);
    pseudospectrum(&r, k, &layout, f_max, step)
}

/// Estimated frequencies in ascending order.
pub fn estimate(
    batches: &[SampleBatch],
    ratios: &[u32],
    f_max: f64,
    k: usize,
    step: f64,
    snapshots: usize,
) -> Result<Vec<f64>> {
    Ok(estimate_spectrum(batches, ratios, f_max, k, step, snapshots)?.peaks)
}
