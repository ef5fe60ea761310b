//! Frequency unfolding and two-channel candidate matching.
//!
//! A channel sampling at `f_max / a` sees a tone at `f` folded to
//! `f mod (f_max / a)`, which unfolds into `a` equally spaced candidates.
//! Two channels with coprime ratios `a`, `b` pin down a tone as the common
//! candidate, but when two tones are separated by a multiple of
//! `f_max / (a b)` a cross pairing of components also produces a common
//! candidate and the match is no longer unique. With three pairwise-coprime
//! ratios no separation below `f_max` is a multiple of all three pairwise
//! units at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `K` for which [`match_two_channels`] enumerates all `K!` pairings.
pub const MAX_MATCH_COMPONENTS: usize = 8;

/// `a·u + b·v = d` with `d = gcd(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BezoutResult {
    pub d: u64,
    pub u: i64,
    pub v: i64,
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn pairwise_coprime(ratios: &[u32]) -> bool {
    ratios.iter().enumerate().all(|(i, &a)| {
        ratios[i + 1..]
            .iter()
            .all(|&b| gcd(a.into(), b.into()) == 1)
    })
}

/// Extended Euclid. Among all Bézout pairs the one with the smallest `|v|`
/// is returned (ties go to the positive `v`), so `(1, 1)` gives `u = 1, v = 0`.
pub fn extended_gcd(a: u64, b: u64) -> Result<BezoutResult> {
    if a == 0 || b == 0 {
        return Err(Error::InvalidArgument(
            "extended_gcd needs positive inputs".into(),
        ));
    }
    let (mut old_r, mut r) = (a as i128, b as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    let d = old_r;
    // General solution: (u + k·b/d, v − k·a/d).
    let step_v = a as i128 / d;
    let step_u = b as i128 / d;
    let mut v = old_t.rem_euclid(step_v);
    if 2 * v > step_v {
        v -= step_v;
    }
    let k = (old_t - v) / step_v;
    let u = old_s + k * step_u;
    debug_assert_eq!(a as i128 * u + b as i128 * v, d);
    Ok(BezoutResult {
        d: d as u64,
        u: u as i64,
        v: v as i64,
    })
}

/// Solves `b·α − a·β = rhs` for `α ∈ [0, a)`, `β ∈ [0, b)` with coprime
/// `a`, `b`. The solution is unique when it exists.
pub fn solve_alias_indices(a: u32, b: u32, rhs: i64) -> Result<Option<(u32, u32)>> {
    let bz = extended_gcd(a.into(), b.into())?;
    if bz.d != 1 {
        return Err(Error::NonCoprimeRatios { a, b });
    }
    let (a, b) = (i128::from(a), i128::from(b));
    // b·v ≡ 1 (mod a), so α ≡ rhs·v (mod a).
    let alpha = (i128::from(rhs) * i128::from(bz.v)).rem_euclid(a);
    let beta = (b * alpha - i128::from(rhs)) / a;
    Ok((0..b)
        .contains(&beta)
        .then_some((alpha as u32, beta as u32)))
}

/// All frequencies below `f_max` consistent with one folded observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub folded: f64,
    pub ratio: u32,
    pub f_max: f64,
    pub candidates: Vec<f64>,
}

pub fn unfold(folded: f64, ratio: u32, f_max: f64) -> Result<CandidateSet> {
    if ratio == 0 {
        return Err(Error::InvalidArgument("ratio must be at least 1".into()));
    }
    let rate = f_max / f64::from(ratio);
    if !(folded >= 0.0 && folded < rate) {
        return Err(Error::FoldedOutOfRange { folded, rate });
    }
    let candidates = (0..ratio)
        .map(|alpha| folded + f64::from(alpha) * rate)
        .collect();
    Ok(CandidateSet {
        folded,
        ratio,
        f_max,
        candidates,
    })
}

/// A pair of true components whose separation is a multiple of the
/// two-channel ambiguity unit `f_max / (a b)`. `l` and `m` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub l: usize,
    pub m: usize,
    pub delta_f: f64,
    pub p: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Each hypothesis lists its matched frequencies in ascending order.
    pub assignments: Vec<Vec<f64>>,
    pub ambiguous: bool,
    #[serde(rename = "collisions")]
    pub colliding_pairs: Vec<Collision>,
}

/// Pairs every component of channel A with one of channel B so that each
/// pair's candidate sets share a frequency (within `tol`), over all `K!`
/// bijections.
///
/// Distinct frequency sets are reported in enumeration order, identity
/// pairing first. Collisions are diagnosed on the first reported
/// assignment.
pub fn match_two_channels(
    folded_a: &[f64],
    folded_b: &[f64],
    ratio_a: u32,
    ratio_b: u32,
    f_max: f64,
    tol: f64,
) -> Result<MatchReport> {
    let k = folded_a.len();
    if k == 0 || folded_b.len() != k {
        return Err(Error::InvalidArgument(format!(
            "need equal, nonzero component counts, got {} and {}",
            k,
            folded_b.len()
        )));
    }
    if k > MAX_MATCH_COMPONENTS {
        return Err(Error::TooManyComponents {
            k,
            max: MAX_MATCH_COMPONENTS,
        });
    }
    if gcd(ratio_a.into(), ratio_b.into()) != 1 {
        return Err(Error::NonCoprimeRatios {
            a: ratio_a,
            b: ratio_b,
        });
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }

    let cands_a = folded_a
        .iter()
        .map(|&f| unfold(f, ratio_a, f_max))
        .collect::<Result<Vec<_>>>()?;
    let cands_b = folded_b
        .iter()
        .map(|&f| unfold(f, ratio_b, f_max))
        .collect::<Result<Vec<_>>>()?;

    // common[m][l]: frequencies shared by component m of A and l of B.
    let common: Vec<Vec<Vec<f64>>> = cands_a
        .iter()
        .map(|ca| {
            cands_b
                .iter()
                .map(|cb| intersect(&ca.candidates, &cb.candidates, tol))
                .collect()
        })
        .collect();

    let mut assignments: Vec<Vec<f64>> = Vec::new();
    for perm in permutations(k) {
        let choices: Vec<&[f64]> = perm
            .iter()
            .enumerate()
            .map(|(m, &l)| common[m][l].as_slice())
            .collect();
        for mut hypothesis in cartesian(&choices) {
            hypothesis.sort_by(f64::total_cmp);
            if !assignments.iter().any(|h| same_set(h, &hypothesis, tol)) {
                assignments.push(hypothesis);
            }
        }
    }
    if assignments.is_empty() {
        return Err(Error::NoConsistentAssignment);
    }

    let colliding_pairs =
        predict_collision(&assignments[0], ratio_a, ratio_b, f_max, tol.max(1e-9))?;
    Ok(MatchReport {
        ambiguous: assignments.len() > 1,
        assignments,
        colliding_pairs,
    })
}

fn intersect(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = a
        .iter()
        .flat_map(|&x| {
            b.iter()
                .filter(move |&&y| (x - y).abs() <= tol)
                .map(move |&y| 0.5 * (x + y))
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn same_set(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Lexicographic permutations of `0..k`.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        out.push(perm.clone());
        let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
    out
}

fn cartesian(choices: &[&[f64]]) -> Vec<Vec<f64>> {
    choices.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&x| {
                    let mut next = prefix.clone();
                    next.push(x);
                    next
                })
            })
            .collect()
    })
}

/// Unordered pairs `(l, m)` whose separation is within `tol` of a positive
/// multiple `p` of `f_max / (ratio_a · ratio_b)`.
pub fn predict_collision(
    freqs: &[f64],
    ratio_a: u32,
    ratio_b: u32,
    f_max: f64,
    tol: f64,
) -> Result<Vec<Collision>> {
    if gcd(ratio_a.into(), ratio_b.into()) != 1 {
        return Err(Error::NonCoprimeRatios {
            a: ratio_a,
            b: ratio_b,
        });
    }
    if let Some(&f) = freqs.iter().find(|&&f| !(f > 0.0 && f < f_max)) {
        return Err(Error::FrequencyOutOfRange { freq: f, f_max });
    }
    let unit = f_max / (f64::from(ratio_a) * f64::from(ratio_b));
    let mut out = Vec::new();
    for (i, &fl) in freqs.iter().enumerate() {
        for (j, &fm) in freqs.iter().enumerate().skip(i + 1) {
            let delta_f = (fl - fm).abs();
            let p = (delta_f / unit).round();
            if p >= 1.0 && (delta_f - p * unit).abs() <= tol {
                out.push(Collision {
                    l: i + 1,
                    m: j + 1,
                    delta_f,
                    p: p as u64,
                });
            }
        }
    }
    Ok(out)
}

/// Checks that no separation in `(0, f_max)` is simultaneously a multiple of
/// `f_max/(ab)`, `f_max/(ac)` and `f_max/(bc)`.
///
/// Every exact multiple `p·f_max/(ab)` is tested in integer arithmetic and
/// the interval is additionally scanned at `grid_step` in floating point.
pub fn verify_triple(
    ratio_a: u32,
    ratio_b: u32,
    ratio_c: u32,
    f_max: f64,
    grid_step: f64,
) -> Result<bool> {
    let ratios = [ratio_a, ratio_b, ratio_c];
    if ratios.contains(&0) || !pairwise_coprime(&ratios) {
        return Err(Error::NonPairwiseCoprime(ratios.to_vec()));
    }
    if !(grid_step > 0.0 && f_max > 0.0) {
        return Err(Error::InvalidArgument(
            "grid_step and f_max must be positive".into(),
        ));
    }
    let (a, b, c) = (u64::from(ratio_a), u64::from(ratio_b), u64::from(ratio_c));

    // Δf = p·f_max/(ab) is a multiple of f_max/(ac) iff b | p·c, and of
    // f_max/(bc) iff a | p·c.
    let exact_hit = (1..a * b).any(|p| (p * c) % b == 0 && (p * c) % a == 0);
    if exact_hit {
        return Ok(false);
    }

    let units = [a * b, a * c, b * c].map(|n| n as f64 / f_max);
    let on_lattice = |delta: f64| {
        units.iter().all(|&u| {
            let x = delta * u;
            (x - x.round()).abs() <= 1e-9 * x.max(1.0)
        })
    };
    // Δf = f_max itself lies on every lattice; keep roundoff from admitting it.
    let steps = (f_max / grid_step - 1e-9).ceil() as u64;
    let scan_hit = (1..steps)
        .map(|k| k as f64 * grid_step)
        .take_while(|&d| d < f_max * (1.0 - 1e-12))
        .any(on_lattice);
    Ok(!scan_hit)
}
