//! Post-hoc analysis of collapsing trajectories.
//!
//! A relative blow-up set is a run of consecutive particles whose gaps vanish at the fastest
//! common rate while the gaps bordering the run become negligible in comparison. Limits along a
//! sequence are replaced by statistics over the last `k_tail` recorded snapshots, with the
//! thresholds of [`BlowupOptions`] (they are copied into every reported set).
//!
//! Particle indices are 0-based and ranges are inclusive: `(l, r)` covers particles `l..=r`
//! and gaps `l..r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::SimulationResult;
use crate::model::Configuration;

/// Tail statistics used as stand-ins for sequence limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupOptions {
    /// Number of trailing snapshots examined.
    pub k_tail: usize,
    /// A boundary gap is negligible when the ratio inner/boundary ends below this; a ratio is
    /// bounded when it stays under its inverse.
    pub eps_ratio: f64,
    /// Absolute smallness of a vanishing gap. `None` means `1e-6` times the scale of the first
    /// snapshot.
    pub eps_abs: Option<f64>,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions {
            k_tail: 8,
            eps_ratio: 0.05,
            eps_abs: None,
        }
    }
}

impl BlowupOptions {
    pub fn with_eps_ratio(self, eps_ratio: f64) -> Self {
        BlowupOptions { eps_ratio, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpSet {
    /// First particle of the set.
    pub l: usize,
    /// Last particle of the set (inclusive).
    pub r: usize,
    /// Gaps inside the set, `l..r`.
    pub j_set: Vec<usize>,
    /// Gaps bordering the set on each side, when they exist.
    pub boundary: Vec<usize>,
    /// Tail-averaged ratios `g_i / g_k` for `i, k` in `j_set`.
    pub gap_ratios: Vec<Vec<f64>>,
    /// `Π_I = sqrt(Σ_{k∈J} g_k²)` over the tail snapshots.
    pub pi_norm_tail: Vec<f64>,
    /// Centered limiting shape with unit `Π`-norm.
    pub profile: Configuration,
    pub profile_converged: bool,
    /// Largest relative spread of a normalized gap over the tail.
    pub profile_oscillation: f64,
    /// Thresholds actually used (with `eps_abs` resolved).
    pub thresholds: BlowupOptions,
}

impl BlowUpSet {
    pub fn len(&self) -> usize {
        self.r - self.l + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> (usize, usize) {
        (self.l, self.r)
    }

    /// The particle range numbered from 1.
    pub fn one_based(&self) -> (usize, usize) {
        (self.l + 1, self.r + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakBlowUpReport {
    /// Maximal particle ranges `(l, r)` whose gaps all fall below the tolerance.
    pub sets: Vec<(usize, usize)>,
    pub t_end: f64,
    /// Minimum of every gap over the examined tail.
    pub min_gap_history: Vec<f64>,
    pub gap_tol: f64,
}

impl WeakBlowUpReport {
    /// The range containing particles `l..=r`, if any.
    pub fn containing(&self, l: usize, r: usize) -> Option<(usize, usize)> {
        self.sets.iter().copied().find(|&(a, b)| a <= l && r <= b)
    }
}

fn gap_matrix(tail: &[Configuration]) -> Result<Vec<Vec<f64>>> {
    let n = tail[0].len();
    if tail.iter().any(|c| c.len() != n) {
        return Err(Error::Input("snapshots have different particle counts".into()));
    }
    Ok(tail.iter().map(|c| c.gaps()).collect())
}

fn pi_norm(gaps: &[f64], l: usize, r: usize) -> f64 {
    gaps[l..r].iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Detects relative blow-up sets in the terminal segment of a trajectory.
pub fn detect_relative_blowup(snapshots: &[Configuration], opts: &BlowupOptions) -> Result<Vec<BlowUpSet>> {
    let k = opts.k_tail;
    if k < 2 {
        return Err(Error::Input("k_tail must be at least 2".into()));
    }
    if snapshots.len() < k {
        return Err(Error::Input(format!(
            "need at least {k} snapshots, got {}",
            snapshots.len()
        )));
    }
    if !(opts.eps_ratio > 0.0 && opts.eps_ratio < 1.0) {
        return Err(Error::Input(format!(
            "eps_ratio must lie in (0, 1), got {}",
            opts.eps_ratio
        )));
    }
    let eps_abs = opts.eps_abs.unwrap_or(1e-6 * snapshots[0].scale());
    let thresholds = BlowupOptions {
        eps_abs: Some(eps_abs),
        ..*opts
    };
    let tail = &snapshots[snapshots.len() - k..];
    let g = gap_matrix(tail)?;
    let ng = g[0].len();
    let first = &g[0];
    let last = &g[k - 1];

    let vanishing = |i: usize| {
        let monotone = g.windows(2).all(|w| w[1][i] <= w[0][i] * (1.0 + 1e-9));
        monotone && (last[i] < eps_abs || last[i] <= 0.5 * first[i])
    };
    // g_i / g_j stays bounded: either small throughout or changing much more slowly than g_i
    let bounded = |i: usize, j: usize| {
        let max_ratio = g.iter().map(|row| row[i] / row[j]).fold(0.0_f64, f64::max);
        if max_ratio < 1.0 / opts.eps_ratio {
            return true;
        }
        let dlog_ratio = ((last[i] / last[j]) / (first[i] / first[j])).ln().abs();
        let dlog_gap = (last[i] / first[i]).ln().abs();
        dlog_ratio <= 0.25 * dlog_gap
    };
    let candidate: Vec<bool> = (0..ng)
        .map(|i| vanishing(i) && (0..ng).all(|j| j == i || bounded(i, j)))
        .collect();

    let mut sets = Vec::new();
    let mut a = 0;
    while a < ng {
        if !candidate[a] {
            a += 1;
            continue;
        }
        let mut b = a;
        while b + 1 < ng && candidate[b + 1] {
            b += 1;
        }
        let (l, r) = (a, b + 1);
        let boundary: Vec<usize> = [a.checked_sub(1), (b + 1 < ng).then_some(b + 1)]
            .into_iter()
            .flatten()
            .collect();
        let negligible = boundary.iter().all(|&j| {
            (a..=b).all(|i| {
                let r_first = first[i] / first[j];
                let r_last = last[i] / last[j];
                r_last < opts.eps_ratio && r_last <= r_first
            })
        });
        if negligible {
            sets.push(build_set(tail, &g, l, r, boundary, thresholds));
        }
        a = b + 1;
    }
    Ok(sets)
}

fn build_set(
    tail: &[Configuration],
    g: &[Vec<f64>],
    l: usize,
    r: usize,
    boundary: Vec<usize>,
    thresholds: BlowupOptions,
) -> BlowUpSet {
    let j_set: Vec<usize> = (l..r).collect();
    let k = g.len() as f64;
    let gap_ratios = j_set
        .iter()
        .map(|&i| {
            j_set
                .iter()
                .map(|&j| {
                    if i == j {
                        1.0
                    } else {
                        g.iter().map(|row| row[i] / row[j]).sum::<f64>() / k
                    }
                })
                .collect()
        })
        .collect();
    let pi_norm_tail = g.iter().map(|row| pi_norm(row, l, r)).collect();
    let (profile, profile_converged, profile_oscillation) = match settle(tail, l, r) {
        Ok((z, osc)) => (z, true, osc),
        Err((z, osc)) => (z, false, osc),
    };
    BlowUpSet {
        l,
        r,
        j_set,
        boundary,
        gap_ratios,
        pi_norm_tail,
        profile,
        profile_converged,
        profile_oscillation,
        thresholds,
    }
}

/// Normalized tail profile and its oscillation; `Err` carries the last profile when the
/// oscillation exceeds 10%.
fn settle(
    tail: &[Configuration],
    l: usize,
    r: usize,
) -> std::result::Result<(Configuration, f64), (Configuration, f64)> {
    let normalized: Vec<Vec<f64>> = tail
        .iter()
        .map(|c| {
            let gaps = c.gaps();
            let pi = pi_norm(&gaps, l, r);
            gaps[l..r].iter().map(|v| v / pi).collect()
        })
        .collect();
    let p = r - l;
    let mut osc = 0.0_f64;
    for k in 0..p {
        let col = normalized.iter().map(|row| row[k]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = col.clone().fold(f64::INFINITY, f64::min);
        let mean = col.sum::<f64>() / normalized.len() as f64;
        osc = osc.max((max - min) / mean);
    }
    let last = normalized.last().expect("tail is nonempty");
    let z = Configuration::from_gaps(last).expect("normalized gaps are positive");
    if osc > 0.1 {
        Err((z, osc))
    } else {
        Ok((z, osc))
    }
}

/// Limiting `Π`-normalized shape of the particles `range.0..=range.1` over the last 8
/// snapshots (all of them when fewer are given).
pub fn limiting_profile(snapshots: &[Configuration], range: (usize, usize)) -> Result<Configuration> {
    let (l, r) = range;
    if snapshots.len() < 2 {
        return Err(Error::Input("need at least 2 snapshots".into()));
    }
    let n = snapshots[0].len();
    if !(l < r && r < n) {
        return Err(Error::Input(format!(
            "invalid particle range ({l}, {r}) for {n} particles"
        )));
    }
    let tail = &snapshots[snapshots.len().saturating_sub(8)..];
    gap_matrix(tail)?;
    match settle(tail, l, r) {
        Ok((z, _)) => Ok(z),
        Err((z, oscillation)) => Err(Error::NonConvergent {
            oscillation,
            last_profile: z.into_vec(),
        }),
    }
}

/// Shrink factor over the final 10% of the snapshots that marks a gap as collapsing.
pub const WEAK_SHRINK: f64 = 1e-2;

/// Weak blow-up ranges of a finished simulation, from its recorded snapshots.
pub fn detect_weak_blowup(result: &SimulationResult, gap_tol: f64) -> WeakBlowUpReport {
    weak_blowup_from_snapshots(&result.snapshots, gap_tol)
}

/// Flags the gaps whose minimum over the final 10% of the snapshots is below `gap_tol`, or at
/// most [`WEAK_SHRINK`] times their value at the start of that window, and groups them into
/// maximal particle ranges.
pub fn weak_blowup_from_snapshots(snapshots: &[(f64, Configuration)], gap_tol: f64) -> WeakBlowUpReport {
    let Some((t_end, last)) = snapshots.last() else {
        return WeakBlowUpReport {
            sets: Vec::new(),
            t_end: f64::NAN,
            min_gap_history: Vec::new(),
            gap_tol,
        };
    };
    let count = snapshots.len().div_ceil(10).max(1);
    let tail = &snapshots[snapshots.len() - count..];
    let ng = last.len() - 1;
    let mut min_gap_history = vec![f64::INFINITY; ng];
    for (_, c) in tail {
        for (m, g) in min_gap_history.iter_mut().zip(c.gaps()) {
            *m = m.min(g);
        }
    }
    // a run stopped by its own gap floor leaves the slower gaps of a collapsing block above
    // any absolute tolerance, so a large shrink over the tail also counts
    let first = tail[0].1.gaps();
    let collapsing: Vec<bool> = min_gap_history
        .iter()
        .zip(&first)
        .map(|(&m, &g0)| m < gap_tol || m <= WEAK_SHRINK * g0)
        .collect();
    let mut sets = Vec::new();
    let mut a = 0;
    while a < ng {
        if !collapsing[a] {
            a += 1;
            continue;
        }
        let mut b = a;
        while b + 1 < ng && collapsing[b + 1] {
            b += 1;
        }
        sets.push((a, b + 1));
        a = b + 1;
    }
    WeakBlowUpReport {
        sets,
        t_end: *t_end,
        min_gap_history,
        gap_tol,
    }
}

/// Centers every snapshot on the mean of the particles `range.0..=range.1` and divides by their
/// current `Π`-norm. Particles outside the range are transformed the same way.
pub fn rescale_trajectory(
    snapshots: &[(f64, Configuration)],
    range: (usize, usize),
) -> Result<Vec<(f64, Vec<f64>)>> {
    let (l, r) = range;
    snapshots
        .iter()
        .map(|(t, c)| {
            if !(l < r && r < c.len()) {
                return Err(Error::Input(format!(
                    "invalid particle range ({l}, {r}) for {} particles",
                    c.len()
                )));
            }
            let gaps = c.gaps();
            let pi = pi_norm(&gaps, l, r);
            let center = c[l..=r].iter().sum::<f64>() / (r - l + 1) as f64;
            Ok((*t, c.iter().map(|x| (x - center) / pi).collect()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(gaps: impl Fn(f64) -> Vec<f64>) -> Vec<Configuration> {
        (0..8)
            .map(|k| Configuration::from_gaps(&gaps(10f64.powi(k + 3))).unwrap())
            .collect()
    }

    #[test]
    fn too_few_snapshots() {
        let s = seq(|n| vec![1.0 / n, 1.0]);
        let r = detect_relative_blowup(&s[..5], &BlowupOptions::default());
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn nothing_vanishes() {
        let s = seq(|_| vec![1.0, 2.0, 1.0]);
        assert!(detect_relative_blowup(&s, &BlowupOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rescaled_self_similar_collapse_is_static() {
        let s: Vec<(f64, Configuration)> = (1..6)
            .map(|k| {
                let c = 1.0 / k as f64;
                (k as f64, Configuration::from_gaps(&[c, 2.0 * c, c]).unwrap())
            })
            .collect();
        let out = rescale_trajectory(&s, (0, 3)).unwrap();
        for (_, y) in &out[1..] {
            for (a, b) in y.iter().zip(&out[0].1) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
