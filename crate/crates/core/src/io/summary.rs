//! Run summary as a JSON object.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blowup::{BlowUpSet, WeakBlowUpReport};
use crate::error::Result;
use crate::flow::{ChiScaling, SimulationResult, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryParams {
    pub m: f64,
    pub chi: f64,
    pub alpha: f64,
    pub n: usize,
    pub chi_scaling: ChiScaling,
    /// Coefficient of the ordered pair sum used by the kernels.
    pub effective_chi: f64,
    pub mobility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTermination {
    #[serde(rename = "type")]
    pub kind: String,
    /// `null` when the run completed (infinite maximal time).
    pub t_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub last_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub t_of_max_f2: f64,
    pub max_f2: f64,
    /// First time the energy is negative: `0` when it starts negative, `null` when it never is.
    pub t_energy_sign_change: Option<f64>,
}

/// One analyzed blow-up set, particles numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySet {
    pub first: usize,
    pub last: usize,
    pub size: usize,
    pub profile: Vec<f64>,
    pub profile_converged: bool,
}

impl From<&BlowUpSet> for SummarySet {
    fn from(s: &BlowUpSet) -> Self {
        let (first, last) = s.one_based();
        SummarySet {
            first,
            last,
            size: s.len(),
            profile: s.profile.to_vec(),
            profile_converged: s.profile_converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub params: SummaryParams,
    pub termination: SummaryTermination,
    pub extrema: Extrema,
    pub rows: usize,
    pub t_end: f64,
    /// `null` when the trajectory was not analyzed.
    pub blowup_sets: Option<Vec<SummarySet>>,
    /// Weak blow-up ranges (1-based, inclusive), when analyzed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weak_blowup_sets: Option<Vec<(usize, usize)>>,
    /// Threshold `C_N` for the effective coupling, when computed.
    pub c_n: Option<f64>,
}

/// Extra analysis attached to a summary.
#[derive(Debug, Clone, Default)]
pub struct SummaryContext<'a> {
    pub c_n: Option<f64>,
    pub blowup_sets: Option<&'a [BlowUpSet]>,
    pub weak: Option<&'a WeakBlowUpReport>,
}

pub fn extrema(result: &SimulationResult) -> Extrema {
    let (t_of_max_f2, max_f2) = result.rows.iter().fold((f64::NAN, f64::NEG_INFINITY), |acc, r| {
        if r.f2 > acc.1 {
            (r.t, r.f2)
        } else {
            acc
        }
    });
    let t_energy_sign_change = match result.rows.first() {
        Some(r0) if r0.energy < 0.0 => Some(0.0),
        _ => result.rows.windows(2).find(|w| w[1].energy < 0.0).map(|w| {
            // linear interpolation of the zero crossing between the two rows
            let (a, b) = (&w[0], &w[1]);
            a.t + (b.t - a.t) * a.energy / (a.energy - b.energy)
        }),
    };
    Extrema {
        t_of_max_f2,
        max_f2,
        t_energy_sign_change,
    }
}

pub fn build_summary(result: &SimulationResult, ctx: &SummaryContext) -> Summary {
    let m = &result.model;
    let termination = match &result.termination {
        Termination::Completed { .. } => SummaryTermination {
            kind: "completed".into(),
            t_estimate: None,
            last_dt: None,
            min_gap: None,
            reason: None,
        },
        Termination::BlowUp {
            t_estimate,
            last_dt,
            min_gap,
        } => SummaryTermination {
            kind: "blowup".into(),
            t_estimate: Some(*t_estimate),
            last_dt: Some(*last_dt),
            min_gap: Some(*min_gap),
            reason: None,
        },
        Termination::Failure { reason } => SummaryTermination {
            kind: "failure".into(),
            t_estimate: None,
            last_dt: None,
            min_gap: None,
            reason: Some(reason.clone()),
        },
    };
    Summary {
        params: SummaryParams {
            m: m.m,
            chi: m.chi,
            alpha: m.alpha,
            n: m.n,
            chi_scaling: m.chi_scaling,
            effective_chi: m.effective_chi(),
            mobility: m.mobility(),
        },
        termination,
        extrema: extrema(result),
        rows: result.rows.len(),
        t_end: result.rows.last().map_or(0.0, |r| r.t),
        blowup_sets: ctx
            .blowup_sets
            .map(|sets| sets.iter().map(SummarySet::from).collect()),
        weak_blowup_sets: ctx
            .weak
            .map(|w| w.sets.iter().map(|&(l, r)| (l + 1, r + 1)).collect()),
        c_n: ctx.c_n,
    }
}

pub fn write_summary_json(result: &SimulationResult, ctx: &SummaryContext, path: &Path) -> Result<()> {
    let summary = build_summary(result, ctx);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
