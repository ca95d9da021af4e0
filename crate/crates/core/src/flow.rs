//! Time integration of the particle gradient flow `dX/dt = -μ ∇F(X)`.
//!
//! The production integrator is implicit Euler, i.e. one minimizing-movement step
//!
//! ```text
//! Z - X + μ dt ∇F(Z) = 0
//! ```
//!
//! solved by Newton's method with an analytic Jacobian `I + μ dt Hess F(Z)`. The mobility `μ` is
//! 1 unless the run uses the mass-normalized coupling convention (see [`ChiScaling`]).
//! A classical RK4 step is kept as a reference integrator for the moment laws.
//!
//! [`simulate`] follows a piecewise-constant step schedule, halves the step whenever Newton fails
//! and grows it back by a fixed factor after every success. A run is declared a blow-up when the
//! step falls under `dt_min` or the smallest gap under `gap_min`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::profile::InitialProfile;
use crate::model::{center, kernels, Configuration, EnergyBreakdown, ModelParams};

/// How the coupling `chi` of a run is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiScaling {
    /// `chi` is the coefficient of the ordered pair sum of the discrete functional, time is the
    /// time of `dX/dt = -∇F`.
    #[default]
    Discrete,
    /// `chi` is a mass-normalized coupling, as when the particle system approximates a density
    /// of unit mass carried by `N` particles of mass `1/N` and pairs are counted once. The
    /// discrete coupling becomes `chi * N^(m-2) / 2` and the flow runs with mobility
    /// `N^(1-m)`.
    Mass,
}

/// Model section of a run: parameters as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m: f64,
    pub chi: f64,
    pub alpha: f64,
    pub n: usize,
    pub chi_scaling: ChiScaling,
}

impl ModelSpec {
    pub fn new(m: f64, chi: f64, alpha: f64, n: usize) -> Self {
        ModelSpec {
            m,
            chi,
            alpha,
            n,
            chi_scaling: ChiScaling::Discrete,
        }
    }

    pub fn with_scaling(self, chi_scaling: ChiScaling) -> Self {
        ModelSpec { chi_scaling, ..self }
    }

    /// Coefficient of the ordered pair sum actually used by the kernels.
    pub fn effective_chi(&self) -> f64 {
        match self.chi_scaling {
            ChiScaling::Discrete => self.chi,
            ChiScaling::Mass => 0.5 * self.chi * (self.n as f64).powf(self.m - 2.0),
        }
    }

    pub fn mobility(&self) -> f64 {
        match self.chi_scaling {
            ChiScaling::Discrete => 1.0,
            ChiScaling::Mass => (self.n as f64).powf(1.0 - self.m),
        }
    }

    /// Kernel parameters for the power-law functional (`m > 1`).
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.m, self.effective_chi(), self.alpha, self.n)
    }

    pub fn is_logarithmic(&self) -> bool {
        self.m == 1.0
    }
}

/// One stage of the step schedule: use `dt` while `t < t_until`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtStage {
    pub t_until: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtSchedule {
    pub stages: Vec<DtStage>,
    /// Factor applied to the step after every accepted step, capped by the schedule.
    pub growth: f64,
}

impl DtSchedule {
    pub fn constant(dt: f64) -> Self {
        DtSchedule {
            stages: vec![DtStage {
                t_until: f64::INFINITY,
                dt,
            }],
            growth: 1.3,
        }
    }

    pub fn new(stages: Vec<(f64, f64)>) -> Self {
        DtSchedule {
            stages: stages
                .into_iter()
                .map(|(t_until, dt)| DtStage { t_until, dt })
                .collect(),
            growth: 1.3,
        }
    }

    /// Scheduled step at time `t`. Past the last stage the last step is kept.
    pub fn dt_at(&self, t: f64) -> f64 {
        for s in &self.stages {
            if t < s.t_until - 1e-9 * s.dt {
                return s.dt;
            }
        }
        self.stages.last().map_or(f64::NAN, |s| s.dt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::validation("time.schedule", "needs at least one stage"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, s) in self.stages.iter().enumerate() {
            if !(s.dt.is_finite() && s.dt > 0.0) {
                return Err(Error::validation(
                    format!("time.schedule[{i}].dt"),
                    format!("must be > 0, got {}", s.dt),
                ));
            }
            if s.t_until.is_nan() || s.t_until <= prev {
                return Err(Error::validation(
                    format!("time.schedule[{i}].t_until"),
                    "must be strictly increasing",
                ));
            }
            prev = s.t_until;
        }
        if !(self.growth.is_finite() && self.growth >= 1.0) {
            return Err(Error::validation("time.growth", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Tolerance on the Euclidean norm of the implicit-Euler residual.
    pub tol: f64,
    /// Halve Newton updates that would break the ordering of the particles.
    pub damping: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iters: 50,
            tol: 1e-10,
            damping: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopOptions {
    /// Blow-up is declared below this gap. `None` means `1e-9` times the initial scale.
    pub gap_min: Option<f64>,
    pub dt_min: f64,
}

impl Default for StopOptions {
    fn default() -> Self {
        StopOptions {
            gap_min: None,
            dt_min: 1e-10,
        }
    }
}

/// Everything needed to reproduce one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub initial: InitialProfile,
    pub schedule: DtSchedule,
    pub t_max: f64,
    pub newton: NewtonOptions,
    pub stop: StopOptions,
    pub record_every: usize,
}

impl RunSpec {
    pub fn new(model: ModelSpec, initial: InitialProfile, schedule: DtSchedule, t_max: f64) -> Self {
        RunSpec {
            model,
            initial,
            schedule,
            t_max,
            newton: NewtonOptions::default(),
            stop: StopOptions::default(),
            record_every: 1,
        }
    }

    /// The reference double-bump run: `m = 1.2`, mass-normalized `chi = 1.45`, `dt = 0.05` up to
    /// `t = 4`, then `0.5`.
    pub fn double_bump(n: usize) -> Self {
        RunSpec::new(
            ModelSpec::new(1.2, 1.45, 0.0, n).with_scaling(ChiScaling::Mass),
            InitialProfile::double_bump(),
            DtSchedule::new(vec![(4.0, 0.05), (f64::INFINITY, 0.5)]),
            5000.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(m.m.is_finite() && m.m >= 1.0) {
            return Err(Error::validation("model.m", format!("must be >= 1, got {}", m.m)));
        }
        if !(m.chi.is_finite() && m.chi > 0.0) {
            return Err(Error::validation(
                "model.chi",
                format!("must be > 0, got {}", m.chi),
            ));
        }
        if !m.alpha.is_finite() {
            return Err(Error::validation("model.alpha", "must be finite"));
        }
        if m.n < 2 {
            return Err(Error::validation("model.n", "must be at least 2"));
        }
        if m.is_logarithmic() && m.alpha != 0.0 {
            return Err(Error::validation("model.alpha", "must be 0 when m = 1"));
        }
        self.initial.validate("initial")?;
        if let InitialProfile::Explicit { positions } = &self.initial {
            if positions.len() != m.n {
                return Err(Error::validation(
                    "initial.positions",
                    format!("expected {} positions, got {}", m.n, positions.len()),
                ));
            }
        }
        self.schedule.validate()?;
        if !(self.t_max > 0.0) || self.t_max.is_nan() {
            return Err(Error::validation("time.t_max", "must be > 0"));
        }
        if self.newton.max_iters == 0 {
            return Err(Error::validation("newton.max_iters", "must be at least 1"));
        }
        if !(self.newton.tol.is_finite() && self.newton.tol > 0.0) {
            return Err(Error::validation("newton.tol", "must be > 0"));
        }
        if let Some(g) = self.stop.gap_min {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::validation("stop.gap_min", "must be > 0"));
            }
        }
        if !(self.stop.dt_min.is_finite() && self.stop.dt_min > 0.0) {
            return Err(Error::validation("stop.dt_min", "must be > 0"));
        }
        if self.record_every == 0 {
            return Err(Error::validation("output.record_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: Configuration,
    pub newton_iters: usize,
    pub converged: bool,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    /// Step that produced this row (0 for the initial row).
    pub dt: f64,
    pub energy: f64,
    pub internal: f64,
    pub interaction: f64,
    pub f2: f64,
    pub fmp1: f64,
    pub min_gap: f64,
    /// Cauchy–Schwarz deficit at `X/|X|`.
    pub h_of_y: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Termination {
    Completed {
        t_max: f64,
    },
    #[serde(rename = "blowup")]
    BlowUp {
        t_estimate: f64,
        last_dt: f64,
        min_gap: f64,
    },
    Failure {
        reason: String,
    },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed { .. } => "completed",
            Termination::BlowUp { .. } => "blowup",
            Termination::Failure { .. } => "failure",
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Termination::BlowUp { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub model: ModelSpec,
    pub mobility: f64,
    pub initial_scale: f64,
    pub rows: Vec<DiagnosticsRow>,
    pub snapshots: Vec<(f64, Configuration)>,
    pub termination: Termination,
    /// Last accepted time for a blow-up, `+∞` when the run completed.
    pub maximal_time_estimate: f64,
    /// `(t_mid, (f2(t+dt) - f2(t))/dt)` for every accepted step.
    pub f2_slopes: Vec<(f64, f64)>,
}

impl SimulationResult {
    pub fn configurations(&self) -> Vec<Configuration> {
        self.snapshots.iter().map(|(_, c)| c.clone()).collect()
    }
}

/// Energy functional driving a flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    Power(ModelParams),
    Log { chi: f64 },
}

impl Functional {
    fn exponent(&self) -> f64 {
        match self {
            Functional::Power(p) => p.m,
            Functional::Log { .. } => 1.0,
        }
    }

    fn chi(&self) -> f64 {
        match self {
            Functional::Power(p) => p.chi,
            Functional::Log { chi } => *chi,
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            Functional::Power(p) => p.alpha,
            Functional::Log { .. } => 0.0,
        }
    }

    pub fn energy(&self, x: &[f64]) -> Result<EnergyBreakdown> {
        match self {
            Functional::Power(p) => kernels::energy(x, p),
            Functional::Log { chi } => kernels::energy_log(x, *chi),
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        kernels::gradient_into(x, self.exponent(), self.chi(), self.alpha(), out)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g)?;
        Ok(g)
    }

    /// Cauchy–Schwarz deficit `|∇G(Y)|² - (Y·∇G(Y))²` at `Y = X/|X|`, with `G` the functional
    /// without confinement. For `m > 1` this equals `|∇F(Y)|² - ((m-1)F(Y))²`.
    pub fn deficit_at(&self, x: &[f64]) -> Result<f64> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let mut g = vec![0.0; y.len()];
        kernels::gradient_into(&y, self.exponent(), self.chi(), 0.0, &mut g)?;
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let proj: f64 = match self {
            Functional::Power(p) => {
                let e = kernels::energy(&y, &p.with_alpha(0.0))?;
                (p.m - 1.0) * e.total
            }
            Functional::Log { .. } => g.iter().zip(&y).map(|(a, b)| a * b).sum(),
        };
        Ok(g2 - proj * proj)
    }
}

/// One implicit-Euler step of `dX/dt = -∇F(X)`, warm-started at `x`.
pub fn implicit_step(
    x: &Configuration,
    dt: f64,
    p: &ModelParams,
    opts: &NewtonOptions,
) -> Result<StepResult> {
    p.validate()?;
    if x.len() != p.n {
        return Err(Error::domain("configuration length does not match params.n"));
    }
    implicit_step_with(x, dt, &Functional::Power(*p), opts, None)
}

/// Implicit step for any [`Functional`], optionally starting Newton from `guess`.
pub fn implicit_step_with(
    x: &Configuration,
    dt: f64,
    f: &Functional,
    opts: &NewtonOptions,
    guess: Option<Vec<f64>>,
) -> Result<StepResult> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(format!("time step must be > 0, got {dt}")));
    }
    let n = x.len();
    let mut z = guess.unwrap_or_else(|| x.to_vec());
    let mut grad = vec![0.0; n];
    let mut residual = DVector::<f64>::zeros(n);
    let mut rnorm = f64::INFINITY;
    let not_converged = |iters, residual| Error::NotConverged { iters, residual };

    for iter in 0..=opts.max_iters {
        if f.gradient_into(&z, &mut grad).is_err() {
            return Err(not_converged(iter, rnorm));
        }
        for i in 0..n {
            residual[i] = z[i] - x[i] + dt * grad[i];
        }
        rnorm = residual.norm();
        if !rnorm.is_finite() {
            return Err(not_converged(iter, rnorm));
        }
        if rnorm <= opts.tol {
            let next = center(&z)?;
            return Ok(StepResult {
                next,
                newton_iters: iter,
                converged: true,
                residual_norm: rnorm,
            });
        }
        if iter == opts.max_iters {
            break;
        }
        let mut jac =
            kernels::hessian(&z, f.exponent(), f.chi(), f.alpha()).map_err(|_| not_converged(iter, rnorm))?;
        jac *= dt;
        for i in 0..n {
            jac[(i, i)] += 1.0;
        }
        let delta = jac
            .lu()
            .solve(&(-&residual))
            .ok_or_else(|| not_converged(iter, rnorm))?;

        let mut scale = 1.0;
        let mut accepted = false;
        let mut cand = vec![0.0; n];
        for _ in 0..=60 {
            for i in 0..n {
                cand[i] = z[i] + scale * delta[i];
            }
            if kernels::check_ordered(&cand).is_ok() {
                accepted = true;
                break;
            }
            if !opts.damping {
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(not_converged(iter, rnorm));
        }
        std::mem::swap(&mut z, &mut cand);
    }
    Err(not_converged(opts.max_iters, rnorm))
}

/// Classical RK4 step of `dX/dt = -∇F(X)`, re-centered.
pub fn explicit_step_rk4(x: &Configuration, dt: f64, p: &ModelParams) -> Result<Configuration> {
    p.validate()?;
    rk4_with(x, dt, &Functional::Power(*p))
}

/// RK4 step of the logarithmic flow.
pub fn explicit_step_rk4_log(x: &Configuration, dt: f64, chi: f64) -> Result<Configuration> {
    rk4_with(x, dt, &Functional::Log { chi })
}

pub fn rk4_with(x: &Configuration, dt: f64, f: &Functional) -> Result<Configuration> {
    let n = x.len();
    let stage = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, v)| b - h * v).collect()
    };
    let ordering = |e: Error| match e {
        Error::Domain(msg) => Error::Domain(format!("rk4 stage lost ordering: {msg}")),
        other => other,
    };
    let k1 = f.gradient(x).map_err(ordering)?;
    let k2 = f.gradient(&stage(x, &k1, 0.5 * dt)).map_err(ordering)?;
    let k3 = f.gradient(&stage(x, &k2, 0.5 * dt)).map_err(ordering)?;
    let k4 = f.gradient(&stage(x, &k3, dt)).map_err(ordering)?;
    let next: Vec<f64> = (0..n)
        .map(|i| x[i] - dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    center(&next).map_err(ordering)
}

/// Runs the power-law flow described by `spec`.
pub fn simulate(spec: &RunSpec) -> Result<SimulationResult> {
    spec.validate()?;
    if spec.model.is_logarithmic() {
        return Err(Error::validation("model.m", "m = 1 runs go through simulate_log"));
    }
    let f = Functional::Power(spec.model.params()?);
    run(spec, &f)
}

/// Runs the logarithmic (`m = 1`) flow described by `spec`.
pub fn simulate_log(spec: &RunSpec) -> Result<SimulationResult> {
    spec.validate()?;
    if !spec.model.is_logarithmic() {
        return Err(Error::validation("model.m", "simulate_log needs m = 1"));
    }
    let f = Functional::Log {
        chi: spec.model.effective_chi(),
    };
    run(spec, &f)
}

fn diagnostics(f: &Functional, x: &Configuration, t: f64, dt: f64, iters: usize) -> Result<DiagnosticsRow> {
    let e = f.energy(x)?;
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let m = f.exponent();
    Ok(DiagnosticsRow {
        t,
        dt,
        energy: e.total,
        internal: e.internal,
        interaction: e.interaction,
        f2: 0.5 * sq,
        fmp1: sq.powf(0.5 * (m + 1.0)) / (m + 1.0),
        min_gap: x.min_gap(),
        h_of_y: f.deficit_at(x)?,
        newton_iters: iters,
    })
}

fn run(spec: &RunSpec, f: &Functional) -> Result<SimulationResult> {
    let mobility = spec.model.mobility();
    let mut x = spec.initial.generate(spec.model.n)?;
    let initial_scale = x.scale();
    let gap_min = spec.stop.gap_min.unwrap_or(1e-9 * initial_scale);

    let mut rows = vec![diagnostics(f, &x, 0.0, 0.0, 0)?];
    let mut snapshots = vec![(0.0, x.clone())];
    let mut f2_slopes = Vec::new();

    let mut t = 0.0;
    let mut dt = spec.schedule.dt_at(0.0);
    let mut accepted = 0usize;
    let mut last_iters = usize::MAX;
    let mut last_dt = dt;
    let mut last_recorded = true;

    let termination = loop {
        if t >= spec.t_max * (1.0 - 1e-12) {
            break Termination::Completed { t_max: spec.t_max };
        }
        dt = dt.min(spec.schedule.dt_at(t));
        let h = dt.min(spec.t_max - t);
        let eff = h * mobility;

        let guess = if last_iters <= 3 {
            let g = f.gradient(&x)?;
            let pred: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - eff * b).collect();
            kernels::check_ordered(&pred).is_ok().then_some(pred)
        } else {
            None
        };

        match implicit_step_with(&x, eff, f, &spec.newton, guess) {
            Ok(step) => {
                let f2_old = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
                x = step.next;
                t += h;
                accepted += 1;
                last_iters = step.newton_iters;
                last_dt = h;
                let f2_new = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
                f2_slopes.push((t - 0.5 * h, (f2_new - f2_old) / h));

                let row = match diagnostics(f, &x, t, h, step.newton_iters) {
                    Ok(r) if r.energy.is_finite() => r,
                    Ok(_) | Err(_) => {
                        if x.min_gap() < gap_min {
                            break blowup(t, h, &x);
                        }
                        break Termination::Failure {
                            reason: format!("non-finite diagnostics at t = {t} with healthy gaps"),
                        };
                    }
                };
                last_recorded = accepted.is_multiple_of(spec.record_every);
                if last_recorded {
                    rows.push(row);
                    snapshots.push((t, x.clone()));
                }
                if row.min_gap < gap_min {
                    if !last_recorded {
                        rows.push(row);
                        snapshots.push((t, x.clone()));
                        last_recorded = true;
                    }
                    break blowup(t, h, &x);
                }
                dt = (h * spec.schedule.growth).min(spec.schedule.dt_at(t));
            }
            Err(Error::NotConverged { .. }) => {
                dt = 0.5 * h;
                last_iters = usize::MAX;
                if dt < spec.stop.dt_min {
                    break blowup(t, last_dt, &x);
                }
            }
            Err(e) => {
                break Termination::Failure {
                    reason: e.to_string(),
                }
            }
        }
    };

    if !last_recorded {
        let iters = if last_iters == usize::MAX { 0 } else { last_iters };
        rows.push(diagnostics(f, &x, t, last_dt, iters)?);
        snapshots.push((t, x.clone()));
    }

    let maximal_time_estimate = match termination {
        Termination::BlowUp { t_estimate, .. } => t_estimate,
        _ => f64::INFINITY,
    };
    Ok(SimulationResult {
        model: spec.model,
        mobility,
        initial_scale,
        rows,
        snapshots,
        termination,
        maximal_time_estimate,
        f2_slopes,
    })
}

fn blowup(t: f64, last_dt: f64, x: &Configuration) -> Termination {
    Termination::BlowUp {
        t_estimate: t,
        last_dt,
        min_gap: x.min_gap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{energy_breakdown, gradient};

    fn params(n: usize, chi: f64) -> ModelParams {
        ModelParams::new(1.2, chi, 0.0, n).unwrap()
    }

    #[test]
    fn small_step_matches_explicit_euler() {
        let x = Configuration::from_gaps(&[0.7, 1.1, 0.4, 0.9]).unwrap();
        let p = params(5, 0.1);
        let dt = 1e-8;
        let step = implicit_step(&x, dt, &p, &NewtonOptions::default()).unwrap();
        let g = gradient(&x, &p).unwrap();
        let gn = g.norm();
        let mut err = 0.0_f64;
        for i in 0..5 {
            let disp = step.next[i] - x[i];
            err = err.max((disp + dt * g[i]).abs());
        }
        assert!(err <= 1e-5 * dt * gn, "err {err}");
        assert!(step.converged && step.residual_norm <= 1e-10);
    }

    #[test]
    fn double_bump_step_decreases_energy() {
        let spec = RunSpec::double_bump(50);
        let p = spec.model.params().unwrap();
        let x = spec.initial.generate(50).unwrap();
        let dt = 0.05 * spec.model.mobility();
        let step = implicit_step(&x, dt, &p, &NewtonOptions::default()).unwrap();
        let e0 = energy_breakdown(&x, &p).unwrap().total;
        let e1 = energy_breakdown(&step.next, &p).unwrap().total;
        assert!(e1 <= e0, "{e1} > {e0}");
        assert!(step.next.min_gap() > 0.0);
    }

    #[test]
    fn collapsing_pair_does_not_converge() {
        // attractive pair (chi > 1/2) with a 1e-10 gap collides well within dt
        let x = Configuration::new(vec![-0.5e-10, 0.5e-10]).unwrap();
        let p = params(2, 0.8);
        let r = implicit_step(&x, 0.5, &p, &NewtonOptions::default());
        assert!(matches!(r, Err(Error::NotConverged { .. })), "{r:?}");
    }

    #[test]
    fn rk4_keeps_pair_symmetric() {
        let x = Configuration::new(vec![-0.3, 0.3]).unwrap();
        let p = params(2, 0.2);
        let mut y = x;
        for _ in 0..100 {
            y = explicit_step_rk4(&y, 1e-3, &p).unwrap();
        }
        assert!((y[0] + y[1]).abs() < 1e-14);
    }

    #[test]
    fn rk4_and_implicit_agree_to_second_order() {
        let x = Configuration::from_gaps(&[0.7, 1.1, 0.4, 0.9]).unwrap();
        let p = params(5, 0.1);
        let opts = NewtonOptions::default();
        let err_at = |dt: f64| {
            let a = implicit_step(&x, dt, &p, &opts).unwrap().next;
            let b = explicit_step_rk4(&x, dt, &p).unwrap();
            a.iter()
                .zip(b.iter())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err_at(1e-3);
        let e2 = err_at(5e-4);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn rk4_rejects_crossing_stage() {
        let x = Configuration::new(vec![-1e-3, 1e-3]).unwrap();
        let p = params(2, 0.9);
        assert!(explicit_step_rk4(&x, 10.0, &p).is_err());
    }

    #[test]
    fn schedule_lookup() {
        let s = DtSchedule::new(vec![(4.0, 0.05), (f64::INFINITY, 0.5)]);
        assert_eq!(s.dt_at(0.0), 0.05);
        assert_eq!(s.dt_at(3.95), 0.05);
        assert_eq!(s.dt_at(80.0 * 0.05), 0.5);
        assert_eq!(s.dt_at(1e9), 0.5);
        assert!(DtSchedule::new(vec![(4.0, -1.0)]).validate().is_err());
        assert!(DtSchedule::new(vec![(4.0, 0.1), (2.0, 0.1)]).validate().is_err());
    }

    #[test]
    fn mass_scaling() {
        let m = ModelSpec::new(1.2, 1.45, 0.0, 200).with_scaling(ChiScaling::Mass);
        assert!((m.effective_chi() - 0.725 * 200f64.powf(-0.8)).abs() < 1e-15);
        assert!((m.mobility() - 200f64.powf(-0.2)).abs() < 1e-15);
        assert_eq!(ModelSpec::new(1.2, 1.45, 0.0, 200).effective_chi(), 1.45);
    }

    #[test]
    fn subcritical_run_completes() {
        let spec = RunSpec::new(
            ModelSpec::new(1.5, 0.05, 0.0, 4),
            InitialProfile::Uniform { half_width: 1.0 },
            DtSchedule::constant(0.1),
            5.0,
        );
        let r = simulate(&spec).unwrap();
        assert_eq!(r.termination, Termination::Completed { t_max: 5.0 });
        assert!((r.rows.last().unwrap().t - 5.0).abs() < 1e-12);
        assert!(r.maximal_time_estimate.is_infinite());
        for w in r.snapshots.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
    }

    #[test]
    fn record_every_keeps_final_row() {
        let mut spec = RunSpec::new(
            ModelSpec::new(1.5, 0.05, 0.0, 4),
            InitialProfile::Uniform { half_width: 1.0 },
            DtSchedule::constant(0.1),
            1.05,
        );
        spec.record_every = 4;
        let r = simulate(&spec).unwrap();
        assert_eq!(r.rows.len(), r.snapshots.len());
        assert!((r.rows.last().unwrap().t - 1.05).abs() < 1e-12);
        assert_eq!(r.rows[1].t, r.snapshots[1].0);
    }

    #[test]
    fn simulate_routes_by_exponent() {
        let mut spec = RunSpec::new(
            ModelSpec::new(1.0, 0.1, 0.0, 4),
            InitialProfile::Uniform { half_width: 1.0 },
            DtSchedule::constant(0.1),
            1.0,
        );
        assert!(simulate(&spec).is_err());
        assert!(simulate_log(&spec).is_ok());
        spec.model.m = 1.5;
        assert!(simulate_log(&spec).is_err());
    }
}
