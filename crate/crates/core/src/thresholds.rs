//! Critical couplings `C_p`, critical profiles and the deficit infimum.
//!
//! Everything is parametrized by log-gaps `u_k = log(X_{k+1} - X_k)`: ordering constraints
//! disappear and the dilation symmetry becomes the translation `u ↦ u + c`.
//!
//! `C_p` is the reciprocal of the largest value of
//!
//! ```text
//! R(X) = Σ_{i≠j} |X_j - X_i|^{1-m} / Σ_i (X_{i+1} - X_i)^{1-m}
//! ```
//!
//! over `p` ordered points, so that `F^p_m ≥ 0` exactly when `χ ≤ C_p`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kernels, Configuration, ModelParams};
use crate::optim;

/// Interaction-to-internal ratio `R(X)` (ordered-pair convention), scale invariant.
pub fn hls_ratio(x: &Configuration, m: f64) -> Result<f64> {
    check_m(m)?;
    kernels::check_ordered(x)?;
    Ok(kernels::pair_sum(x, m) / kernels::gap_sum(x, m))
}

/// [`hls_ratio`] of the configuration with the given gaps.
pub fn hls_ratio_gaps(gaps: &[f64], m: f64) -> Result<f64> {
    check_m(m)?;
    let x = positions(gaps);
    kernels::check_ordered(&x)?;
    Ok(kernels::pair_sum(&x, m) / kernels::gap_sum(&x, m))
}

fn check_m(m: f64) -> Result<()> {
    if m.is_finite() && m > 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("m must be > 1, got {m}")))
    }
}

fn positions(gaps: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(gaps.len() + 1);
    let mut acc = 0.0;
    x.push(0.0);
    for g in gaps {
        acc += g;
        x.push(acc);
    }
    x
}

/// For every gap `k`, `Σ_{i≤k<j} w(X_j - X_i)` over pairs of points straddling the gap.
fn straddling_sums(x: &[f64], w: impl Fn(f64) -> f64) -> Vec<f64> {
    let p = x.len();
    let mut diff = vec![0.0; p];
    for i in 0..p {
        for j in i + 1..p {
            let v = w(x[j] - x[i]);
            diff[i] += v;
            diff[j] -= v;
        }
    }
    let mut acc = 0.0;
    diff[..p - 1]
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect()
}

/// `log R` as a function of log-gaps, with its gradient.
fn log_ratio(u: &[f64], m: f64, grad: &mut [f64]) -> f64 {
    let g: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let x = positions(&g);
    let pairs = kernels::pair_sum(&x, m);
    let gap_sum = kernels::gap_sum(&x, m);
    let s = straddling_sums(&x, |d| d.powf(-m));
    // dP/dg_k = 2(1-m) S_k, dG/dg_k = (1-m) g_k^{-m}
    for k in 0..g.len() {
        grad[k] = g[k] * (1.0 - m) * (2.0 * s[k] / pairs - g[k].powf(-m) / gap_sum);
    }
    (pairs / gap_sum).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Number of local ascents (at least 16 are used).
    pub starts: usize,
    pub seed: u64,
    /// Random starts draw log-gaps uniformly from `[-log_spread, log_spread]`.
    pub log_spread: f64,
    /// Target for the infinity norm of the gradient of `log R` in log-gap coordinates.
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            starts: 16,
            seed: 0,
            log_spread: 1.2,
            grad_tol: 1e-10,
            max_iters: 5000,
        }
    }
}

/// A local maximum of the ratio found by one or more starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimum {
    pub ratio: f64,
    /// Gaps normalized to unit sum.
    pub gaps: Vec<f64>,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub p: usize,
    pub m: f64,
    pub c_p: f64,
    /// Unit-norm, centered maximizing configuration.
    pub maximizer: Configuration,
    pub ratio_value: f64,
    /// Gradient norm of `log R` at the maximizer.
    pub kkt_residual: f64,
    /// `|R(V) - R(mirror V)|`.
    pub mirror_ratio_defect: f64,
    /// `max_k |g_k - g_{p-2-k}| / max_k g_k` for the maximizer's own gaps.
    pub asymmetry: f64,
    pub local_optima: Vec<LocalOptimum>,
    pub converged_starts: usize,
}

fn start_points(d: usize, count: usize, seed: u64, spread: f64) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; d]];
    let c = (d as f64 - 1.0) / 2.0;
    for beta in [1.0, -1.0, 2.5] {
        starts.push(
            (0..d)
                .map(|k| {
                    if c > 0.0 {
                        beta * ((k as f64 - c).abs() / c)
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
    }
    for beta in [1.5, -1.5] {
        starts.push((0..d).map(|k| beta * k as f64 / d as f64).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < count.max(16) {
        starts.push((0..d).map(|_| rng.random_range(-spread..=spread)).collect());
    }
    starts
}

struct Ascent {
    u: Vec<f64>,
    log_ratio: f64,
    kkt: f64,
}

fn ascend(u0: &[f64], m: f64, opts: &ThresholdOptions) -> Ascent {
    let d = u0.len();
    let objective = |u: &[f64], g: &mut [f64]| {
        if u.iter().any(|v| v.abs() > 60.0) {
            return f64::INFINITY;
        }
        let v = -log_ratio(u, m, g);
        g.iter_mut().for_each(|x| *x = -*x);
        v
    };
    let res = optim::bfgs(objective, u0, opts.grad_tol, opts.max_iters);
    let mut u = res.x;
    let mut grad = vec![0.0; d];
    let mut val = log_ratio(&u, m, &mut grad);
    let mut kkt = inf_norm(&grad);

    // Newton polish on the gradient with a finite-difference Hessian; the dilation direction is
    // singular and is regularized away.
    for _ in 0..6 {
        if kkt <= opts.grad_tol * 1e-2 {
            break;
        }
        let h = 1e-5;
        let mut hess = DMatrix::<f64>::zeros(d, d);
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for l in 0..d {
            let mut up = u.clone();
            let mut um = u.clone();
            up[l] += h;
            um[l] -= h;
            log_ratio(&up, m, &mut gp);
            log_ratio(&um, m, &mut gm);
            for k in 0..d {
                hess[(k, l)] = (gp[k] - gm[k]) / (2.0 * h);
            }
        }
        let hess = 0.5 * (&hess + hess.transpose());
        let reg = hess - DMatrix::<f64>::from_element(d, d, 1.0 / d as f64);
        let Some(step) = reg.lu().solve(&(-DVector::from_vec(grad.clone()))) else {
            break;
        };
        let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let mut tg = vec![0.0; d];
        let tv = log_ratio(&trial, m, &mut tg);
        let tk = inf_norm(&tg);
        if !(tv.is_finite() && tk < kkt && tv >= val - 1e-13) {
            break;
        }
        u = trial;
        val = tv;
        kkt = tk;
        grad = tg;
    }
    // fix the dilation gauge: mean log-gap 0
    let mean = u.iter().sum::<f64>() / d as f64;
    u.iter_mut().for_each(|v| *v -= mean);
    Ascent {
        u,
        log_ratio: val,
        kkt,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn unit_sum(u: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Computes `C_p` for exponent `m` by multi-start ascent of `log R` over log-gaps.
pub fn compute_threshold(p: usize, m: f64, opts: &ThresholdOptions) -> Result<ThresholdEstimate> {
    if p < 2 {
        return Err(Error::domain(format!("need p >= 2, got {p}")));
    }
    check_m(m)?;
    if p == 2 {
        let s = 0.5_f64.sqrt();
        return Ok(ThresholdEstimate {
            p,
            m,
            c_p: 0.5,
            maximizer: Configuration::new(vec![-s, s])?,
            ratio_value: 2.0,
            kkt_residual: 0.0,
            mirror_ratio_defect: 0.0,
            asymmetry: 0.0,
            local_optima: vec![LocalOptimum {
                ratio: 2.0,
                gaps: vec![1.0],
                hits: opts.starts.max(16),
            }],
            converged_starts: opts.starts.max(16),
        });
    }
    let d = p - 1;
    let starts = start_points(d, opts.starts, opts.seed, opts.log_spread);
    let results: Vec<Ascent> = starts.par_iter().map(|u0| ascend(u0, m, opts)).collect();

    let kkt_ok = |a: &Ascent| a.kkt <= 100.0 * opts.grad_tol && a.log_ratio.is_finite();
    let converged: Vec<&Ascent> = results.iter().filter(|a| kkt_ok(a)).collect();
    let pool: Vec<&Ascent> = if converged.is_empty() {
        results.iter().filter(|a| a.log_ratio.is_finite()).collect()
    } else {
        converged.clone()
    };
    let mut ranked: Vec<(f64, Vec<f64>, &Ascent)> = pool
        .iter()
        .map(|a| (a.log_ratio.exp(), unit_sum(&a.u), *a))
        .collect();
    // best ratio first; near ties broken by the lexicographically smallest gap vector
    ranked.sort_by(|a, b| {
        let tie = (a.0 - b.0).abs() <= 1e-12 * a.0.max(b.0);
        if tie {
            lex_cmp(&a.1, &b.1)
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    let Some((_, best_gaps, best)) = ranked.first() else {
        return Err(Error::Solver(format!(
            "all {} starts of the C_{p} search diverged",
            starts.len()
        )));
    };
    if converged.is_empty() {
        return Err(Error::Solver(format!(
            "no start reached stationarity for C_{p}; best ratio {} with gradient {:e} at gaps {:?}",
            best.log_ratio.exp(),
            best.kkt,
            best_gaps
        )));
    }

    let mut local_optima: Vec<LocalOptimum> = Vec::new();
    for (ratio, gaps, _) in &ranked {
        match local_optima
            .iter_mut()
            .find(|o| o.gaps.iter().zip(gaps).all(|(a, b)| (a - b).abs() <= 1e-6))
        {
            Some(o) => o.hits += 1,
            None => local_optima.push(LocalOptimum {
                ratio: *ratio,
                gaps: gaps.clone(),
                hits: 1,
            }),
        }
    }

    let gaps = best_gaps.clone();
    let ratio_value = hls_ratio_gaps(&gaps, m)?;
    let maximizer = Configuration::from_gaps(&gaps)?.normalized();
    let mirrored: Vec<f64> = gaps.iter().rev().copied().collect();
    let mirror_ratio_defect = (ratio_value - hls_ratio_gaps(&mirrored, m)?).abs();
    let gmax = gaps.iter().fold(0.0_f64, |a, v| a.max(*v));
    let asymmetry = gaps
        .iter()
        .zip(&mirrored)
        .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
        / gmax;
    Ok(ThresholdEstimate {
        p,
        m,
        c_p: 1.0 / ratio_value,
        maximizer,
        ratio_value,
        kkt_residual: best.kkt,
        mirror_ratio_defect,
        asymmetry,
        local_optima,
        converged_starts: converged.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub m: f64,
    pub entries: Vec<ThresholdEstimate>,
    /// `C_{p+1} ≤ C_p + 1e-8` for every consecutive pair.
    pub monotone: bool,
}

impl ThresholdTable {
    pub fn c(&self, p: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.p == p).map(|e| e.c_p)
    }

    /// Largest `k` in the table with `chi < C_k`, i.e. the largest subcritical cluster size.
    pub fn largest_subcritical(&self, chi: f64) -> Option<usize> {
        self.entries.iter().filter(|e| chi < e.c_p).map(|e| e.p).max()
    }
}

/// `C_p` for `p = 2..=p_max`.
pub fn threshold_table(p_max: usize, m: f64, opts: &ThresholdOptions) -> Result<ThresholdTable> {
    if p_max < 2 {
        return Err(Error::domain(format!("need p_max >= 2, got {p_max}")));
    }
    let entries = (2..=p_max)
        .map(|p| compute_threshold(p, m, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut monotone = true;
    for w in entries.windows(2) {
        if w[1].c_p > w[0].c_p + 1e-8 {
            monotone = false;
            log::warn!(
                "C_{} = {} exceeds C_{} = {}: a global maximum was probably missed",
                w[1].p,
                w[1].c_p,
                w[0].p,
                w[0].c_p
            );
        }
    }
    Ok(ThresholdTable { m, entries, monotone })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    /// Target for the largest relative residual of the gap equations.
    pub tol: f64,
    pub max_iters: usize,
    pub threshold: ThresholdOptions,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            tol: 1e-10,
            max_iters: 300,
            threshold: ThresholdOptions::default(),
        }
    }
}

/// A solution of the gap equations
///
/// ```text
/// g_k^{-m} = 2χ Σ_{i≤k<j} (V_j - V_i)^{-m} + (α/p) Σ_{i≤k<j} (V_j - V_i)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalProfile {
    pub p: usize,
    pub m: f64,
    pub chi: f64,
    pub alpha: f64,
    pub positions: Configuration,
    /// Largest relative residual `|1 - rhs_k g_k^m|` of the gap equations.
    pub residual: f64,
    /// Euclidean norm of the full gradient of `F^p_{m,α}` at the profile.
    pub gradient_norm: f64,
    /// `F^p_m(V)` (without the confinement term).
    pub energy: f64,
    pub internal: f64,
    pub iters: usize,
}

struct GapSystem {
    p: usize,
    m: f64,
    chi: f64,
    alpha: f64,
}

impl GapSystem {
    /// Relative residuals (plus the normalization `|V|² - 1` when `α = 0`) and their Jacobian
    /// with respect to log-gaps.
    fn eval(&self, u: &[f64], jac: Option<&mut DMatrix<f64>>) -> Option<Vec<f64>> {
        let (p, m) = (self.p, self.m);
        let d = p - 1;
        let g: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let x = positions(&g);
        let s = straddling_sums(&x, |t| t.powf(-m));
        let l = straddling_sums(&x, |t| t);
        let a = self.alpha / p as f64;
        let rhs: Vec<f64> = (0..d).map(|k| 2.0 * self.chi * s[k] + a * l[k]).collect();
        let gm: Vec<f64> = g.iter().map(|v| v.powf(m)).collect();
        let mut r: Vec<f64> = (0..d).map(|k| 1.0 - rhs[k] * gm[k]).collect();
        let mean = x.iter().sum::<f64>() / p as f64;
        let xc: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let with_norm = self.alpha == 0.0;
        if with_norm {
            r.push(xc.iter().map(|v| v * v).sum::<f64>() - 1.0);
        }
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if let Some(j) = jac {
            // Q(a, b) = Σ_{i≤a, j>b} D_ij^{-m-1}, via cumulative sums over rows (down) and
            // columns (leftwards).
            let mut q = vec![0.0; p * p];
            for i in 0..p {
                let mut acc = 0.0;
                for jj in (i + 1..p).rev() {
                    acc += (x[jj] - x[i]).powf(-m - 1.0);
                    q[i * p + jj] = acc;
                }
            }
            for i in 1..p {
                for jj in 0..p {
                    q[i * p + jj] += q[(i - 1) * p + jj];
                }
            }
            let rows = if with_norm { d + 1 } else { d };
            *j = DMatrix::zeros(rows, d);
            for k in 0..d {
                for ll in 0..d {
                    let (lo, hi) = (k.min(ll), k.max(ll));
                    let ds = -m * q[lo * p + hi + 1];
                    let dl = ((lo + 1) * (p - 1 - hi)) as f64;
                    let mut v = -(2.0 * self.chi * ds + a * dl) * gm[k];
                    if k == ll {
                        v -= rhs[k] * m * gm[k] / g[k];
                    }
                    j[(k, ll)] = v * g[ll];
                }
            }
            if with_norm {
                let mut tail = 0.0;
                for ll in (0..d).rev() {
                    tail += xc[ll + 1];
                    j[(d, ll)] = 2.0 * tail * g[ll];
                }
            }
        }
        Some(r)
    }
}

/// Critical profile of `F^p_{m,α}`: started from the `C_p` maximizer when `α = 0`, from a
/// uniform profile at the self-similar scale otherwise.
pub fn critical_profile(
    p: usize,
    m: f64,
    chi: f64,
    alpha: f64,
    opts: &CriticalOptions,
) -> Result<CriticalProfile> {
    validate_critical(p, m, chi, alpha)?;
    if p == 2 && alpha == 0.0 {
        // the single equation g^{-m} = 2χ g^{-m} holds identically at χ = 1/2
        let s = 0.5_f64.sqrt();
        let v = Configuration::new(vec![-s, s])?;
        return finish(p, m, chi, alpha, v, 0);
    }
    let start: Vec<f64> = if alpha == 0.0 {
        let est = compute_threshold(p, m, &opts.threshold)?;
        est.maximizer.gaps().iter().map(|g| g.ln()).collect()
    } else {
        let ones = vec![1.0; p - 1];
        let x = positions(&ones);
        let s = straddling_sums(&x, |t| t.powf(-m));
        let l = straddling_sums(&x, |t| t);
        let num = s.iter().map(|v| 1.0 - 2.0 * chi * v).sum::<f64>();
        let den = l.iter().map(|v| alpha / p as f64 * v).sum::<f64>();
        let scale = if num / den > 0.0 {
            (num / den).powf(1.0 / (m + 1.0))
        } else {
            1.0
        };
        vec![scale.ln(); p - 1]
    };
    critical_profile_from(p, m, chi, alpha, &start, opts)
}

/// Same as [`critical_profile`] but starting from the given log-gaps.
pub fn critical_profile_from(
    p: usize,
    m: f64,
    chi: f64,
    alpha: f64,
    log_gaps: &[f64],
    opts: &CriticalOptions,
) -> Result<CriticalProfile> {
    validate_critical(p, m, chi, alpha)?;
    if log_gaps.len() != p - 1 {
        return Err(Error::domain(format!(
            "expected {} log-gaps, got {}",
            p - 1,
            log_gaps.len()
        )));
    }
    let sys = GapSystem { p, m, chi, alpha };
    let mut u = log_gaps.to_vec();
    let d = p - 1;
    let mut jac = DMatrix::zeros(0, 0);
    let no_point = |residual: f64, iters: usize| Error::NoCriticalPoint { residual, iters };
    let Some(mut r) = sys.eval(&u, Some(&mut jac)) else {
        return Err(no_point(f64::INFINITY, 0));
    };
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut iters = 0;
    loop {
        let res = inf_norm(&r);
        if res <= opts.tol {
            break;
        }
        if iters >= opts.max_iters || lambda > 1e12 {
            return Err(no_point(res, iters));
        }
        iters += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let jtr = &jt * DVector::from_vec(r.clone());
        let mut improved = false;
        while lambda <= 1e12 {
            let mut a = jtj.clone();
            for i in 0..d {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let spread = trial.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v))
                - trial.iter().fold(f64::INFINITY, |a, v| a.min(*v));
            let mut tj = DMatrix::zeros(0, 0);
            match sys.eval(&trial, Some(&mut tj)) {
                Some(tr) if spread < 28.0 => {
                    let tc: f64 = tr.iter().map(|v| v * v).sum();
                    if tc < cost {
                        u = trial;
                        r = tr;
                        jac = tj;
                        cost = tc;
                        lambda = (lambda / 3.0).max(1e-15);
                        improved = true;
                        break;
                    }
                    lambda *= 4.0;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved {
            return Err(no_point(inf_norm(&r), iters));
        }
    }
    let gaps: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let mut v = Configuration::from_gaps(&gaps)?;
    if alpha == 0.0 {
        v = v.normalized();
    }
    finish(p, m, chi, alpha, v, iters)
}

fn validate_critical(p: usize, m: f64, chi: f64, alpha: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::domain(format!("need p >= 2, got {p}")));
    }
    check_m(m)?;
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::domain(format!("chi must be > 0, got {chi}")));
    }
    if !alpha.is_finite() {
        return Err(Error::domain("alpha must be finite"));
    }
    Ok(())
}

fn finish(p: usize, m: f64, chi: f64, alpha: f64, v: Configuration, iters: usize) -> Result<CriticalProfile> {
    let g = v.gaps();
    let x = positions(&g);
    let s = straddling_sums(&x, |t| t.powf(-m));
    let l = straddling_sums(&x, |t| t);
    let residual = (0..p - 1)
        .map(|k| {
            let lhs = g[k].powf(-m);
            ((lhs - 2.0 * chi * s[k] - alpha / p as f64 * l[k]) / lhs).abs()
        })
        .fold(0.0_f64, f64::max);
    let params = ModelParams::new(m, chi, alpha, p)?;
    let mut grad = vec![0.0; p];
    kernels::gradient_into(&v, m, chi, alpha, &mut grad)?;
    let e = kernels::energy(&v, &params.with_alpha(0.0))?;
    Ok(CriticalProfile {
        p,
        m,
        chi,
        alpha,
        positions: v,
        residual,
        gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        energy: e.total,
        internal: e.internal,
        iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaOptions {
    pub starts: usize,
    pub seed: u64,
    /// Largest `n` accepted unless `allow_large` is set.
    pub max_n: usize,
    pub allow_large: bool,
    pub max_evals: usize,
    pub threshold: ThresholdOptions,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions {
            starts: 16,
            seed: 0,
            max_n: 8,
            allow_large: false,
            max_evals: 5_000,
            threshold: ThresholdOptions::default(),
        }
    }
}

/// Best value found for the infimum of the deficit over unit configurations with `F ≥ 0`.
///
/// This is an upper bound on the infimum: only the visited configurations are certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaHEstimate {
    pub n: usize,
    pub m: f64,
    pub chi: f64,
    pub value: f64,
    pub argmin: Configuration,
    pub c_n: f64,
    pub feasible_starts: usize,
    pub starts: usize,
}

/// Deficit at the unit configuration with the given gaps, and `χ R - 1` (feasible when `≤ 0`).
fn deficit_and_violation(gaps: &[f64], m: f64, chi: f64) -> Option<(f64, f64, Configuration)> {
    let y = Configuration::from_gaps(gaps).ok()?.normalized();
    let ratio = kernels::pair_sum(&y, m) / kernels::gap_sum(&y, m);
    let e = kernels::energy(
        &y,
        &ModelParams {
            m,
            chi,
            alpha: 0.0,
            n: y.len(),
        },
    )
    .ok()?;
    let mut g = vec![0.0; y.len()];
    kernels::gradient_into(&y, m, chi, 0.0, &mut g).ok()?;
    let f = (m - 1.0) * e.total;
    let h = g.iter().map(|v| v * v).sum::<f64>() - f * f;
    h.is_finite().then_some((h, chi * ratio - 1.0, y))
}

/// Multi-start Nelder–Mead estimate of the deficit infimum, with the energy constraint handled by
/// an exact penalty of increasing weight.
pub fn estimate_delta_h(n: usize, m: f64, chi: f64, opts: &DeltaOptions) -> Result<DeltaHEstimate> {
    check_m(m)?;
    if n < 2 {
        return Err(Error::domain(format!("need n >= 2, got {n}")));
    }
    if n > opts.max_n && !opts.allow_large {
        return Err(Error::domain(format!(
            "n = {n} exceeds the cost guard max_n = {}; set allow_large to override",
            opts.max_n
        )));
    }
    let c_n = compute_threshold(n, m, &opts.threshold)?.c_p;
    if !(chi >= c_n * (1.0 - 1e-9)) {
        return Err(Error::domain(format!("chi = {chi} is below C_{n} = {c_n}")));
    }
    let feasible_tol = 1e-10;
    if n == 2 {
        let (h, viol, y) = deficit_and_violation(&[1.0], m, chi).ok_or(Error::EmptyCone)?;
        if viol > feasible_tol {
            return Err(Error::EmptyCone);
        }
        return Ok(DeltaHEstimate {
            n,
            m,
            chi,
            value: h,
            argmin: y,
            c_n,
            feasible_starts: 1,
            starts: 1,
        });
    }
    let d = n - 2;
    let starts = start_points(d, opts.starts, opts.seed, 1.2);
    let to_gaps = |u: &[f64]| -> Vec<f64> { std::iter::once(1.0).chain(u.iter().map(|v| v.exp())).collect() };
    let h_scale = deficit_and_violation(&vec![1.0; n - 1], m, chi)
        .map(|(h, _, _)| 1.0 + h.abs())
        .unwrap_or(1.0);

    let violation = |v: &[f64]| {
        if v.iter().any(|x| x.abs() > 30.0) {
            return f64::INFINITY;
        }
        deficit_and_violation(&to_gaps(v), m, chi).map_or(f64::INFINITY, |t| t.1)
    };
    let outcomes: Vec<Option<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|u0| {
            // phase 1: walk to the feasible set by decreasing the violation alone
            let mut u = u0.clone();
            for _ in 0..4 {
                if violation(&u) <= 0.0 {
                    break;
                }
                u = optim::nelder_mead(|v| violation(v).max(-1e-3), &u, 1.0, 1e-15, opts.max_evals).x;
            }
            // phase 2: deficit plus an exact penalty, with a growing weight
            let mut best: Option<(f64, Vec<f64>)> = None;
            for rho in (0..13).map(|k| 10f64.powi(k)) {
                let mut objective = |v: &[f64]| {
                    if v.iter().any(|x| x.abs() > 30.0) {
                        return f64::INFINITY;
                    }
                    match deficit_and_violation(&to_gaps(v), m, chi) {
                        Some((h, viol, _)) => {
                            if viol <= feasible_tol && best.as_ref().is_none_or(|b| h < b.0) {
                                best = Some((h, v.to_vec()));
                            }
                            h + rho * h_scale * viol.max(0.0)
                        }
                        None => f64::INFINITY,
                    }
                };
                u = optim::nelder_mead(&mut objective, &u, 0.3, 1e-15, opts.max_evals).x;
                // restart from the result to shake off a collapsed simplex
                u = optim::nelder_mead(&mut objective, &u, 0.05, 1e-15, opts.max_evals).x;
                if rho >= 1e3 && violation(&u) <= 0.0 {
                    break;
                }
            }
            best
        })
        .collect();

    let mut feasible: Vec<(f64, Vec<f64>)> = outcomes.into_iter().flatten().collect();
    let feasible_starts = feasible.len();
    feasible.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)));
    let (value, u) = feasible.into_iter().next().ok_or(Error::EmptyCone)?;
    let (_, _, argmin) = deficit_and_violation(&to_gaps(&u), m, chi).ok_or(Error::EmptyCone)?;
    Ok(DeltaHEstimate {
        n,
        m,
        chi,
        value,
        argmin,
        c_n,
        feasible_starts,
        starts: starts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_ratio() {
        for x in [vec![-1.0, 1.0], vec![-0.01, 0.01]] {
            let c = Configuration::new(x).unwrap();
            assert_eq!(hls_ratio(&c, 1.3).unwrap(), 2.0);
        }
    }

    #[test]
    fn three_point_equal_gaps() {
        let r = hls_ratio_gaps(&[1.0, 1.0], 1.2).unwrap();
        assert!((r - (2.0 + 2f64.powf(-0.2))).abs() < 1e-14);
    }

    #[test]
    fn log_ratio_gradient_matches_differences() {
        let u = [0.3, -0.2, 0.5, 0.1];
        let mut g = [0.0; 4];
        log_ratio(&u, 1.5, &mut g);
        let mut scratch = [0.0; 4];
        for k in 0..4 {
            let h = 1e-6;
            let mut up = u;
            let mut um = u;
            up[k] += h;
            um[k] -= h;
            let fd = (log_ratio(&up, 1.5, &mut scratch) - log_ratio(&um, 1.5, &mut scratch)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gap_jacobian_matches_differences() {
        for alpha in [0.0, 0.8] {
            let sys = GapSystem {
                p: 5,
                m: 1.4,
                chi: 0.1,
                alpha,
            };
            let u = [0.1, -0.3, 0.2, 0.05];
            let mut j = DMatrix::zeros(0, 0);
            sys.eval(&u, Some(&mut j)).unwrap();
            for l in 0..4 {
                let h = 1e-6;
                let mut up = u;
                let mut um = u;
                up[l] += h;
                um[l] -= h;
                let rp = sys.eval(&up, None).unwrap();
                let rm = sys.eval(&um, None).unwrap();
                for k in 0..rp.len() {
                    let fd = (rp[k] - rm[k]) / (2.0 * h);
                    assert!(
                        (fd - j[(k, l)]).abs() < 1e-7,
                        "alpha {alpha} ({k},{l}): {fd} vs {}",
                        j[(k, l)]
                    );
                }
            }
        }
    }

    #[test]
    fn c3_is_equal_gaps() {
        let est = compute_threshold(3, 1.2, &ThresholdOptions::default()).unwrap();
        assert!((est.c_p - 1.0 / (2.0 + 2f64.powf(-0.2))).abs() < 1e-12);
        assert!(est.asymmetry < 1e-8);
        assert!((est.maximizer.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn critical_profile_two_points() {
        let cp = critical_profile(2, 1.3, 0.5, 0.0, &CriticalOptions::default()).unwrap();
        let s = 0.5_f64.sqrt();
        assert!((cp.positions[0] + s).abs() < 1e-15 && (cp.positions[1] - s).abs() < 1e-15);
        assert_eq!(cp.residual, 0.0);
    }

    #[test]
    fn confined_profile_identity() {
        let cp = critical_profile(4, 1.5, 0.05, 1.0, &CriticalOptions::default()).unwrap();
        let v2: f64 = cp.positions.iter().map(|v| v * v).sum();
        let expect = 1.0 * v2 / 0.5;
        assert!(
            (cp.energy - expect).abs() <= 1e-8 * expect.abs(),
            "{} vs {expect}",
            cp.energy
        );
        assert!(cp.residual <= 1e-10);
    }

    #[test]
    fn supercritical_pair_has_empty_cone() {
        let r = estimate_delta_h(2, 1.2, 0.6, &DeltaOptions::default());
        assert!(matches!(r, Err(Error::EmptyCone)));
    }
}
