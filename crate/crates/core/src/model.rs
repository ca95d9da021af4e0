//! Energies, forces and moments of the discrete homogeneous functional
//!
//! ```text
//! F(X) = 1/(m-1) Σ_{i<N} (X_{i+1}-X_i)^{1-m} - χ/(m-1) Σ_{i≠j} |X_i-X_j|^{1-m} + α |X|²/2
//! ```
//!
//! The pair sum runs over ordered pairs, so every unordered pair is counted twice. The
//! logarithmic (`m = 1`) variant is exposed separately through [`energy_log`] and
//! [`gradient_log`].
//!
//! Everything here is a pure function of its inputs. The typed entry points take a
//! [`Configuration`] (ordered and centered); the [`kernels`] submodule works on raw slices that
//! only need to be strictly increasing, which is what finite-difference oracles and the inner
//! loops of the solvers use.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents and coefficients of one functional instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub chi: f64,
    pub alpha: f64,
    pub n: usize,
}

impl ModelParams {
    pub fn new(m: f64, chi: f64, alpha: f64, n: usize) -> Result<Self> {
        let p = ModelParams { m, chi, alpha, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 1.0) {
            return Err(Error::domain(format!("m must be > 1, got {}", self.m)));
        }
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return Err(Error::domain(format!("chi must be > 0, got {}", self.chi)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::domain("alpha must be finite"));
        }
        if self.n < 2 {
            return Err(Error::domain(format!(
                "need at least 2 particles, got {}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        ModelParams { alpha, ..self }
    }

    pub fn with_chi(self, chi: f64) -> Self {
        ModelParams { chi, ..self }
    }

    fn check_len(&self, x: &Configuration) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::domain(format!(
                "configuration has {} particles but params say n = {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Ordered, centered particle positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration(Vec<f64>);

impl Configuration {
    /// Validates ordering and centering (to `1e-12 * max(1, max|x|)`).
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        kernels::check_ordered(&positions)?;
        let sum: f64 = positions.iter().sum();
        let scale = positions.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if sum.abs() > 1e-12 * scale {
            return Err(Error::domain(format!(
                "configuration is not centered (sum of positions = {sum:e})"
            )));
        }
        Ok(Configuration(positions))
    }

    pub fn positions(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min_gap(&self) -> f64 {
        self.0
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean norm `|X|`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute position.
    pub fn scale(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// `X / |X|`.
    pub fn normalized(&self) -> Configuration {
        let n = self.norm();
        Configuration(self.0.iter().map(|v| v / n).collect())
    }

    /// Builds the centered configuration with the given consecutive gaps.
    pub fn from_gaps(gaps: &[f64]) -> Result<Self> {
        let mut pos = Vec::with_capacity(gaps.len() + 1);
        let mut acc = 0.0;
        pos.push(0.0);
        for g in gaps {
            acc += g;
            pos.push(acc);
        }
        center(&pos)
    }

    /// Mirror image `x ↦ -x` (reverses the gap sequence).
    pub fn mirrored(&self) -> Configuration {
        Configuration(self.0.iter().rev().map(|v| -v).collect())
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Configuration::new(v)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Self {
        c.0
    }
}

impl Deref for Configuration {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Decomposition `total = internal - interaction + quadratic`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub internal: f64,
    /// The full subtracted pair term, including `χ/(m-1)`.
    pub interaction: f64,
    pub quadratic: f64,
    pub total: f64,
}

/// Gradient or velocity entries, one per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementVector(pub Vec<f64>);

impl DisplacementVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DisplacementVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn energy_breakdown(x: &Configuration, p: &ModelParams) -> Result<EnergyBreakdown> {
    p.validate()?;
    p.check_len(x)?;
    kernels::energy(x, p)
}

/// Logarithmic energy `-Σ log(X_{i+1}-X_i) + χ Σ_{i≠j} log|X_j-X_i|`.
///
/// Note the sign: here the pair term enters with `+χ`.
pub fn energy_log(x: &Configuration, chi: f64) -> Result<f64> {
    check_chi(chi)?;
    kernels::energy_log(x, chi).map(|e| e.total)
}

/// `∇F` including the confinement term `αX`. The flow velocity is the negation of this.
pub fn gradient(x: &Configuration, p: &ModelParams) -> Result<DisplacementVector> {
    p.validate()?;
    p.check_len(x)?;
    let mut out = vec![0.0; x.len()];
    kernels::gradient_into(x, p.m, p.chi, p.alpha, &mut out)?;
    Ok(DisplacementVector(out))
}

/// Gradient of the logarithmic energy.
pub fn gradient_log(x: &Configuration, chi: f64) -> Result<DisplacementVector> {
    check_chi(chi)?;
    let mut out = vec![0.0; x.len()];
    kernels::gradient_into(x, 1.0, chi, 0.0, &mut out)?;
    Ok(DisplacementVector(out))
}

pub fn dilate(x: &Configuration, lambda: f64) -> Result<Configuration> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain(format!(
            "dilation factor must be > 0, got {lambda}"
        )));
    }
    Ok(Configuration(x.iter().map(|v| v * lambda).collect()))
}

/// Subtracts the mean. Gaps are unchanged up to rounding.
pub fn center(raw: &[f64]) -> Result<Configuration> {
    kernels::check_ordered(raw)?;
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let mut v: Vec<f64> = raw.iter().map(|x| x - mean).collect();
    // second pass removes the rounding left by the first
    let drift = v.iter().sum::<f64>() / n;
    if drift != 0.0 {
        v.iter_mut().for_each(|x| *x -= drift);
    }
    Ok(Configuration(v))
}

/// `f_2 = |X|²/2`.
pub fn second_moment(x: &Configuration) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

/// `f_{m+1} = |X|^{m+1}/(m+1)`.
pub fn moment_power(x: &Configuration, m: f64) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    sq.powf(0.5 * (m + 1.0)) / (m + 1.0)
}

/// Deficit `|∇F(Y)|² - ((m-1) F(Y))²` on the unit sphere; nonnegative by Cauchy–Schwarz.
pub fn deficit_h(y: &Configuration, p: &ModelParams) -> Result<f64> {
    p.validate()?;
    p.check_len(y)?;
    if p.alpha != 0.0 {
        return Err(Error::domain("the deficit is defined for alpha = 0"));
    }
    let norm = y.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!(
            "deficit needs a unit-norm input, got |y| = {norm}"
        )));
    }
    let e = kernels::energy(y, p)?;
    let mut g = vec![0.0; y.len()];
    kernels::gradient_into(y, p.m, p.chi, 0.0, &mut g)?;
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let f = (p.m - 1.0) * e.total;
    Ok(g2 - f * f)
}

fn check_chi(chi: f64) -> Result<()> {
    if chi.is_finite() && chi > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("chi must be > 0, got {chi}")))
    }
}

/// Slice-level kernels shared by the solvers. Inputs only need to be strictly increasing.
pub mod kernels {
    use nalgebra::DMatrix;

    use super::{EnergyBreakdown, ModelParams};
    use crate::error::{Error, Result};

    pub fn check_ordered(x: &[f64]) -> Result<()> {
        if x.len() < 2 {
            return Err(Error::domain("need at least 2 particles"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("positions must be finite"));
        }
        if let Some(i) = x.windows(2).position(|w| w[1] - w[0] <= 0.0) {
            return Err(Error::domain(format!(
                "positions must be strictly increasing (x[{}] = {} >= x[{}] = {})",
                i,
                x[i],
                i + 1,
                x[i + 1]
            )));
        }
        Ok(())
    }

    /// Compensated summation.
    #[derive(Default, Clone, Copy)]
    pub(crate) struct Sum {
        s: f64,
        c: f64,
    }

    impl Sum {
        #[inline]
        pub fn add(&mut self, v: f64) {
            let t = self.s + v;
            if self.s.abs() >= v.abs() {
                self.c += (self.s - t) + v;
            } else {
                self.c += (v - t) + self.s;
            }
            self.s = t;
        }

        #[inline]
        pub fn value(self) -> f64 {
            self.s + self.c
        }
    }

    /// `Σ_{i<N} g_i^{1-m}`.
    pub fn gap_sum(x: &[f64], m: f64) -> f64 {
        let mut s = Sum::default();
        for w in x.windows(2) {
            s.add((w[1] - w[0]).powf(1.0 - m));
        }
        s.value()
    }

    /// `Σ_{i≠j} |X_i - X_j|^{1-m}` over ordered pairs.
    pub fn pair_sum(x: &[f64], m: f64) -> f64 {
        let mut s = Sum::default();
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                s.add((x[j] - x[i]).powf(1.0 - m));
            }
        }
        2.0 * s.value()
    }

    pub fn energy(x: &[f64], p: &ModelParams) -> Result<EnergyBreakdown> {
        check_ordered(x)?;
        let k = 1.0 / (p.m - 1.0);
        let internal = k * gap_sum(x, p.m);
        let interaction = p.chi * k * pair_sum(x, p.m);
        let quadratic = 0.5 * p.alpha * x.iter().map(|v| v * v).sum::<f64>();
        let total = internal - interaction + quadratic;
        finite(total, "energy")?;
        finite(internal, "internal energy")?;
        finite(interaction, "interaction energy")?;
        Ok(EnergyBreakdown {
            internal,
            interaction,
            quadratic,
            total,
        })
    }

    /// Logarithmic energy split the same way: `internal = -Σ log g`,
    /// `interaction = -χ Σ_{i≠j} log|d|`, so that `total = internal - interaction`.
    pub fn energy_log(x: &[f64], chi: f64) -> Result<EnergyBreakdown> {
        check_ordered(x)?;
        let mut gaps = Sum::default();
        for w in x.windows(2) {
            gaps.add((w[1] - w[0]).ln());
        }
        let mut pairs = Sum::default();
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                pairs.add((x[j] - x[i]).ln());
            }
        }
        let internal = -gaps.value();
        let interaction = -2.0 * chi * pairs.value();
        let total = internal - interaction;
        finite(total, "logarithmic energy")?;
        Ok(EnergyBreakdown {
            internal,
            interaction,
            quadratic: 0.0,
            total,
        })
    }

    /// Gradient of the functional with force exponent `m`. With `m = 1` this is the gradient of
    /// the logarithmic energy.
    pub fn gradient_into(x: &[f64], m: f64, chi: f64, alpha: f64, out: &mut [f64]) -> Result<()> {
        check_ordered(x)?;
        let n = x.len();
        debug_assert_eq!(out.len(), n);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = alpha * xi;
        }
        for i in 0..n - 1 {
            let t = (x[i + 1] - x[i]).powf(-m);
            out[i] += t;
            out[i + 1] -= t;
        }
        let c = 2.0 * chi;
        for i in 0..n {
            let xi = x[i];
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                let t = c * (xj - xi).powf(-m);
                acc -= t;
                out[j] += t;
            }
            out[i] += acc;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("gradient is not finite".into()));
        }
        Ok(())
    }

    /// Hessian of the functional with force exponent `m` (tridiagonal internal part, dense pair
    /// part, `αI`).
    pub fn hessian(x: &[f64], m: f64, chi: f64, alpha: f64) -> Result<DMatrix<f64>> {
        check_ordered(x)?;
        let n = x.len();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = alpha;
        }
        for k in 0..n - 1 {
            let a = m * (x[k + 1] - x[k]).powf(-m - 1.0);
            h[(k, k)] += a;
            h[(k + 1, k + 1)] += a;
            h[(k, k + 1)] -= a;
            h[(k + 1, k)] -= a;
        }
        let c = 2.0 * chi * m;
        for i in 0..n {
            for j in i + 1..n {
                let b = c * (x[j] - x[i]).powf(-m - 1.0);
                h[(i, j)] += b;
                h[(j, i)] += b;
                h[(i, i)] -= b;
                h[(j, j)] -= b;
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("hessian is not finite".into()));
        }
        Ok(h)
    }

    fn finite(v: f64, what: &str) -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::Overflow(format!("{what} is not finite")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: &[f64]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_unit_gap() {
        let p = ModelParams {
            m: 2.0,
            chi: 1e-300,
            alpha: 0.0,
            n: 2,
        };
        let e = energy_breakdown(&cfg(&[-0.5, 0.5]), &p).unwrap();
        assert_eq!(e.internal, 1.0);
        assert!((e.total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_particles_m_1_2() {
        let p = ModelParams::new(1.2, 1.45, 0.0, 3).unwrap();
        let e = energy_breakdown(&cfg(&[-1.0, 0.0, 1.0]), &p).unwrap();
        assert!((e.internal - 10.0).abs() < 1e-12);
        assert!((e.interaction - 41.62299).abs() < 1e-4, "{}", e.interaction);
        assert!((e.total + 31.62299).abs() < 1e-4);
        let resum = e.internal - e.interaction + e.quadratic;
        assert!((resum - e.total).abs() <= 1e-14 * e.total.abs());
    }

    #[test]
    fn log_energy_examples() {
        assert!(energy_log(&cfg(&[-0.5, 0.5]), 1.0).unwrap().abs() < 1e-15);
        let v = energy_log(&cfg(&[-1.0, 1.0]), 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn log_dilation_constant() {
        // N = 3, χ = 0.5: -(N-1) + χ N (N-1) = -2 + 3 = 1 per unit log λ
        let x = cfg(&[-1.3, 0.1, 1.2]);
        let y = dilate(&x, std::f64::consts::E).unwrap();
        let d = energy_log(&y, 0.5).unwrap() - energy_log(&x, 0.5).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn gradient_unit_pair() {
        let p = ModelParams {
            m: 2.0,
            chi: 1e-300,
            alpha: 0.0,
            n: 2,
        };
        let g = gradient(&cfg(&[-0.5, 0.5]), &p).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn dilate_and_center() {
        let x = cfg(&[-1.0, 0.0, 1.0]);
        assert_eq!(dilate(&x, 1.0).unwrap(), x);
        assert_eq!(dilate(&x, 2.0).unwrap().gaps(), vec![2.0, 2.0]);
        let a = dilate(&dilate(&x, 3.0).unwrap(), 0.5).unwrap();
        let b = dilate(&x, 1.5).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-15);
        }
        assert!(dilate(&x, 0.0).is_err());
        assert!(dilate(&x, -1.0).is_err());

        assert_eq!(center(&[0.0, 1.0, 2.0]).unwrap().positions(), &[-1.0, 0.0, 1.0]);
        assert_eq!(center(&x).unwrap(), x);
        let c = center(&[0.3, 1.7, 2.2, 9.0]).unwrap();
        assert_eq!(center(&c).unwrap(), c);
        assert!(center(&[0.0, 0.0, 1.0]).is_err());
        assert!(center(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn moments() {
        assert_eq!(second_moment(&cfg(&[-1.0, 1.0])), 1.0);
        assert_eq!(second_moment(&cfg(&[-1.0, 0.0, 1.0])), 1.0);
        let x = cfg(&[-0.4, 0.1, 0.3]);
        let x2 = dilate(&x, 2.0).unwrap();
        assert!((second_moment(&x2) - 4.0 * second_moment(&x)).abs() < 1e-15);

        let unit = cfg(&[-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]);
        assert!((moment_power(&unit, 1.2) - 1.0 / 2.2).abs() < 1e-15);
        assert!((moment_power(&cfg(&[-1.0, 1.0]), 3.0) - 1.0).abs() < 1e-15);
        let l: f64 = 1.7;
        let r = moment_power(&dilate(&x, l).unwrap(), 1.2) / moment_power(&x, 1.2);
        assert!((r - l.powf(2.2)).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Configuration::new(vec![0.0, 1.0]).is_err());
        assert!(Configuration::new(vec![0.5, -0.5]).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 3).is_err());
        assert!(ModelParams::new(1.5, 0.0, 0.0, 3).is_err());
        assert!(ModelParams::new(1.5, 1.0, 0.0, 1).is_err());
        let p = ModelParams::new(1.5, 1.0, 0.0, 3).unwrap();
        assert!(energy_breakdown(&cfg(&[-1.0, 1.0]), &p).is_err());
        assert!(kernels::energy(&[0.0, 0.0, 1.0], &p).is_err());
    }

    #[test]
    fn tiny_gap_overflows() {
        let x = [0.0, 1e-320];
        let p = ModelParams::new(3.0, 0.1, 0.0, 2).unwrap();
        assert!(matches!(kernels::energy(&x, &p), Err(Error::Overflow(_))));
        let mut g = [0.0; 2];
        let r = kernels::gradient_into(&x, 1.5, 0.1, 0.0, &mut g);
        assert!(matches!(r, Err(Error::Overflow(_))));
    }

    #[test]
    fn deficit_two_particles() {
        let p = ModelParams::new(1.2, 0.25, 0.0, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let y = cfg(&[-s, s]);
        let h = deficit_h(&y, &p).unwrap();
        let e = energy_breakdown(&y, &p).unwrap().total;
        let g = gradient(&y, &p).unwrap();
        let expect = g.norm().powi(2) - (0.2 * e).powi(2);
        let scale = g.norm().powi(2);
        assert!((h - expect).abs() <= 1e-12 * scale);
        // a single pair is Cauchy-Schwarz tight (∇F is parallel to Y), so the deficit vanishes
        assert!(h.abs() < 1e-12 * scale);
        assert!(deficit_h(&cfg(&[-1.0, 1.0]), &p).is_err());
        assert!(deficit_h(&y, &p.with_alpha(1.0)).is_err());
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let x = [-1.1, -0.2, 0.4, 1.3];
        let (m, chi, alpha) = (1.4, 0.2, 0.7);
        let h = kernels::hessian(&x, m, chi, alpha).unwrap();
        let mut gp = [0.0; 4];
        let mut gm = [0.0; 4];
        for j in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += 1e-6;
            xm[j] -= 1e-6;
            kernels::gradient_into(&xp, m, chi, alpha, &mut gp).unwrap();
            kernels::gradient_into(&xm, m, chi, alpha, &mut gm).unwrap();
            for i in 0..4 {
                let fd = (gp[i] - gm[i]) / 2e-6;
                assert!((fd - h[(i, j)]).abs() < 1e-6 * (1.0 + h[(i, j)].abs()));
            }
        }
    }
}
