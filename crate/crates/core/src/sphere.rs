//! Exact reference solutions on the unit sphere.
//!
//! Zonal data `f(θ) = Σ f_j ζ_j(θ)` with `ζ_j = √((2j+1)/(4π)) P_j(cos θ)`
//! are eigenfunctions of `-Δ_γ` with eigenvalues `λ_j = j(j+1)`, so
//! `(-Δ_γ)^{-s} f = Σ λ_j^{-s} f_j ζ_j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sinc::Neumaier;
use crate::vec3::{self, Vec3};

/// Number of retained modes in the reference series.
pub const DEFAULT_TRUNCATION: usize = 10_000;

/// `f(x) = 1` if `x₃ ≥ 0`, `-1` otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepData;

impl StepData {
    /// Checked evaluation: `x` must lie on the unit sphere (to 1e-9).
    pub fn eval(&self, x: &Vec3) -> Result<f64> {
        let r = vec3::norm(x);
        if (r - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("point {x:?} is not on the unit sphere (|x| = {r})")));
        }
        Ok(Self::value(x))
    }

    /// Unchecked evaluation.
    #[inline]
    pub fn value(x: &Vec3) -> f64 {
        if x[2] >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// `P_0..=P_{j_max}` and their derivatives at `t`.
///
/// Values come from the three-term recurrence; derivatives from
/// `(1 - t²) P'_j = j (P_{j-1} - t P_j)`, with `P'_j(±1) = (±1)^{j+1} j(j+1)/2`.
pub fn legendre_pack(j_max: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; j_max + 1];
    let mut dp = vec![0.0; j_max + 1];
    p[0] = 1.0;
    if j_max >= 1 {
        p[1] = t;
    }
    for j in 1..j_max {
        let jf = j as f64;
        p[j + 1] = ((2.0 * jf + 1.0) * t * p[j] - jf * p[j - 1]) / (jf + 1.0);
    }
    let one_minus = 1.0 - t * t;
    for j in 1..=j_max {
        let jf = j as f64;
        dp[j] = if one_minus == 0.0 {
            let sign = if t > 0.0 || j % 2 == 1 { 1.0 } else { -1.0 };
            sign * jf * (jf + 1.0) / 2.0
        } else {
            jf * (p[j - 1] - t * p[j]) / one_minus
        };
    }
    (p, dp)
}

#[inline]
pub fn zeta_norm(j: usize) -> f64 {
    ((2 * j + 1) as f64 / (4.0 * PI)).sqrt()
}

/// Coefficients `f_j = (f, ζ_j)` of the step data for `j = 0..=J`.
///
/// Uses `∫₀¹ P_j = (P_{j-1}(0) - P_{j+1}(0)) / (2j + 1)`; even modes are
/// exactly zero.
pub fn step_coefficients(truncation: usize) -> Vec<f64> {
    // P_j(0) for j = 0..=J+1
    let mut p0 = vec![0.0; truncation + 2];
    p0[0] = 1.0;
    for j in 1..=truncation {
        p0[j + 1] = -(j as f64) / (j as f64 + 1.0) * p0[j - 1];
    }
    let mut f = vec![0.0; truncation + 1];
    for j in (1..=truncation).step_by(2) {
        let half = (p0[j - 1] - p0[j + 1]) / (2 * j + 1) as f64;
        f[j] = 2.0 * PI * zeta_norm(j) * 2.0 * half;
    }
    f
}

/// Zonal data given by their coefficients, with the solution operator
/// `(-Δ_γ)^{-s}` applied mode by mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalSeries {
    /// `f_j` for `j = 0..=J`; `f_0` must vanish (mean-free data).
    pub coefficients: Vec<f64>,
}

impl ZonalSeries {
    pub fn step(truncation: usize) -> Self {
        ZonalSeries {
            coefficients: step_coefficients(truncation),
        }
    }

    /// Data `f = ζ_j`.
    pub fn single_mode(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::invalid("mode 0 is the constant and has no inverse"));
        }
        let mut coefficients = vec![0.0; j + 1];
        coefficients[j] = 1.0;
        Ok(ZonalSeries { coefficients })
    }

    pub fn truncation(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eigenvalue(j: usize) -> f64 {
        (j * (j + 1)) as f64
    }

    /// `u_j = λ_j^{-s} f_j`.
    pub fn solution_coefficients(&self, s: f64) -> Vec<f64> {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, &f)| if j == 0 || f == 0.0 { 0.0 } else { Self::eigenvalue(j).powf(-s) * f })
            .collect()
    }

    /// Data value at polar angle `θ` (truncated series).
    pub fn data_value(&self, theta: f64) -> f64 {
        let (p, _) = legendre_pack(self.truncation(), theta.cos());
        let mut acc = Neumaier::default();
        for j in (1..=self.truncation()).rev() {
            acc.add(self.coefficients[j] * zeta_norm(j) * p[j]);
        }
        acc.sum()
    }

    /// `ũ(θ) = Σ_{j ≤ J} λ_j^{-s} f_j ζ_j(θ)`, summed from high to low `j`.
    pub fn exact_solution(&self, theta: f64, s: f64) -> f64 {
        ZonalEvaluator::new(self, &[s]).value_at(theta.cos())[0]
    }

    /// `dũ/dθ`.
    pub fn exact_theta_derivative(&self, theta: f64, s: f64) -> f64 {
        let t = theta.cos();
        let d = ZonalEvaluator::new(self, &[s]).eval(t)[0].1;
        -theta.sin() * d
    }

    /// Tangential gradient `∇_γ ũ = (dũ/dθ) ê_θ` at the point `(θ, φ)`.
    pub fn exact_gradient(&self, theta: f64, phi: f64, s: f64) -> Vec3 {
        let p = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        ZonalEvaluator::new(self, &[s]).value_and_gradient(&p)[0].1
    }
}

/// Evaluates the solution series for several powers `s` at once, sharing
/// the Legendre recurrence between them.
#[derive(Debug, Clone)]
pub struct ZonalEvaluator {
    /// Modes with nonzero data, in increasing order.
    active: Vec<usize>,
    /// Per power: `u_j √((2j+1)/4π)` for the active modes.
    weights: Vec<Vec<f64>>,
    truncation: usize,
}

impl ZonalEvaluator {
    pub fn new(series: &ZonalSeries, powers: &[f64]) -> Self {
        let active: Vec<usize> = (1..=series.truncation()).filter(|&j| series.coefficients[j] != 0.0).collect();
        let weights = powers
            .iter()
            .map(|&s| {
                let u = series.solution_coefficients(s);
                active.iter().map(|&j| u[j] * zeta_norm(j)).collect()
            })
            .collect();
        ZonalEvaluator {
            active,
            weights,
            truncation: series.truncation(),
        }
    }

    pub fn n_powers(&self) -> usize {
        self.weights.len()
    }

    /// `(ũ, dũ/dt)` at `t = cos θ` for every power.
    ///
    /// Derivatives use `P'_{j+1} = P'_{j-1} + (2j+1) P_j`, which needs no
    /// division and is exact at the poles.
    pub fn eval(&self, t: f64) -> Vec<(f64, f64)> {
        let jmax = self.active.last().copied().unwrap_or(0);
        let mut p = vec![0.0; jmax + 2];
        let mut dp = vec![0.0; jmax + 2];
        p[0] = 1.0;
        p[1] = t;
        dp[1] = 1.0;
        for j in 1..=jmax {
            let jf = j as f64;
            p[j + 1] = ((2.0 * jf + 1.0) * t * p[j] - jf * p[j - 1]) / (jf + 1.0);
            dp[j + 1] = dp[j - 1] + (2.0 * jf + 1.0) * p[j];
        }
        self.weights
            .iter()
            .map(|w| {
                let mut value = Neumaier::default();
                let mut deriv = Neumaier::default();
                for (idx, &j) in self.active.iter().enumerate().rev() {
                    value.add(w[idx] * p[j]);
                    deriv.add(w[idx] * dp[j]);
                }
                (value.sum(), deriv.sum())
            })
            .collect()
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        self.eval(t).into_iter().map(|(v, _)| v).collect()
    }

    /// Value and tangential gradient at a point `p` of the unit sphere.
    ///
    /// `∇_γ t = e₃ - t p` for `t = p₃`, which vanishes at the poles.
    pub fn value_and_gradient(&self, p: &Vec3) -> Vec<(f64, Vec3)> {
        let t = p[2].clamp(-1.0, 1.0);
        let grad_t = [-t * p[0], -t * p[1], 1.0 - t * p[2]];
        self.eval(t)
            .into_iter()
            .map(|(v, d)| (v, vec3::scale(&grad_t, d)))
            .collect()
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }
}
