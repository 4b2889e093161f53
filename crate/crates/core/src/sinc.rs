//! Sinc quadrature for `λ^{-s}` and its action on the discrete operator.
//!
//! With `μ = e^y`, the Balakrishnan integral
//! `λ^{-s} = (sin πs / π) ∫ e^{(1-s)y} / (e^y + λ) dy`
//! is approximated by the trapezoidal rule with spacing `k` on
//! `y_ℓ = kℓ`, `ℓ = -M..=N`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::SparseSpd;
use crate::solver::{solve_cg, DirectSolver, SolverKind};

/// Ceiling that ignores rounding noise right above an integer.
fn ceil_snapped(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn check_power(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("fractional power must lie in (0, 1), got {s}")))
    }
}

/// Truncation `(M, N)` balancing the discretization and both tail errors:
/// `N = ⌈π²/(4sk²)⌉`, `M = ⌈π²/(4(1-s)k²)⌉`.
pub fn choose_truncation(s: f64, k: f64) -> Result<(usize, usize)> {
    check_power(s)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("quadrature spacing must be positive, got {k}")));
    }
    let base = PI * PI / (4.0 * k * k);
    Ok((ceil_snapped(base / (1.0 - s)), ceil_snapped(base / s)))
}

/// Error envelope `ρ(k, r, t)` of the sinc rule:
/// `e^{-π²/(2k)} / sinh(π²/(2k)) + e^{-(s - r⁺)Nk} + e^{-(1-s)Mk}`.
///
/// `t` only enters through the hypothesis `-t ≤ r`; it is accepted for
/// symmetry with the estimate it comes from.
pub fn error_bound_rho(k: f64, r: f64, _t: f64, s: f64, m: usize, n: usize) -> Result<f64> {
    check_power(s)?;
    if !(k > 0.0) {
        return Err(Error::invalid("quadrature spacing must be positive"));
    }
    if r >= s {
        return Err(Error::invalid(format!("need r < s for a meaningful bound (r = {r}, s = {s})")));
    }
    let a = PI * PI / (2.0 * k);
    let r_plus = r.max(0.0);
    Ok((-a).exp() / a.sinh() + (-(s - r_plus) * n as f64 * k).exp() + (-(1.0 - s) * m as f64 * k).exp())
}

/// The sinc rule: nodes `y_ℓ = kℓ`, shifts `μ_ℓ = e^{y_ℓ}` and weights
/// `w_ℓ = (k sin πs / π) e^{(1-s)y_ℓ}`, `ℓ = -M..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SincRule {
    pub s: f64,
    pub k: f64,
    pub m: usize,
    pub n: usize,
}

impl SincRule {
    /// Rule with `M` and `N` from [`choose_truncation`].
    pub fn new(s: f64, k: f64) -> Result<Self> {
        let (m, n) = choose_truncation(s, k)?;
        Ok(SincRule { s, k, m, n })
    }

    pub fn with_truncation(s: f64, k: f64, m: usize, n: usize) -> Result<Self> {
        choose_truncation(s, k)?;
        Ok(SincRule { s, k, m, n })
    }

    /// Node indices `-M..=N` in summation order.
    pub fn indices(&self) -> impl Iterator<Item = i64> + Clone {
        -(self.m as i64)..=(self.n as i64)
    }

    pub fn len(&self) -> usize {
        self.m + self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, l: i64) -> f64 {
        self.k * l as f64
    }

    pub fn shift(&self, l: i64) -> f64 {
        self.node(l).exp()
    }

    pub fn weight(&self, l: i64) -> f64 {
        self.k * (PI * self.s).sin() / PI * ((1.0 - self.s) * self.node(l)).exp()
    }

    /// `q_k(λ) = Σ w_ℓ / (μ_ℓ + λ) ≈ λ^{-s}`.
    pub fn scalar_apply(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("eigenvalue must be positive, got {lambda}")));
        }
        let mut acc = Neumaier::default();
        for l in self.indices() {
            acc.add(self.weight(l) / (self.shift(l) + lambda));
        }
        Ok(acc.sum())
    }

    /// `ρ(k, r, t)` for this rule.
    pub fn error_bound(&self, r: f64, t: f64) -> Result<f64> {
        error_bound_rho(self.k, r, t, self.s, self.m, self.n)
    }
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Shifted-system backend for [`apply_fractional_inverse`].
pub struct ShiftedSolver<'a> {
    direct: Option<DirectSolver>,
    mass: &'a SparseSpd,
    stiffness: &'a SparseSpd,
    kind: SolverKind,
}

impl<'a> ShiftedSolver<'a> {
    pub fn new(mass: &'a SparseSpd, stiffness: &'a SparseSpd, kind: SolverKind) -> Result<Self> {
        let direct = match kind {
            SolverKind::Direct => Some(DirectSolver::new(
                std::sync::Arc::new(mass.clone()),
                std::sync::Arc::new(stiffness.clone()),
            )?),
            SolverKind::Cg { .. } => None,
        };
        Ok(ShiftedSolver {
            direct,
            mass,
            stiffness,
            kind,
        })
    }

    pub fn from_direct(direct: DirectSolver, mass: &'a SparseSpd, stiffness: &'a SparseSpd) -> Self {
        ShiftedSolver {
            direct: Some(direct),
            mass,
            stiffness,
            kind: SolverKind::Direct,
        }
    }

    /// Mean-free solution of `(μM + A)U = b̂`, where `b̂` is `b` with its
    /// constant-mode component removed.
    pub fn solve_mean_free(&self, mu: f64, b: &[f64]) -> Result<Vec<f64>> {
        match (&self.direct, self.kind) {
            (Some(d), _) => Ok(d.factorize(mu)?.solve_mean_free(b)),
            (None, SolverKind::Cg { tol }) => {
                let ones = vec![1.0; b.len()];
                let m1 = self.mass.mul_vec(&ones);
                let total: f64 = m1.iter().sum();
                let s = b.iter().sum::<f64>() / total;
                let b_hat: Vec<f64> = b.iter().zip(&m1).map(|(v, m)| v - s * m).collect();
                let max_iter = 20 * b.len() + 1000;
                let out = solve_cg(self.mass, self.stiffness, mu, &b_hat, tol, max_iter)?;
                let mean = crate::solver::dot(&m1, &out.solution) / total;
                Ok(out.solution.into_iter().map(|v| v - mean).collect())
            }
            (None, SolverKind::Direct) => unreachable!("direct solver is always constructed"),
        }
    }
}

/// `U_k = Σ_ℓ w_ℓ U^ℓ` with `(μ_ℓM + A)U^ℓ = b` for every rule in `rules`.
///
/// All rules must share the spacing `k`; their node sets are then nested in
/// one grid `y = kℓ` and each shifted system is solved once. Solves run in
/// parallel into one slot per node; the weighted sums are then accumulated
/// serially from `ℓ = -M` to `ℓ = N` with compensated summation, so the
/// result does not depend on the thread count.
///
/// The discrete operator acts on mean-free functions: `b` is projected onto
/// `1ᵀb = 0` and every `U^ℓ` (hence `U_k`) has zero mean.
pub fn apply_fractional_inverse_many(
    rules: &[SincRule],
    solver: &ShiftedSolver<'_>,
    b: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let Some(first) = rules.first() else {
        return Ok(vec![]);
    };
    if rules.iter().any(|r| r.k != first.k) {
        return Err(Error::invalid("all rules must share the quadrature spacing k"));
    }
    let n = b.len();
    if b.iter().all(|&v| v == 0.0) {
        return Ok(vec![vec![0.0; n]; rules.len()]);
    }
    let lo = rules.iter().map(|r| -(r.m as i64)).min().unwrap();
    let hi = rules.iter().map(|r| r.n as i64).max().unwrap();
    let indices: Vec<i64> = (lo..=hi).collect();
    let slots: Vec<Vec<f64>> = indices
        .par_iter()
        .map(|&l| {
            let mu = first.shift(l);
            solver.solve_mean_free(mu, b).map_err(|e| Error::NodeSolve {
                node: l,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let out = rules
        .iter()
        .map(|rule| {
            let mut acc = vec![Neumaier::default(); n];
            for l in rule.indices() {
                let w = rule.weight(l);
                let u = &slots[(l - lo) as usize];
                for (a, v) in acc.iter_mut().zip(u) {
                    a.add(w * v);
                }
            }
            acc.iter().map(Neumaier::sum).collect()
        })
        .collect();
    Ok(out)
}

/// Single-rule form of [`apply_fractional_inverse_many`].
pub fn apply_fractional_inverse(rule: &SincRule, solver: &ShiftedSolver<'_>, b: &[f64]) -> Result<Vec<f64>> {
    Ok(apply_fractional_inverse_many(std::slice::from_ref(rule), solver, b)?.remove(0))
}
