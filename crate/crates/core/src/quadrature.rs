//! Gauss rules on the reference elements.
//!
//! `order` is the number of Gauss–Legendre points per direction. The unit
//! square uses the tensor rule (`order²` points, exact for degree
//! `2·order − 1` in each variable). The unit triangle uses the collapsed
//! (Duffy) tensor rule, exact for total degree `2·order − 2`.

use crate::mesh::CellKind;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th root of P_n on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Quadrature rule on a reference element.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn for_cell(kind: CellKind, order: usize) -> Self {
        match kind {
            CellKind::Triangle => Self::triangle(order),
            CellKind::Quad => Self::square(order),
        }
    }

    /// Tensor Gauss rule on `[0,1]²`.
    pub fn square(order: usize) -> Self {
        let (x, w) = gauss_legendre_unit(order);
        let mut points = Vec::with_capacity(order * order);
        let mut weights = Vec::with_capacity(order * order);
        for j in 0..order {
            for i in 0..order {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        QuadRule { points, weights }
    }

    /// Collapsed Gauss rule on the unit triangle `{ξ₁, ξ₂ ≥ 0, ξ₁ + ξ₂ ≤ 1}`.
    pub fn triangle(order: usize) -> Self {
        let (x, w) = gauss_legendre_unit(order);
        let mut points = Vec::with_capacity(order * order);
        let mut weights = Vec::with_capacity(order * order);
        for j in 0..order {
            for i in 0..order {
                let u = x[i];
                let v = x[j] * (1.0 - u);
                points.push([u, v]);
                weights.push(w[i] * w[j] * (1.0 - u));
            }
        }
        QuadRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral_triangle(a: i32, b: i32) -> f64 {
        // ∫ ξ₁^a ξ₂^b = a! b! / (a+b+2)!
        let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn gauss_legendre_integrates_to_degree() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre_unit(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!((q - exact).abs() < 1e-14, "n={n} p={p} q={q}");
            }
        }
    }

    #[test]
    fn nodes_are_sorted_and_interior() {
        let (x, _) = gauss_legendre_unit(7);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        assert!(x[0] > 0.0 && x[6] < 1.0);
        assert!((x[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_exact_for_total_degree() {
        for order in 1..=8 {
            let rule = QuadRule::triangle(order);
            let deg = 2 * order as i32 - 2;
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a) * p[1].powi(b))
                        .sum();
                    let exact = monomial_integral_triangle(a, b);
                    assert!((q - exact).abs() < 1e-14, "order {order} a {a} b {b}");
                }
            }
        }
    }

    #[test]
    fn square_rule_weights_sum_to_one() {
        let rule = QuadRule::square(6);
        assert_eq!(rule.len(), 36);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
