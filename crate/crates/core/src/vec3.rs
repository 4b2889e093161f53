//! Fixed-size helpers for 3-vectors and the 3×2 Jacobians of surface maps.

pub type Vec3 = [f64; 3];

/// A 3×2 matrix stored by columns.
pub type Jac = [Vec3; 2];

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}

/// `m · v` for a row-major 3×3 matrix.
#[inline]
pub fn mat_vec(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// First fundamental form `G = JᵀJ` as `[g11, g12, g22]`.
#[inline]
pub fn metric(j: &Jac) -> [f64; 3] {
    [dot(&j[0], &j[0]), dot(&j[0], &j[1]), dot(&j[1], &j[1])]
}

/// Area element `|∂₁F × ∂₂F| = sqrt(det G)`.
#[inline]
pub fn area_element(j: &Jac) -> f64 {
    norm(&cross(&j[0], &j[1]))
}

/// Singular values `(σ_min, σ_max)` of a 3×2 matrix.
pub fn singular_values(j: &Jac) -> (f64, f64) {
    let [a, b, c] = metric(j);
    let tr = a + c;
    let det = (a * c - b * b).max(0.0);
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let big = 0.5 * (tr + disc);
    // small eigenvalue via det/big avoids cancellation
    let small = if big > 0.0 { det / big } else { 0.0 };
    (small.max(0.0).sqrt(), big.sqrt())
}

/// Maps a reference gradient `∇̂v` to the tangential gradient `J G⁻¹ ∇̂v`.
///
/// Returns `None` when `G` is singular.
pub fn tangential_gradient(j: &Jac, ref_grad: [f64; 2]) -> Option<Vec3> {
    let [a, b, c] = metric(j);
    let det = a * c - b * b;
    if !(det > 0.0) {
        return None;
    }
    let x0 = (c * ref_grad[0] - b * ref_grad[1]) / det;
    let x1 = (-b * ref_grad[0] + a * ref_grad[1]) / det;
    Some(add(&scale(&j[0], x0), &scale(&j[1], x1)))
}
