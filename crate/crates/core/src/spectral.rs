//! Eigenvalues of 3×3 real matrices through the characteristic cubic.

use num_complex::Complex64;

pub type Mat3 = [[f64; 3]; 3];

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Coefficients `(a, b, c)` of `λ³ + aλ² + bλ + c = det(λI − M)`.
pub fn char_poly(m: &Mat3) -> (f64, f64, f64) {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    (-tr, minors, -det)
}

/// Roots of `λ³ + aλ² + bλ + c` by Cardano's formula in complex arithmetic,
/// each refined by one Newton step.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = Complex64::new(q * q / 4.0 + p * p * p / 27.0, 0.0).sqrt();
    let half_q = Complex64::new(-q / 2.0, 0.0);
    // Take the larger of the two candidates to avoid cancellation.
    let w = if (half_q + disc).norm() >= (half_q - disc).norm() {
        half_q + disc
    } else {
        half_q - disc
    };
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let cbrt = if w.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { w.powf(1.0 / 3.0) };
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    let mut rot = Complex64::new(1.0, 0.0);
    for root in roots.iter_mut() {
        let u = cbrt * rot;
        let t = if u.norm() == 0.0 { u } else { u - p / (3.0 * u) };
        *root = polish(t - shift, a, b, c);
        rot *= omega;
    }
    roots
}

fn polish(z: Complex64, a: f64, b: f64, c: f64) -> Complex64 {
    let f = ((z + a) * z + b) * z + c;
    let df = (3.0 * z + 2.0 * a) * z + b;
    if df.norm() == 0.0 {
        z
    } else {
        let next = z - f / df;
        if next.re.is_finite() && next.im.is_finite() {
            next
        } else {
            z
        }
    }
}

pub fn eigenvalues3(m: &Mat3) -> [Complex64; 3] {
    let (a, b, c) = char_poly(m);
    cubic_roots(a, b, c)
}

pub fn spectral_radius3(m: &Mat3) -> f64 {
    eigenvalues3(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
