//! Independent reference solutions shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Solves the cyclic tridiagonal system `a x_{i−1} + b_i x_i + a x_{i+1} = d_i`.
fn cyclic_tridiagonal(a: f64, b: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    // Sherman-Morrison: split off the corner entries
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= a * a / gamma;
    let thomas = |rhs: &[f64]| {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        c[0] = a / bb[0];
        x[0] = rhs[0] / bb[0];
        for i in 1..n {
            let m = bb[i] - a * c[i - 1];
            c[i] = a / m;
            x[i] = (rhs[i] - a * x[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let y = thomas(d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = a;
    let z = thomas(&u);
    let v0 = 1.0;
    let vn = a / gamma;
    let factor = (v0 * y[0] + vn * y[n - 1]) / (1.0 + v0 * z[0] + vn * z[n - 1]);
    y.iter().zip(&z).map(|(y, z)| y - factor * z).collect()
}

/// Second-order finite differences and Newton for `u'' + 1 = e^{β(u − A cos 2πx)}`
/// on the unit circle with `m` points. Returns `u` at `x_i = i/m`.
pub fn liouville_fd(amplitude: f64, beta: f64, m: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let phi: Vec<f64> = (0..m)
        .map(|i| amplitude * (2.0 * PI * i as f64 * h).cos())
        .collect();
    let mut u = vec![0.0; m];
    let off = 1.0 / (h * h);
    for _ in 0..50 {
        let e: Vec<f64> = u
            .iter()
            .zip(&phi)
            .map(|(u, p)| (beta * (u - p)).exp())
            .collect();
        let g: Vec<f64> = (0..m)
            .map(|i| {
                let (l, r) = (u[(i + m - 1) % m], u[(i + 1) % m]);
                (l - 2.0 * u[i] + r) * off + 1.0 - e[i]
            })
            .collect();
        let norm = g.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if norm < 1e-13 {
            break;
        }
        let diag: Vec<f64> = e.iter().map(|e| -2.0 * off - beta * e).collect();
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = cyclic_tridiagonal(off, &diag, &rhs);
        for (u, d) in u.iter_mut().zip(delta) {
            *u += d;
        }
    }
    u
}

/// Edge `x0` of the non-contact region for the flat one-form envelope of
/// `A cos 2πx`: the envelope is `c − x²/2` on `|x| ≤ x0` (mod 1) and the weight
/// elsewhere; tangency gives `x0 = 2πA sin 2πx0`. Needs `4π²A > 1`.
pub fn cosine_free_boundary(amplitude: f64) -> f64 {
    let h = |x: f64| x - 2.0 * PI * amplitude * (2.0 * PI * x).sin();
    let (mut lo, mut hi) = (0.25, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Continuum envelope of `A cos 2πx` under the flat form, at `x ∈ [0, 1)`.
pub fn cosine_envelope(amplitude: f64, x: f64) -> f64 {
    let x0 = cosine_free_boundary(amplitude);
    let d = x.min(1.0 - x);
    if d <= x0 {
        amplitude * (2.0 * PI * x0).cos() + 0.5 * x0 * x0 - 0.5 * d * d
    } else {
        amplitude * (2.0 * PI * x).cos()
    }
}
