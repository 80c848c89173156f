//! Quadrature oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use k3limit::quadrature::Rule;
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `2 ∫_{ei}^{ej} dx/w` by composite Gauss-Legendre in θ with `x = m + h cos θ`.
pub fn oracle_segment(ei: Complex64, ej: Complex64, ek: Complex64) -> Complex64 {
    let m = 0.5 * (ei + ej);
    let h = 0.5 * (ej - ei);
    let rule = Rule::new(20);
    let panels = 64;
    let mut acc = c(0.0, 0.0);
    let mut prev: Option<Complex64> = None;
    for p in 0..panels {
        let a = PI * p as f64 / panels as f64;
        let b = PI * (p + 1) as f64 / panels as f64;
        for (th, wt) in rule.points(a, b) {
            let mut r = (m + h * th.cos() - ek).sqrt();
            if let Some(q) = prev {
                if (q - r).norm() > (q + r).norm() {
                    r = -r;
                }
            }
            prev = Some(r);
            acc += wt / r;
        }
    }
    acc * c(0.0, 2.0)
}


/// Roots of `x^3 + a x + b` by Durand-Kerner iteration.
pub fn oracle_roots(a: Complex64, b: Complex64) -> [Complex64; 3] {
    let f = |x: Complex64| x * x * x + a * x + b;
    let scale = 1.0 + a.norm().sqrt() + b.norm().cbrt();
    let seed = c(0.4, 0.9);
    let mut r = [seed * scale, seed * seed * scale, seed * seed * seed * scale];
    for _ in 0..500 {
        for i in 0..3 {
            let mut den = c(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= r[i] - r[j];
                }
            }
            r[i] -= f(r[i]) / den;
        }
    }
    r
}

/// `2 |Im(conj z_1 z_2)|` for two segment periods whose third root keeps
/// relative distance at least 0.3, if two such segments exist.
pub fn oracle_density(a: Complex64, b: Complex64) -> Option<f64> {
    let e = oracle_roots(a, b);
    let mut periods = Vec::new();
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let d = e[j] - e[i];
        let t = ((e[k] - e[i]) * d.conj()).re / d.norm_sqr();
        let dist = (e[k] - (e[i] + d * t.clamp(0.0, 1.0))).norm() / d.norm();
        if dist > 0.3 {
            periods.push(oracle_segment(e[i], e[j], e[k]));
        }
    }
    (periods.len() >= 2).then(|| 2.0 * (periods[0].conj() * periods[1]).im.abs())
}
