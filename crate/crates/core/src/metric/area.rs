//! `∫ φ dx dy` over the domain, with smooth cut-offs around the punctures.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::density::Density;
use crate::error::Result;
use crate::quadrature::gl8;

fn bump_edge(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// 1 on `[0, 1/2]`, 0 on `[1, ∞)`, smooth in between.
fn cutoff(x: f64) -> f64 {
    let y = 2.0 * x - 1.0;
    let (p, q) = (bump_edge(1.0 - y), bump_edge(y));
    if p + q == 0.0 {
        1.0
    } else {
        p / (p + q)
    }
}

/// Cut-off discs `(center, radius)` around the punctures of `chart`.
fn bumps(density: &Density, chart: usize) -> Vec<(Complex64, f64, f64)> {
    let rd = density.domain().chart_radius();
    let singular = density.singular_points(chart);
    density
        .punctures()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.chart == chart)
        .map(|(i, p)| {
            let nearest = singular
                .iter()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| (s - p.z).norm())
                .fold(f64::INFINITY, f64::min);
            let b = (0.45 * nearest).min(0.9 * (rd - p.z.norm())).min(0.5);
            (p.z, b, p.alpha)
        })
        .collect()
}

/// `∫ φ dx dy` with quadrature spacing about `h`; the disc of radius `r_cut`
/// around each puncture uses the local power law.
pub(crate) fn density_integral(density: &Density, h: f64, r_cut: f64) -> Result<f64> {
    let rd = density.domain().chart_radius();
    let rule = gl8();
    let mut total = 0.0;
    for chart in 0..density.domain().charts() {
        let bumps = bumps(density, chart);
        let n_r = (rd / (2.0 * h)).ceil().max(4.0) as usize;
        let n_t = ((2.0 * PI * rd / h).ceil() as usize).max(64);
        for i in 0..n_r {
            let (r0, r1) = (rd * i as f64 / n_r as f64, rd * (i + 1) as f64 / n_r as f64);
            for (r, wr) in rule.points(r0, r1) {
                let mut ring = 0.0;
                for k in 0..n_t {
                    let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / n_t as f64);
                    let keep: f64 = bumps.iter().map(|(c, b, _)| 1.0 - cutoff((z - c).norm() / b)).product();
                    if keep > 0.0 {
                        ring += keep * density.value(chart, z)?;
                    }
                }
                total += ring * wr * r * 2.0 * PI / n_t as f64;
            }
        }
        // r = b x^3 absorbs the r^(1+α) behavior at the puncture
        for (c, b, alpha) in &bumps {
            let n_x = ((4.0 * b / h).ceil() as usize).max(4);
            let n_t = ((8.0 * PI * b / h).ceil() as usize).max(64);
            let xc = (r_cut / b).cbrt();
            let mut edge = 0.0;
            for k in 0..n_t {
                edge += density.value(chart, c + Complex64::from_polar(r_cut, 2.0 * PI * (k as f64 + 0.5) / n_t as f64))?;
            }
            total += 2.0 * PI * edge / n_t as f64 * r_cut * r_cut / (2.0 + alpha);
            for i in 0..n_x {
                let (x0, x1) = (xc + (1.0 - xc) * i as f64 / n_x as f64, xc + (1.0 - xc) * (i + 1) as f64 / n_x as f64);
                for (x, wx) in rule.points(x0, x1) {
                    let r = b * x * x * x;
                    let jac = 3.0 * b * x * x * r;
                    let chi = cutoff(r / b);
                    let mut ring = 0.0;
                    for k in 0..n_t {
                        let z = c + Complex64::from_polar(r, 2.0 * PI * (k as f64 + 0.5) / n_t as f64);
                        ring += density.value(chart, z)?;
                    }
                    total += chi * ring * wx * jac * 2.0 * PI / n_t as f64;
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_a_partition() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(1.2), 0.0);
        assert!((cutoff(0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_disc_area_is_exact() {
        let d = Density::flat(1.5, 2.0).unwrap();
        let v = density_integral(&d, 0.1, 1e-8).unwrap();
        assert!((v - 2.0 * PI * 2.25).abs() < 1e-12);
    }

    #[test]
    fn power_law_area_matches_closed_form() {
        for alpha in [-5.0 / 3.0, -0.5, 1.0] {
            let d = Density::power_law(1.0, alpha).unwrap();
            let v = density_integral(&d, 0.025, 1e-8).unwrap();
            let exact = 2.0 * PI / (2.0 + alpha);
            assert!((v - exact).abs() < 1e-9 * exact, "{alpha}: {v} vs {exact}");
        }
    }
}
