//! `∫ √φ |dz|` along straight segments with singular endpoints.

use num_complex::Complex64;

use super::density::{ChartPoint, Density, Domain};
use crate::error::{Error, Result};
use crate::quadrature::{gl4, gl8, Rule};

/// A panel is integrated directly once every puncture is at least
/// `clearance` panel lengths away.
#[derive(Clone, Copy)]
pub(crate) struct Quad {
    rule: fn() -> &'static Rule,
    clearance: f64,
}

pub(crate) const EDGE_QUAD: Quad = Quad {
    rule: gl4,
    clearance: 2.0,
};

pub(crate) const SEARCH_QUAD: Quad = Quad {
    rule: gl4,
    clearance: 1.0,
};

pub(crate) const PATH_QUAD: Quad = Quad {
    rule: gl8,
    clearance: 1.0,
};

const MAX_DEPTH: u32 = 90;

pub(crate) fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * d.conj()).re / l2).clamp(0.0, 1.0);
    (a + d * s - p).norm()
}

/// `a + (b - a) t`, measured from the nearer end to keep points next to a
/// puncture at `b` accurate.
fn lerp(a: Complex64, b: Complex64, t: f64) -> Complex64 {
    if t <= 0.5 {
        a + (b - a) * t
    } else {
        b + (a - b) * (1.0 - t)
    }
}

/// The chart in which the straight segment between two points is taken:
/// the shared chart, or on the sphere the one keeping both ends closer to the origin.
pub(crate) fn common_chart(domain: Domain, a: ChartPoint, b: ChartPoint) -> (usize, Complex64, Complex64) {
    if a.chart == b.chart || domain.charts() == 1 {
        return (a.chart, a.z, b.z);
    }
    let mut best: Option<(f64, usize, Complex64, Complex64)> = None;
    for c in [a.chart, b.chart] {
        if let (Some(za), Some(zb)) = (a.coords_in(c), b.coords_in(c)) {
            let m = za.norm().max(zb.norm());
            if best.map_or(true, |x| m < x.0) {
                best = Some((m, c, za, zb));
            }
        }
    }
    let (_, c, za, zb) = best.expect("one chart contains both points");
    (c, za, zb)
}

/// `∫ √φ |dz|` over `[a, b]` in `chart`. An endpoint closer than
/// `r_cut / 1000` to a puncture is treated as that puncture; the last
/// `r_cut` of such a segment uses the local power law.
pub(crate) fn sqrt_density_integral(
    density: &Density,
    chart: usize,
    a: Complex64,
    b: Complex64,
    r_cut: f64,
    quad: Quad,
) -> Result<f64> {
    // a fixed orientation makes the result exactly symmetric
    let (a, b) = if (b.re, b.im) < (a.re, a.im) { (b, a) } else { (a, b) };
    let singular = density.singular_points(chart);
    let punctures = density.punctures();
    let at = |p: Complex64| singular.iter().find(|(_, s)| (p - s).norm() <= 1e-3 * r_cut).map(|x| x.0);
    let end_a = at(a);
    let end_b = at(b);
    let len = (b - a).norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let rule = (quad.rule)();
    let mut total = 0.0;
    let mut stack = vec![(0.0f64, 1.0f64, 0u32)];
    while let Some((t0, t1, depth)) = stack.pop() {
        let pa = lerp(a, b, t0);
        let pb = lerp(a, b, t1);
        let l = len * (t1 - t0);
        let (mut near, mut delta) = (usize::MAX, f64::INFINITY);
        for &(i, s) in singular {
            let d = point_segment_distance(s, pa, pb);
            if d < delta {
                delta = d;
                near = i;
            }
        }
        if delta >= quad.clearance * l {
            let mut acc = 0.0;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let z = pa + (pb - pa) * (0.5 * (1.0 + x));
                acc += w * density.value(chart, z)?.sqrt();
            }
            total += 0.5 * l * acc;
            continue;
        }
        let touches = (t0 == 0.0 && end_a == Some(near)) || (t1 == 1.0 && end_b == Some(near));
        if touches && l <= r_cut {
            let far = if t0 == 0.0 && end_a == Some(near) { pb } else { pa };
            let alpha = punctures[near].alpha;
            total += density.value(chart, far)?.sqrt() * l / (1.0 + 0.5 * alpha);
            continue;
        }
        if delta < r_cut && end_a != Some(near) && end_b != Some(near) {
            return Err(Error::ExcludedZone(singular.iter().find(|x| x.0 == near).map(|x| x.1).unwrap_or(pa)));
        }
        if depth >= MAX_DEPTH {
            return Err(Error::ExcludedZone(pa));
        }
        let tm = 0.5 * (t0 + t1);
        stack.push((tm, t1, depth + 1));
        stack.push((t0, tm, depth + 1));
    }
    Ok(total)
}

/// Same as [`sqrt_density_integral`] for two chart points, in their common chart.
pub(crate) fn segment_integral(density: &Density, a: ChartPoint, b: ChartPoint, r_cut: f64, quad: Quad) -> Result<f64> {
    let (c, za, zb) = common_chart(density.domain(), a, b);
    sqrt_density_integral(density, c, za, zb, r_cut, quad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_segment_is_euclidean() {
        let d = Density::flat(2.0, 4.0).unwrap();
        let v = sqrt_density_integral(&d, 0, c(-1.0, 0.2), c(0.5, 1.0), 1e-8, PATH_QUAD).unwrap();
        assert!((v - 2.0 * 1.7).abs() < 1e-14);
    }

    #[test]
    fn radial_power_law_matches_closed_form() {
        for alpha in [-5.0 / 3.0, -1.0, -1.0 / 3.0, 0.5] {
            let d = Density::power_law(2.0, alpha).unwrap();
            let dir = Complex64::from_polar(1.0, 0.7);
            let rho: f64 = 0.8;
            let exact = rho.powf(1.0 + alpha / 2.0) / (1.0 + alpha / 2.0);
            for (quad, tol) in [(PATH_QUAD, 1e-11), (EDGE_QUAD, 1e-7)] {
                let v = sqrt_density_integral(&d, 0, c(0.0, 0.0), dir * rho, 1e-8, quad).unwrap();
                assert!((v - exact).abs() < tol * exact, "{alpha} {v} {exact}");
                let back = sqrt_density_integral(&d, 0, dir * rho, c(0.0, 0.0), 1e-8, quad).unwrap();
                assert_eq!(back, v);
            }
        }
    }

    #[test]
    fn segment_passing_near_a_puncture() {
        // a chord at distance h from the origin through |z|^-1: ∫ dx / sqrt(x^2 + h^2)
        let dens = Density::power_law(2.0, -1.0).unwrap();
        let h = 1e-3;
        let v = sqrt_density_integral(&dens, 0, c(-1.0, h), c(1.0, h), 1e-8, PATH_QUAD).unwrap();
        // ∫_{-1}^{1} (x^2 + h^2)^{-1/4} dx by a fine composite oracle
        let rule = crate::quadrature::gl16();
        let mut exact = 0.0;
        let mut edges = vec![0.0];
        let mut x = h / 4.0;
        while x < 1.0 {
            edges.push(x);
            x *= 1.5;
        }
        edges.push(1.0);
        for win in edges.windows(2) {
            exact += 2.0 * rule.integrate(win[0], win[1], |x| c((x * x + h * h).powf(-0.25), 0.0)).re;
        }
        assert!((v - exact).abs() < 1e-10 * exact, "{v} {exact}");
        assert!(sqrt_density_integral(&dens, 0, c(-1.0, 0.0), c(1.0, 0.0), 1e-8, PATH_QUAD).is_err());
    }

    #[test]
    fn common_chart_prefers_small_coordinates() {
        let a = ChartPoint::new(0, c(0.99, 0.0));
        let b = ChartPoint::new(1, c(0.8, 0.0));
        let (ch, za, zb) = common_chart(Domain::Sphere, a, b);
        assert_eq!(ch, 1);
        assert!((za - c(1.0 / 0.99, 0.0)).norm() < 1e-15);
        assert_eq!(zb, b.z);
    }
}
