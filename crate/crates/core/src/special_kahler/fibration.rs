//! The `n = 1` prepotential of an elliptic fibration: `y = ∫ π1 dt`,
//! `∂F/∂y = ∫ π2 dt`, so `Z = τ`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fibration::WeierstrassFibration;
use crate::periods::{continue_periods, fiber_periods, PeriodPoint};

/// Nodes on the sampling circle.
const SAMPLES: usize = 256;
/// Sampling radius as a fraction of the distance to the discriminant.
const SAMPLE_FRACTION: f64 = 0.8;
/// Largest domain radius as a fraction of the distance to the discriminant.
pub const DOMAIN_FRACTION: f64 = 0.5;

/// Taylor expansions of a marked period basis on a disc free of singular fibers.
#[derive(Debug, Clone)]
pub struct FibrationPrepotential {
    w: WeierstrassFibration,
    center: Complex64,
    radius: f64,
    basis: PeriodPoint,
    /// Sampling radius `r`; the series are in `(t - center) / r`.
    scale: f64,
    pi1: Vec<Complex64>,
    pi2: Vec<Complex64>,
}

fn horner(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

/// `∫_0^x Σ c_k s^k ds`.
fn horner_integral(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (k, c)| acc * x + c / (k + 1) as f64)
        * x
}

impl FibrationPrepotential {
    /// Chart on `|t - center| ≤ radius` in the given marked basis at `center`,
    /// or in the canonical basis there.
    pub fn new(w: &WeierstrassFibration, center: Complex64, radius: f64, basis: Option<PeriodPoint>) -> Result<Self> {
        let dist = w.distance_to_discriminant(center);
        if !(radius > 0.0 && radius <= DOMAIN_FRACTION * dist) {
            return Err(Error::InvalidInput(format!(
                "chart radius {radius:e} must be positive and at most {DOMAIN_FRACTION} of the distance {dist:e} to the discriminant"
            )));
        }
        let basis = match basis {
            Some(b) if (b.y - center).norm() <= 1e-12 * (1.0 + center.norm()) => b,
            Some(b) => {
                return Err(Error::InvalidInput(format!("basis given at {} instead of {center}", b.y)));
            }
            None => fiber_periods(w, center)?,
        };
        let r = SAMPLE_FRACTION * dist;
        let mut p = continue_periods(w, &basis, &[center + r])?;
        let mut values = Vec::with_capacity(SAMPLES);
        values.push((p.pi1, p.pi2));
        for j in 1..SAMPLES {
            let t = center + Complex64::from_polar(r, 2.0 * PI * j as f64 / SAMPLES as f64);
            p = continue_periods(w, &p, &[t])?;
            values.push((p.pi1, p.pi2));
        }
        let back = continue_periods(w, &p, &[center + r])?;
        if (back.pi1 - values[0].0).norm() + (back.pi2 - values[0].1).norm() > 1e-8 * values[0].0.norm() {
            return Err(Error::InvalidInput("periods are not single-valued on the sampling circle".into()));
        }
        let coeffs = |pick: fn(&(Complex64, Complex64)) -> Complex64| -> Vec<Complex64> {
            (0..SAMPLES)
                .map(|k| {
                    let s: Complex64 = values
                        .iter()
                        .enumerate()
                        .map(|(j, v)| pick(v) * Complex64::from_polar(1.0, -2.0 * PI * (j * k % SAMPLES) as f64 / SAMPLES as f64))
                        .sum();
                    s / SAMPLES as f64
                })
                .collect()
        };
        let pi1 = coeffs(|v| v.0);
        let pi2 = coeffs(|v| v.1);
        Ok(FibrationPrepotential {
            w: w.clone(),
            center,
            radius,
            basis,
            scale: r,
            pi1,
            pi2,
        })
    }

    /// The chart at the end of `path`, with the basis continued along it.
    pub fn continued(&self, path: &[Complex64], radius: f64) -> Result<Self> {
        let end = continue_periods(&self.w, &self.basis, path)?;
        FibrationPrepotential::new(&self.w, end.y, radius, Some(end))
    }

    pub fn fibration(&self) -> &WeierstrassFibration {
        &self.w
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn basis(&self) -> &PeriodPoint {
        &self.basis
    }

    pub fn contains(&self, t: Complex64) -> bool {
        (t - self.center).norm() <= self.radius * (1.0 + 1e-12)
    }

    /// `(π1, π2)` at `t` in the chart's marking.
    pub fn periods(&self, t: Complex64) -> (Complex64, Complex64) {
        let x = (t - self.center) / self.scale;
        (horner(&self.pi1, x), horner(&self.pi2, x))
    }

    /// Special coordinate `y(t) = ∫_center^t π1`.
    pub fn special_coordinate(&self, t: Complex64) -> Complex64 {
        horner_integral(&self.pi1, (t - self.center) / self.scale) * self.scale
    }

    /// `∂F/∂y (t) = ∫_center^t π2`.
    pub fn dual_coordinate(&self, t: Complex64) -> Complex64 {
        horner_integral(&self.pi2, (t - self.center) / self.scale) * self.scale
    }

    pub fn tau(&self, t: Complex64) -> Complex64 {
        let (p1, p2) = self.periods(t);
        p2 / p1
    }

    /// Special Kähler density in the base coordinate, `Im τ |π1|^2`.
    pub fn density(&self, t: Complex64) -> f64 {
        let (p1, p2) = self.periods(t);
        (p1.conj() * p2).im
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::models::two_nodal;

    #[test]
    fn series_reproduce_direct_periods() {
        let w = two_nodal();
        let center = Complex64::new(-1.0, 0.5);
        let chart = FibrationPrepotential::new(&w, center, 0.6, None).unwrap();
        for t in [center, center + Complex64::new(0.4, -0.3), center + Complex64::new(-0.2, 0.55)] {
            let direct = continue_periods(&w, chart.basis(), &[t]).unwrap();
            let (p1, p2) = chart.periods(t);
            assert!((p1 - direct.pi1).norm() < 1e-10 * direct.pi1.norm(), "{p1} {}", direct.pi1);
            assert!((p2 - direct.pi2).norm() < 1e-10 * direct.pi2.norm());
        }
    }

    #[test]
    fn special_coordinate_is_the_integral_of_pi1() {
        let w = two_nodal();
        let center = Complex64::new(-1.0, 0.5);
        let chart = FibrationPrepotential::new(&w, center, 0.6, None).unwrap();
        let t = center + Complex64::new(0.3, 0.2);
        let rule = crate::quadrature::gl16();
        let direct = rule.integrate(0.0, 1.0, |s| chart.periods(center + (t - center) * s).0 * (t - center));
        assert!((chart.special_coordinate(t) - direct).norm() < 1e-13);
    }

    #[test]
    fn oversized_domain_is_rejected() {
        let w = two_nodal();
        assert!(FibrationPrepotential::new(&w, Complex64::new(0.0, 0.0), 0.6, None).is_err());
    }
}
