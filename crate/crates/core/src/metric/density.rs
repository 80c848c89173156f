//! Conformal densities `φ |dz|^2` on a disc or on the sphere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{singular_fibers, FiberIssue, FiberLocation, WeierstrassFibration};
use crate::volume::fiber_volume;

/// Where a density lives.
///
/// `Sphere` is covered by two unit discs whose coordinates are related by
/// `z ↦ 1/z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Disc { radius: f64 },
    Sphere,
}

impl Domain {
    pub fn charts(&self) -> usize {
        match self {
            Domain::Disc { .. } => 1,
            Domain::Sphere => 2,
        }
    }

    pub fn chart_radius(&self) -> f64 {
        match self {
            Domain::Disc { radius } => *radius,
            Domain::Sphere => 1.0,
        }
    }
}

/// A point given in one chart of a [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub z: Complex64,
}

impl ChartPoint {
    pub fn new(chart: usize, z: Complex64) -> Self {
        ChartPoint { chart, z }
    }

    /// Coordinates in `chart`; `None` for the pole of the other sphere chart.
    pub fn coords_in(&self, chart: usize) -> Option<Complex64> {
        if chart == self.chart {
            Some(self.z)
        } else if self.z.norm() == 0.0 {
            None
        } else {
            Some(self.z.inv())
        }
    }

    /// On the sphere, the representative with `|z| ≤ 1`.
    pub fn normalized(self, domain: Domain) -> ChartPoint {
        match domain {
            Domain::Sphere if self.z.norm() > 1.0 => ChartPoint::new(1 - self.chart, self.z.inv()),
            _ => self,
        }
    }

    pub(crate) fn key(&self) -> (usize, f64, f64) {
        (self.chart, self.z.re, self.z.im)
    }
}

/// A singular point of the density with its local exponents
/// `φ ~ |z|^α (-log|z|)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Puncture {
    pub label: String,
    pub chart: usize,
    pub z: Complex64,
    pub alpha: f64,
    pub d: u32,
    pub kodaira: Option<String>,
}

#[derive(Debug, Clone)]
pub enum DensityKind {
    Flat { value: f64 },
    /// `|z|^α` with a puncture at the origin.
    PowerLaw { alpha: f64 },
    /// Fiber volume on the base sphere; chart 0 is `t = R z`, chart 1 is `t = R / z`.
    Fibration {
        w: WeierstrassFibration,
        w_inf: WeierstrassFibration,
        scale: f64,
    },
    /// Fiber volume on the disc `|t - center| ≤ radius`, with `t = center + z`.
    FibrationDisc {
        w: WeierstrassFibration,
        center: Complex64,
    },
}

/// A positive density with known punctures.
#[derive(Debug, Clone)]
pub struct Density {
    label: String,
    domain: Domain,
    kind: DensityKind,
    punctures: Vec<Puncture>,
    /// Every puncture seen from each chart, as `(index, location)`.
    singular: Vec<Vec<(usize, Complex64)>>,
}

impl Density {
    fn assemble(label: String, domain: Domain, kind: DensityKind, punctures: Vec<Puncture>) -> Density {
        let singular = (0..domain.charts())
            .map(|c| {
                punctures
                    .iter()
                    .enumerate()
                    .filter_map(|(i, p)| ChartPoint::new(p.chart, p.z).coords_in(c).map(|z| (i, z)))
                    .collect()
            })
            .collect();
        Density {
            label,
            domain,
            kind,
            punctures,
            singular,
        }
    }

    /// `φ ≡ value` on the disc of the given radius.
    pub fn flat(radius: f64, value: f64) -> Result<Density> {
        if !(radius > 0.0 && value > 0.0) {
            return Err(Error::InvalidInput("flat density needs positive radius and value".into()));
        }
        Ok(Self::assemble(
            format!("flat-{radius}"),
            Domain::Disc { radius },
            DensityKind::Flat { value },
            Vec::new(),
        ))
    }

    /// `φ ≡ value` with the given points treated as punctures.
    pub fn flat_marked(radius: f64, value: f64, marks: &[Complex64]) -> Result<Density> {
        let mut d = Self::flat(radius, value)?;
        if marks.iter().any(|m| !(m.norm() < radius)) {
            return Err(Error::InvalidInput("marked points must lie inside the disc".into()));
        }
        let punctures = marks
            .iter()
            .map(|&z| Puncture {
                label: format!("{z}"),
                chart: 0,
                z,
                alpha: 0.0,
                d: 0,
                kodaira: None,
            })
            .collect();
        d = Self::assemble(d.label, d.domain, d.kind, punctures);
        Ok(d)
    }

    /// `φ = |z|^α` on the disc of the given radius.
    pub fn power_law(radius: f64, alpha: f64) -> Result<Density> {
        if !(radius > 0.0 && alpha > -2.0) {
            return Err(Error::InvalidInput("power law needs radius > 0 and alpha > -2".into()));
        }
        let punctures = vec![Puncture {
            label: "0".into(),
            chart: 0,
            z: Complex64::new(0.0, 0.0),
            alpha,
            d: 0,
            kodaira: None,
        }];
        Ok(Self::assemble(
            format!("power-{alpha}"),
            Domain::Disc { radius },
            DensityKind::PowerLaw { alpha },
            punctures,
        ))
    }

    /// Fiber volume of `w` over the whole base.
    ///
    /// Fails if some singular point is non-minimal or unclassifiable.
    pub fn fibration(w: &WeierstrassFibration) -> Result<Density> {
        let scan = singular_fibers(w)?;
        if let Some(issue) = scan.issues.first() {
            return Err(Error::InvalidInput(format!("fibration has an unusable singular point: {issue:?}")));
        }
        let finite: Vec<Complex64> = scan
            .records
            .iter()
            .filter_map(|r| match r.location {
                FiberLocation::Finite(z) => Some(z),
                FiberLocation::Infinity => None,
            })
            .collect();
        let scale = choose_scale(&finite);
        let punctures = scan
            .records
            .iter()
            .map(|r| {
                let (chart, z) = match r.location {
                    FiberLocation::Finite(t) if t.norm() <= scale => (0, t / scale),
                    FiberLocation::Finite(t) => (1, scale / t),
                    FiberLocation::Infinity => (1, Complex64::new(0.0, 0.0)),
                };
                Puncture {
                    label: r.location.to_string(),
                    chart,
                    z,
                    alpha: ratio(r.alpha_pred),
                    d: r.d_pred,
                    kodaira: Some(r.kodaira_type.to_string()),
                }
            })
            .collect();
        let kind = DensityKind::Fibration {
            w: w.clone(),
            w_inf: w.infinity_chart()?,
            scale,
        };
        Ok(Self::assemble(w.label().to_string(), Domain::Sphere, kind, punctures))
    }

    /// Fiber volume of `w` on the disc `|t - center| ≤ radius`.
    pub fn fibration_disc(w: &WeierstrassFibration, center: Complex64, radius: f64) -> Result<Density> {
        let scan = singular_fibers(w)?;
        let inside = |l: &FiberLocation| matches!(l, FiberLocation::Finite(t) if (t - center).norm() <= radius);
        for issue in &scan.issues {
            let loc = match issue {
                FiberIssue::NonMinimal { location, .. } | FiberIssue::Unclassifiable { location, .. } => location,
            };
            if inside(loc) {
                return Err(Error::InvalidInput(format!("unusable singular point inside the disc: {issue:?}")));
            }
        }
        let punctures = scan
            .records
            .iter()
            .filter(|r| inside(&r.location))
            .map(|r| Puncture {
                label: r.location.to_string(),
                chart: 0,
                z: r.chart_location() - center,
                alpha: ratio(r.alpha_pred),
                d: r.d_pred,
                kodaira: Some(r.kodaira_type.to_string()),
            })
            .collect();
        Ok(Self::assemble(
            format!("{}@disc", w.label()),
            Domain::Disc { radius },
            DensityKind::FibrationDisc { w: w.clone(), center },
            punctures,
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn punctures(&self) -> &[Puncture] {
        &self.punctures
    }

    pub(crate) fn singular_points(&self, chart: usize) -> &[(usize, Complex64)] {
        &self.singular[chart]
    }

    pub fn fibration_ref(&self) -> Option<&WeierstrassFibration> {
        match &self.kind {
            DensityKind::Fibration { w, .. } | DensityKind::FibrationDisc { w, .. } => Some(w),
            _ => None,
        }
    }

    /// `φ` in the coordinates of `chart`.
    pub fn value(&self, chart: usize, z: Complex64) -> Result<f64> {
        let v = match &self.kind {
            DensityKind::Flat { value } => *value,
            DensityKind::PowerLaw { alpha } => {
                let r = z.norm();
                if r == 0.0 {
                    return Err(Error::ExcludedZone(z));
                }
                r.powf(*alpha)
            }
            DensityKind::Fibration { w, w_inf, scale } => {
                if chart == 0 {
                    fiber_volume(w, z * *scale)? * scale * scale
                } else {
                    fiber_volume(w_inf, z / *scale)? / (scale * scale)
                }
            }
            DensityKind::FibrationDisc { w, center } => fiber_volume(w, center + z)?,
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("density {v} at {z} is not positive")))
        }
    }

    /// Chart point of a base coordinate `t` (fibration densities only).
    pub fn base_point(&self, t: Complex64) -> Result<ChartPoint> {
        match &self.kind {
            DensityKind::Fibration { scale, .. } => Ok(ChartPoint::new(0, t / *scale).normalized(self.domain)),
            DensityKind::FibrationDisc { center, .. } => Ok(ChartPoint::new(0, t - center)),
            _ => Ok(ChartPoint::new(0, t)),
        }
    }

    /// Base coordinate of a chart point; `None` for `t = ∞`.
    pub fn base_coordinate(&self, p: ChartPoint) -> Option<Complex64> {
        match &self.kind {
            DensityKind::Fibration { scale, .. } => p.coords_in(0).map(|z| z * *scale),
            DensityKind::FibrationDisc { center, .. } => Some(center + p.z),
            _ => Some(p.z),
        }
    }
}

fn ratio(q: num_rational::Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// `R ∈ [0.7, 1.4]` keeping the finite roots as far as possible from `|t| = R`
/// in log-modulus.
fn choose_scale(roots: &[Complex64]) -> f64 {
    let margin = |r: f64| {
        roots
            .iter()
            .filter(|t| t.norm() > 0.0)
            .map(|t| (t.norm().ln() - r.ln()).abs())
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = (1.0, margin(1.0));
    for i in 0..=60 {
        let r = 0.7 * 2f64.powf(i as f64 / 60.0);
        let m = margin(r);
        if m > best.1 + 1e-12 {
            best = (r, m);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::models::default_generic_k3;

    #[test]
    fn sphere_charts_agree_on_the_overlap() {
        let w = default_generic_k3();
        let d = Density::fibration(&w).unwrap();
        let Density { kind: DensityKind::Fibration { scale, .. }, .. } = &d else {
            panic!()
        };
        assert!((0.7..=1.4).contains(scale));
        // φ0(z)|dz|^2 = φ1(1/z)|d(1/z)|^2
        for k in 0..12 {
            let z = Complex64::from_polar(1.0 + 0.01 * k as f64, 0.37 + k as f64);
            let f0 = d.value(0, z).unwrap();
            let f1 = d.value(1, z.inv()).unwrap();
            assert!((f0 - f1 / z.norm_sqr().powi(2)).abs() < 1e-10 * f0);
        }
        assert_eq!(d.punctures().len(), 24);
        for p in d.punctures() {
            assert!(p.z.norm() < 1.0);
            let t = d.base_coordinate(ChartPoint::new(p.chart, p.z)).unwrap();
            assert!(w.distance_to_discriminant(t) < 1e-12 * t.norm().max(1.0));
        }
    }

    #[test]
    fn normalized_points_lie_in_the_unit_disc() {
        let p = ChartPoint::new(0, Complex64::new(2.0, 1.0)).normalized(Domain::Sphere);
        assert_eq!(p.chart, 1);
        assert!((p.z - Complex64::new(0.4, -0.2)).norm() < 1e-15);
        let q = ChartPoint::new(0, Complex64::new(2.0, 1.0)).normalized(Domain::Disc { radius: 3.0 });
        assert_eq!(q.chart, 0);
    }
}
