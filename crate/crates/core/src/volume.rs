//! Fiberwise volume density `φ(y) = ∫ dx/w ∧ conj(dx/w)` and its radial
//! asymptotics near singular fibers.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{FiberLocation, Kodaira, SingularFiberRecord, WeierstrassFibration};
use crate::io::fmt_f64;
use crate::periods::{fiber_periods, PeriodPoint};

/// `2 Im(conj(π1) π2) = 2 |π1|^2 Im τ`.
pub fn density_from_periods(p: &PeriodPoint) -> f64 {
    2.0 * p.covolume()
}

pub fn fiber_volume(w: &WeierstrassFibration, y: Complex64) -> Result<f64> {
    Ok(density_from_periods(&fiber_periods(w, y)?))
}

/// Attained exponents `(α, d)` of `φ ~ |y|^α (1 - log|y|)^d` per Kodaira type.
pub fn predicted_exponents(kind: Kodaira) -> (Rational64, u32) {
    let r = Rational64::new;
    match kind {
        Kodaira::I(_) => (r(0, 1), 1),
        Kodaira::II => (r(-1, 3), 0),
        Kodaira::III => (r(-1, 2), 0),
        Kodaira::IV => (r(-2, 3), 0),
        Kodaira::I0Star => (r(-1, 1), 0),
        Kodaira::IStar(_) => (r(-1, 1), 1),
        Kodaira::IVStar => (r(-4, 3), 0),
        Kodaira::IIIStar => (r(-3, 2), 0),
        Kodaira::IIStar => (r(-5, 3), 0),
    }
}

/// The lower bound `-2(ℓ-1)/ℓ` in terms of the largest component multiplicity.
pub fn multiplicity_bound(kind: Kodaira) -> Rational64 {
    let l = kind.multiplicity_max() as i64;
    Rational64::new(-2 * (l - 1), l)
}

/// Largest `d` tried by the fit.
pub const MAX_LOG_POWER: u32 = 3;
/// Angles used for circle averages.
pub const DEFAULT_ANGLES: usize = 16;
/// Smallest admissible sampling radius.
pub const MIN_RADIUS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub alpha_fit: f64,
    pub d_fit: u32,
    pub c_fit: f64,
    /// Offset `β ≥ 1` of the logarithm, `φ ≈ C ρ^α (β - log ρ)^d`; 1 when `d = 0`.
    pub beta_fit: f64,
    pub rms_residual: f64,
    /// RMS residual of the best α for each `d = 0..=3`.
    pub rms_by_d: Vec<f64>,
    /// Set when the residuals are not unimodal in `d`.
    pub ambiguous: bool,
}

impl AsymptoticFit {
    /// The fitted profile at radius `rho`.
    pub fn model(&self, rho: f64) -> f64 {
        self.c_fit * rho.powf(self.alpha_fit) * (self.beta_fit - rho.ln()).powi(self.d_fit as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSampleSet {
    pub center: FiberLocation,
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    /// `values[j][k] = φ(center + ρ_j e^{iθ_k})`
    pub values: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub fitted: AsymptoticFit,
}

/// Largest log offset tried.
pub const MAX_LOG_OFFSET: f64 = 1e3;

/// `(α, log C, rms)` of the least-squares line through
/// `log φ̄ - d log(β - log ρ)` against `log ρ`.
fn line_fit(xs: &[f64], logs: &[f64], d: u32, beta: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let ys: Vec<f64> = xs
        .iter()
        .zip(logs)
        .map(|(x, m)| m - d as f64 * (beta - x).ln())
        .collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let logc = my - alpha * mx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - alpha * x - logc).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (alpha, logc, rms)
}

/// Best offset in `[1, MAX_LOG_OFFSET]` for a given `d`: a geometric scan
/// followed by golden-section refinement in `log β`.
fn best_offset(xs: &[f64], logs: &[f64], d: u32) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let rms = |lb: f64| line_fit(xs, logs, d, lb.exp()).2;
    let hi = MAX_LOG_OFFSET.ln();
    let n = 64;
    let grid: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
    let i = (0..=n).min_by(|&a, &b| rms(grid[a]).total_cmp(&rms(grid[b]))).unwrap_or(0);
    let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, e) = (b - g * (b - a), a + g * (b - a));
        if rms(c) <= rms(e) {
            b = e;
        } else {
            a = c;
        }
    }
    let lb = 0.5 * (a + b);
    if rms(lb) <= rms(grid[i]) {
        lb.exp()
    } else {
        grid[i].exp()
    }
}

/// Least squares of `log φ̄ - d log(β - log ρ) = α log ρ + log C` for each
/// `d`, with the offset `β` fitted as well.
pub fn fit_profile(radii: &[f64], means: &[f64]) -> Result<AsymptoticFit> {
    if radii.len() != means.len() || radii.len() < 3 {
        return Err(Error::InvalidInput("need at least three radii".into()));
    }
    if means.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput("density samples must be positive".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::InvalidInput("radii must lie in (0, 1)".into()));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let logs: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let fits: Vec<(f64, u32, f64, f64, f64)> = (0..=MAX_LOG_POWER)
        .map(|d| {
            let beta = best_offset(&xs, &logs, d);
            let (alpha, logc, rms) = line_fit(&xs, &logs, d, beta);
            (alpha, d, logc.exp(), beta, rms)
        })
        .collect();
    let rms_by_d: Vec<f64> = fits.iter().map(|f| f.4).collect();
    let best = (0..fits.len())
        .min_by(|&a, &b| rms_by_d[a].total_cmp(&rms_by_d[b]))
        .unwrap_or(0);
    let ambiguous = !unimodal(&rms_by_d, best);
    let (alpha_fit, d_fit, c_fit, beta_fit, rms_residual) = fits[best];
    Ok(AsymptoticFit {
        alpha_fit,
        d_fit,
        c_fit,
        beta_fit,
        rms_residual,
        rms_by_d,
        ambiguous,
    })
}

fn unimodal(v: &[f64], argmin: usize) -> bool {
    v[..=argmin].windows(2).all(|w| w[0] >= w[1]) && v[argmin..].windows(2).all(|w| w[0] <= w[1])
}

/// Dyadic radii `ρ0 2^{-j}`, `j = 0..=levels`.
pub fn dyadic_radii(rho0: f64, levels: usize) -> Vec<f64> {
    (0..=levels).map(|j| rho0 * 0.5f64.powi(j as i32)).collect()
}

/// Samples `density` on circles around `center` and fits the radial profile.
pub fn fit_density<F>(
    center: FiberLocation,
    chart_center: Complex64,
    rho0: f64,
    levels: usize,
    angles: usize,
    density: F,
) -> Result<VolumeSampleSet>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    use rayon::prelude::*;
    if levels < 12 {
        return Err(Error::InvalidInput(format!("need at least 12 radius levels, got {levels}")));
    }
    let radii = dyadic_radii(rho0, levels);
    if *radii.last().unwrap() < MIN_RADIUS * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "deepest radius {:e} is below {:e}",
            radii.last().unwrap(),
            MIN_RADIUS
        )));
    }
    // offset by half a step so no sample sits on the real axis through the fiber
    let thetas: Vec<f64> = (0..angles)
        .map(|k| 2.0 * PI * (k as f64 + 0.5) / angles as f64)
        .collect();
    let values: Vec<Vec<f64>> = radii
        .par_iter()
        .map(|&r| {
            thetas
                .iter()
                .map(|&th| density(chart_center + Complex64::from_polar(r, th)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    if let Some(bad) = values.iter().flatten().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("non-positive density sample {bad}")));
    }
    let means: Vec<f64> = values
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let fitted = fit_profile(&radii, &means)?;
    Ok(VolumeSampleSet {
        center,
        radii,
        angles: thetas,
        values,
        means,
        fitted,
    })
}

/// Circle-averaged fit of `φ` around a singular fiber, on the chart containing it.
pub fn fit_asymptotics(
    w: &WeierstrassFibration,
    fiber: &SingularFiberRecord,
    rho0: f64,
    levels: usize,
) -> Result<VolumeSampleSet> {
    let chart = crate::periods::chart_for_fiber(w, fiber)?;
    let center = fiber.chart_location();
    let iso = crate::periods::isolation_radius_of(&chart, center)?;
    if rho0 >= iso {
        return Err(Error::InvalidInput(format!(
            "ρ0 = {rho0:e} reaches another fiber at distance {iso:e}"
        )));
    }
    fit_density(fiber.location, center, rho0, levels, DEFAULT_ANGLES, |y| {
        fiber_volume(&chart, y)
    })
}

/// Fit report CSV.
pub fn fit_report_csv(rows: &[(SingularFiberRecord, AsymptoticFit)]) -> String {
    let mut out = String::from("fiber_location,type,alpha_pred,d_pred,alpha_fit,d_fit,C_fit,rms\n");
    for (r, f) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.location,
            r.kodaira_type,
            r.alpha_pred,
            r.d_pred,
            fmt_f64(f.alpha_fit),
            f.d_fit,
            fmt_f64(f.c_fit),
            fmt_f64(f.rms_residual)
        ));
    }
    out
}

/// Log-log plot of the circle averages with the fitted curve.
pub fn fit_svg(set: &VolumeSampleSet) -> String {
    let (w, h, m) = (480.0, 360.0, 40.0);
    let xs: Vec<f64> = set.radii.iter().map(|r| r.log10()).collect();
    let ys: Vec<f64> = set.means.iter().map(|v| v.log10()).collect();
    let f = &set.fitted;
    let model: Vec<f64> = set
        .radii
        .iter()
        .map(|r| f.model(*r).log10())
        .collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys.iter().chain(&model).copied().collect::<Vec<_>>());
    let px = |x: f64| m + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let line: Vec<String> = xs
        .iter()
        .zip(&model)
        .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
        .collect();
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"steelblue\" points=\"{}\"/>\n",
        line.join(" ")
    ));
    for (x, y) in xs.iter().zip(&ys) {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"black\"/>\n",
            px(*x),
            py(*y)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{m}\" y=\"20\" font-size=\"12\">alpha = {:.4}, d = {}</text>\n</svg>\n",
        f.alpha_fit, f.d_fit
    ));
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}
