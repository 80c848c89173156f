use std::borrow::Cow;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::{
    continue_periods, express_in_basis, fiber_periods, idet, quasi_unipotence, round_matrix,
    MonodromyMatrix, PeriodPoint,
};
use crate::error::{Error, Result};
use crate::fibration::{FiberLocation, Kodaira, SingularFiberRecord, WeierstrassFibration};

/// Largest accepted distance of a continued change of basis from an integer matrix.
pub const MONODROMY_TOLERANCE: f64 = 1e-6;
const MIN_LOOP_POINTS: usize = 64;
const MAX_LOOP_POINTS: usize = 1024;

/// The chart containing the fiber: `w` itself, or its chart at infinity.
pub fn chart_for<'a>(
    w: &'a WeierstrassFibration,
    fiber: &SingularFiberRecord,
) -> Result<Cow<'a, WeierstrassFibration>> {
    Ok(match fiber.location {
        FiberLocation::Finite(_) => Cow::Borrowed(w),
        FiberLocation::Infinity => Cow::Owned(w.infinity_chart()?),
    })
}

/// Distance from `center` to the nearest other discriminant root of the chart.
pub fn isolation_radius(chart: &WeierstrassFibration, center: Complex64) -> Result<f64> {
    let scale = 1e-9 * (1.0 + center.norm());
    Ok(chart
        .discriminant_roots()?
        .iter()
        .map(|r| (r.location - center).norm())
        .filter(|&d| d > scale)
        .fold(f64::INFINITY, f64::min))
}

fn check_loop(chart: &WeierstrassFibration, center: Complex64, radius: f64) -> Result<()> {
    let scale = 1e-9 * (1.0 + center.norm());
    for r in chart.discriminant_roots()? {
        let d = (r.location - center).norm();
        if d > scale && d <= radius {
            return Err(Error::LoopEnclosesRoot {
                center,
                radius,
                other: r.location,
            });
        }
    }
    Ok(())
}

/// Counterclockwise polygon through `start` around `center`, `turns` times,
/// ending at `start`.
pub fn circle_path(center: Complex64, start: Complex64, points: usize, turns: usize) -> Vec<Complex64> {
    let rel = start - center;
    let total = points * turns;
    (1..=total)
        .map(|k| {
            if k == total {
                start
            } else {
                center + rel * Complex64::from_polar(1.0, 2.0 * PI * k as f64 / points as f64)
            }
        })
        .collect()
}

/// Change of basis `T` with `end = T · start` for the closed path.
pub fn loop_monodromy(
    w: &WeierstrassFibration,
    start: &PeriodPoint,
    path: &[Complex64],
) -> Result<MonodromyMatrix> {
    let end = continue_periods(w, start, path)?;
    if (end.y - start.y).norm() > 1e-12 * (1.0 + start.y.norm()) {
        return Err(Error::InvalidInput("loop does not close".into()));
    }
    let m = express_in_basis((start.pi1, start.pi2), (end.pi1, end.pi2))?;
    let (entries, residual) = round_matrix(&m);
    if residual >= MONODROMY_TOLERANCE || idet(&entries) != 1 {
        return Err(Error::NonIntegralMonodromy { residual });
    }
    Ok(MonodromyMatrix { entries, residual })
}

/// Monodromy on a circle of the given radius around the fiber, based at
/// `center + radius` in the canonical AGM basis there.
pub fn monodromy(
    w: &WeierstrassFibration,
    fiber: &SingularFiberRecord,
    radius: f64,
) -> Result<MonodromyMatrix> {
    let chart = chart_for(w, fiber)?;
    let center = fiber.chart_location();
    let base = fiber_periods(&chart, center + radius)?;
    monodromy_at(&chart, center, &base)
}

/// Monodromy around `center` on the circle through `base.y`, refining the
/// polygon until two successive discretizations agree.
pub fn monodromy_at(
    chart: &WeierstrassFibration,
    center: Complex64,
    base: &PeriodPoint,
) -> Result<MonodromyMatrix> {
    let radius = (base.y - center).norm();
    check_loop(chart, center, radius)?;
    let mut n = MIN_LOOP_POINTS;
    let mut prev = loop_monodromy(chart, base, &circle_path(center, base.y, n, 1))?;
    while n < MAX_LOOP_POINTS {
        n *= 2;
        let next = loop_monodromy(chart, base, &circle_path(center, base.y, n, 1))?;
        if next.entries == prev.entries {
            return Ok(MonodromyMatrix {
                entries: next.entries,
                residual: next.residual.max(prev.residual),
            });
        }
        prev = next;
    }
    Err(Error::NonIntegralMonodromy {
        residual: prev.residual,
    })
}

/// Default loop radius: a quarter of the distance to the nearest other fiber, at most 0.25.
pub fn default_loop_radius(w: &WeierstrassFibration, fiber: &SingularFiberRecord) -> Result<f64> {
    let chart = chart_for(w, fiber)?;
    Ok((0.25 * isolation_radius(&chart, fiber.chart_location())?).min(0.25))
}

/// Single-valuedness defect of the untwisted sections
/// `σ(w) = (I - (log w / 2πi) N) e(w)` after one loop of the base change
/// `y = p + w^β`, relative to the size of `e` at `w_sample`.
pub fn untwist_check(
    w: &WeierstrassFibration,
    fiber: &SingularFiberRecord,
    w_sample: Complex64,
) -> Result<f64> {
    let chart = chart_for(w, fiber)?;
    let center = fiber.chart_location();
    let probe = monodromy(w, fiber, w_sample.norm().min(default_loop_radius(w, fiber)?))?;
    let beta = quasi_unipotence(&probe)?.beta;

    let y_s = center + w_sample.powu(beta);
    let start = fiber_periods(&chart, y_s)?;
    let t = monodromy_at(&chart, center, &start)?;
    let q = quasi_unipotence(&t)?;
    if q.beta != beta {
        return Err(Error::InvalidInput("monodromy changed between basepoints".into()));
    }
    let n = q.n_f64();

    // one turn in w is β turns in y; a different polygon than the one used for T
    let path = circle_path(center, y_s, 96, beta as usize);
    let end = continue_periods(&chart, &start, &path)?;

    let arg = w_sample.arg().rem_euclid(2.0 * PI);
    let l0 = Complex64::new(w_sample.norm().ln(), arg);
    let l1 = l0 + Complex64::new(0.0, 2.0 * PI);
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let sigma = |l: Complex64, e: (Complex64, Complex64)| {
        let k = l / two_pi_i;
        (
            e.0 - k * (e.1 * n[0][1] + e.0 * n[0][0]),
            e.1 - k * (e.0 * n[1][0] + e.1 * n[1][1]),
        )
    };
    let s0 = sigma(l0, (start.pi1, start.pi2));
    let s1 = sigma(l1, (end.pi1, end.pi2));
    let scale = start.pi1.norm().max(start.pi2.norm());
    Ok((s1.0 - s0.0).norm().max((s1.1 - s0.1).norm()) / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReportEntry {
    pub location: FiberLocation,
    pub kodaira_type: Kodaira,
    #[serde(rename = "T")]
    pub t: [[i64; 2]; 2],
    pub residual: f64,
    pub beta: u32,
    pub d: u32,
    #[serde(rename = "N")]
    pub n: [[Rational64; 2]; 2],
}

/// Computes monodromy and quasi-unipotence for every record, filling them in place.
pub fn monodromy_report(
    w: &WeierstrassFibration,
    records: &mut [SingularFiberRecord],
) -> Result<Vec<MonodromyReportEntry>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records.iter_mut() {
        let radius = default_loop_radius(w, r)?;
        let t = monodromy(w, r, radius)?;
        let q = quasi_unipotence(&t)?;
        out.push(MonodromyReportEntry {
            location: r.location,
            kodaira_type: r.kodaira_type,
            t: t.entries,
            residual: t.residual,
            beta: q.beta,
            d: q.d,
            n: q.n,
        });
        r.monodromy = Some(t);
        r.quasi = Some(q);
    }
    Ok(out)
}
