use num_complex::Complex64;

use super::{express_in_basis, fiber_periods, idet, round_matrix, PeriodPoint};
use crate::error::{Error, Result};
use crate::fibration::WeierstrassFibration;

/// Largest allowed change of `tau` in one accepted step.
pub const MAX_TAU_STEP: f64 = 0.1;
/// Largest allowed distance from an integer matrix when re-marking.
pub const REMARK_TOLERANCE: f64 = 1e-3;
/// Step length as a fraction of the distance to the discriminant.
const STEP_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContinuationStats {
    pub steps: usize,
    pub rejected: usize,
    pub max_remark_residual: f64,
    pub closest_approach: f64,
}

fn fnv(path: &[Complex64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for z in path {
        for b in z.re.to_bits().to_le_bytes().into_iter().chain(z.im.to_bits().to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Expresses the raw lattice at `y` in the basis closest to `predicted`.
fn remark(
    w: &WeierstrassFibration,
    y: Complex64,
    predicted: (Complex64, Complex64),
) -> Result<(Complex64, Complex64, f64)> {
    let raw = fiber_periods(w, y)?;
    let m = express_in_basis((raw.pi1, raw.pi2), predicted)?;
    let (r, res) = round_matrix(&m);
    if idet(&r) != 1 {
        return Ok((raw.pi1, raw.pi2, f64::INFINITY));
    }
    let p1 = raw.pi1 * r[0][0] as f64 + raw.pi2 * r[0][1] as f64;
    let p2 = raw.pi1 * r[1][0] as f64 + raw.pi2 * r[1][1] as f64;
    Ok((p1, p2, res))
}

/// `d(π1, π2)/dy` by central differences of re-marked lattices.
fn derivative(
    w: &WeierstrassFibration,
    y: Complex64,
    p: (Complex64, Complex64),
    scale: f64,
) -> Result<(Complex64, Complex64)> {
    let mut eps = 1e-6 * scale.min(1.0);
    for _ in 0..20 {
        let plus = remark(w, y + eps, p)?;
        let minus = remark(w, y - eps, p)?;
        if plus.2 < REMARK_TOLERANCE && minus.2 < REMARK_TOLERANCE {
            return Ok((
                (plus.0 - minus.0) / (2.0 * eps),
                (plus.1 - minus.1) / (2.0 * eps),
            ));
        }
        eps *= 0.25;
    }
    Err(Error::StepUnderflow {
        point: y,
        closest: scale,
    })
}

/// Continues the marked basis of `start` along the polyline `path`.
///
/// The polyline is taken to begin at `start.y`; a leading point equal to
/// `start.y` is ignored.
pub fn continue_periods(
    w: &WeierstrassFibration,
    start: &PeriodPoint,
    path: &[Complex64],
) -> Result<PeriodPoint> {
    continue_periods_traced(w, start, path).map(|r| r.0)
}

pub fn continue_periods_traced(
    w: &WeierstrassFibration,
    start: &PeriodPoint,
    path: &[Complex64],
) -> Result<(PeriodPoint, ContinuationStats)> {
    let mut stats = ContinuationStats {
        closest_approach: f64::INFINITY,
        ..Default::default()
    };
    let mut y = start.y;
    let mut p = (start.pi1, start.pi2);
    let mut h_prev = f64::INFINITY;
    for &target in path {
        loop {
            let remaining = target - y;
            let len = remaining.norm();
            if len <= 1e-15 * (1.0 + y.norm()) {
                break;
            }
            let dist = w.distance_to_discriminant(y);
            stats.closest_approach = stats.closest_approach.min(dist);
            let d = derivative(w, y, p, dist)?;
            let tau = p.1 / p.0;
            let mut h = len.min(STEP_FRACTION * dist).min(2.0 * h_prev);
            loop {
                let y_next = if h >= len { target } else { y + remaining * (h / len) };
                let dy = y_next - y;
                let pred = (p.0 + d.0 * dy, p.1 + d.1 * dy);
                let accepted = match remark(w, y_next, pred) {
                    Ok((q1, q2, res)) if res < REMARK_TOLERANCE => {
                        let dtau = (q2 / q1 - tau).norm();
                        (dtau < MAX_TAU_STEP).then_some((q1, q2, res))
                    }
                    Ok(_) | Err(Error::TooCloseToDiscriminant { .. }) => None,
                    Err(e) => return Err(e),
                };
                match accepted {
                    Some((q1, q2, res)) => {
                        stats.max_remark_residual = stats.max_remark_residual.max(res);
                        stats.steps += 1;
                        h_prev = h;
                        y = y_next;
                        p = (q1, q2);
                        break;
                    }
                    None => {
                        stats.rejected += 1;
                        h *= 0.5;
                        if h < 1e-13 * (1.0 + y.norm()) {
                            return Err(Error::StepUnderflow {
                                point: y,
                                closest: stats.closest_approach,
                            });
                        }
                    }
                }
            }
        }
    }
    let id = format!("{}+{:016x}", start.path_id, fnv(path));
    Ok((PeriodPoint::new(y, p.0, p.1, id), stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn i1_model() -> WeierstrassFibration {
        WeierstrassFibration::from_real("i1", &[-3.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_path_is_identity() {
        let w = i1_model();
        let s = fiber_periods(&w, c(0.2, 0.5)).unwrap();
        let e = continue_periods(&w, &s, &[s.y, s.y]).unwrap();
        assert_eq!((e.pi1, e.pi2), (s.pi1, s.pi2));
    }

    #[test]
    fn out_and_back_returns_to_start() {
        let w = i1_model();
        let s = fiber_periods(&w, c(0.2, 0.5)).unwrap();
        let out = continue_periods(&w, &s, &[c(2.0, 1.5), c(3.0, -2.0)]).unwrap();
        let back = continue_periods(&w, &out, &[c(2.0, 1.5), s.y]).unwrap();
        assert!((back.pi1 - s.pi1).norm() < 1e-9 * s.pi1.norm());
        assert!((back.pi2 - s.pi2).norm() < 1e-9 * s.pi2.norm());
    }

    #[test]
    fn continued_basis_stays_oriented() {
        let w = i1_model();
        let s = fiber_periods(&w, c(0.0, 1.0)).unwrap();
        let e = continue_periods(&w, &s, &[c(1.5, 0.5), c(1.5, -0.5), c(0.0, -1.0)]).unwrap();
        assert!(e.covolume() > 0.0);
        assert!(e.tau.im > 0.0);
    }
}
