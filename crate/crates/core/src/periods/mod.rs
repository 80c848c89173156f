//! Period lattices, analytic continuation of marked bases, and monodromy.

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::WeierstrassFibration;

pub mod cache;
mod continuation;
pub mod lattice;
mod monodromy;

pub use continuation::{continue_periods, continue_periods_traced, ContinuationStats};
pub use monodromy::{
    chart_for as chart_for_fiber, circle_path, default_loop_radius,
    isolation_radius as isolation_radius_of, loop_monodromy, monodromy, monodromy_at,
    monodromy_report, untwist_check, MonodromyReportEntry, MONODROMY_TOLERANCE,
};

/// Minimum distance from the discriminant accepted by [`fiber_periods`].
pub const MIN_DISCRIMINANT_DISTANCE: f64 = 1e-10;

/// A marked period basis of `dx/w` at a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodPoint {
    pub y: Complex64,
    pub pi1: Complex64,
    pub pi2: Complex64,
    pub tau: Complex64,
    pub path_id: String,
}

impl PeriodPoint {
    pub fn new(y: Complex64, pi1: Complex64, pi2: Complex64, path_id: impl Into<String>) -> Self {
        PeriodPoint {
            y,
            pi1,
            pi2,
            tau: pi2 / pi1,
            path_id: path_id.into(),
        }
    }

    /// `Im(conj(π1) π2)`, positive for a correctly oriented basis.
    pub fn covolume(&self) -> f64 {
        (self.pi1.conj() * self.pi2).im
    }

    /// Applies an integer change of basis acting on the column `(π1, π2)`.
    pub fn transformed(&self, m: &[[i64; 2]; 2]) -> PeriodPoint {
        let f = |r: &[i64; 2]| self.pi1 * r[0] as f64 + self.pi2 * r[1] as f64;
        PeriodPoint::new(self.y, f(&m[0]), f(&m[1]), self.path_id.clone())
    }

    /// The same lattice in the basis with `tau` in the standard fundamental domain.
    pub fn reduced(&self) -> PeriodPoint {
        let (a, b, _) = lattice::reduce_basis(self.pi1, self.pi2);
        PeriodPoint::new(self.y, a, b, self.path_id.clone())
    }

    /// Relative mismatch between `j(tau)` and the curve's `j`.
    pub fn j_defect(&self, w: &WeierstrassFibration) -> f64 {
        let (a, b) = w.coefficients_at(self.y);
        let jc = lattice::j_of_curve(a, b);
        let jt = lattice::j_of_tau(self.tau);
        (jt - jc).norm() / jc.norm().max(1.0)
    }
}

/// Periods at `y` from the AGM (or quadrature fallback) in the canonical basis.
pub fn fiber_periods(w: &WeierstrassFibration, y: Complex64) -> Result<PeriodPoint> {
    let distance = w.distance_to_discriminant(y);
    if distance < MIN_DISCRIMINANT_DISTANCE {
        return Err(Error::TooCloseToDiscriminant {
            point: y,
            distance,
            min: MIN_DISCRIMINANT_DISTANCE,
        });
    }
    let (a, b) = w.coefficients_at(y);
    let l = lattice::lattice_periods(a, b)?;
    Ok(PeriodPoint::new(y, l.w1, l.w2, "direct"))
}

/// An integral 2×2 matrix acting on the column `(π1, π2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyMatrix {
    pub entries: [[i64; 2]; 2],
    pub residual: f64,
}

pub(crate) type IMat = [[i64; 2]; 2];

pub(crate) const IDENTITY: IMat = [[1, 0], [0, 1]];

pub(crate) fn imul(a: &IMat, b: &IMat) -> IMat {
    let mut r = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

pub(crate) fn idet(a: &IMat) -> i64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

impl MonodromyMatrix {
    pub fn exact(entries: IMat) -> Self {
        MonodromyMatrix {
            entries,
            residual: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self::exact(IDENTITY)
    }

    pub fn det(&self) -> i64 {
        idet(&self.entries)
    }

    pub fn trace(&self) -> i64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn mul(&self, other: &MonodromyMatrix) -> MonodromyMatrix {
        MonodromyMatrix {
            entries: imul(&self.entries, &other.entries),
            residual: self.residual.max(other.residual),
        }
    }

    pub fn pow(&self, k: u32) -> MonodromyMatrix {
        let mut r = MonodromyMatrix {
            entries: IDENTITY,
            residual: self.residual,
        };
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse(&self) -> MonodromyMatrix {
        let [[a, b], [c, d]] = self.entries;
        MonodromyMatrix {
            entries: [[d, -b], [-c, a]],
            residual: self.residual,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.entries == IDENTITY
    }

    /// Smallest `k ≤ bound` with `T^k = I`.
    pub fn order(&self, bound: u32) -> Option<u32> {
        let mut p = *self;
        for k in 1..=bound {
            if p.is_identity() {
                return Some(k);
            }
            p = p.mul(self);
        }
        None
    }
}

/// `(β, d)` with `(T^β - I)^d = 0` and the logarithm `N` of `T^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiUnipotenceData {
    pub beta: u32,
    pub d: u32,
    pub n: [[Rational64; 2]; 2],
}

impl QuasiUnipotenceData {
    pub fn n_f64(&self) -> [[f64; 2]; 2] {
        let f = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
        [[f(self.n[0][0]), f(self.n[0][1])], [f(self.n[1][0]), f(self.n[1][1])]]
    }
}

/// Search bound for `β`.
pub const QUASI_UNIPOTENCE_BOUND: u32 = 12;

pub fn quasi_unipotence(t: &MonodromyMatrix) -> Result<QuasiUnipotenceData> {
    if t.det() != 1 {
        return Err(Error::InvalidInput(format!(
            "monodromy has determinant {}",
            t.det()
        )));
    }
    let mut u = *t;
    for beta in 1..=QUASI_UNIPOTENCE_BOUND {
        let m = u.entries;
        let x = [[m[0][0] - 1, m[0][1]], [m[1][0], m[1][1] - 1]];
        let x2 = imul(&x, &x);
        let d = if x == [[0; 2]; 2] {
            Some(1)
        } else if x2 == [[0; 2]; 2] {
            Some(2)
        } else {
            None
        };
        if let Some(d) = d {
            let r = |v: i64| Rational64::from_integer(v);
            let half = Rational64::new(1, 2);
            let mut n = [[Rational64::from_integer(0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    n[i][j] = r(x[i][j]) - r(x2[i][j]) * half;
                }
            }
            return Ok(QuasiUnipotenceData { beta, d, n });
        }
        u = u.mul(t);
    }
    Err(Error::NotQuasiUnipotent {
        bound: QUASI_UNIPOTENCE_BOUND,
    })
}

/// Real 2×2 matrix `M` with `target = M · basis`, row by row.
pub(crate) fn express_in_basis(
    basis: (Complex64, Complex64),
    target: (Complex64, Complex64),
) -> Result<[[f64; 2]; 2]> {
    let (w1, w2) = basis;
    let det = w1.re * w2.im - w2.re * w1.im;
    if det.abs() < 1e-300 {
        return Err(Error::Singular("degenerate period basis".into()));
    }
    let solve = |z: Complex64| {
        [
            (z.re * w2.im - w2.re * z.im) / det,
            (w1.re * z.im - z.re * w1.im) / det,
        ]
    };
    Ok([solve(target.0), solve(target.1)])
}

/// Rounds a real matrix to integers, returning the max rounding distance.
pub(crate) fn round_matrix(m: &[[f64; 2]; 2]) -> (IMat, f64) {
    let mut r = [[0i64; 2]; 2];
    let mut res: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let v = m[i][j].round();
            res = res.max((m[i][j] - v).abs());
            r[i][j] = v as i64;
        }
    }
    (r, res)
}
