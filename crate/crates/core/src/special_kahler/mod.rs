//! Special Kähler charts from holomorphic period data.
//!
//! A chart is a prepotential on a domain together with polarization
//! integers `d_i`. Its flat Darboux coordinates are
//! `v_i = d_i Re y_i`, `v_{n+i} = Re ∂F/∂y_i`, and the metric is
//! `g = 2 (Im Z)|dy|^2` with `Z = Hess F`. The checks below work in a chart
//! parameter `u`: `u = y` for explicit series and `u = t` (the base
//! coordinate) for fibration-backed charts.

mod fibration;
mod series;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use fibration::{FibrationPrepotential, DOMAIN_FRACTION};
pub use series::{Monomial, SeriesPrepotential};

use crate::error::{Error, Result};
use crate::fibration::{FiberLocation, SingularFiberRecord, WeierstrassFibration};
use crate::periods::{chart_for_fiber, circle_path, fiber_periods, isolation_radius_of, loop_monodromy};

/// Central-difference step of the Hessian check.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Largest accepted Hessian-symmetry defect.
pub const HESSIAN_TOLERANCE: f64 = 1e-5;
/// Largest accepted relative spread of `det g`.
pub const MONGE_AMPERE_TOLERANCE: f64 = 1e-4;
/// Largest accepted residual of an affine transition.
pub const TRANSITION_TOLERANCE: f64 = 1e-6;
/// Points whose Darboux Jacobian is worse conditioned than this are skipped.
const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub enum Prepotential {
    Series(SeriesPrepotential),
    Fibration(FibrationPrepotential),
}

/// Holomorphic data of a chart at one parameter value.
#[derive(Debug, Clone)]
pub struct SpecialData {
    /// Special coordinates `y`.
    pub y: Vec<Complex64>,
    /// `∂F/∂y`.
    pub dual: Vec<Complex64>,
    pub z: DMatrix<Complex64>,
    /// `∂y/∂u`.
    pub dy: DMatrix<Complex64>,
}

#[derive(Debug, Clone)]
pub struct SpecialKahlerChart {
    prepotential: Prepotential,
    polarization: Vec<u32>,
}

fn fmt_point(u: &[Complex64]) -> String {
    let parts: Vec<String> = u.iter().map(|z| format!("{z}")).collect();
    format!("({})", parts.join(", "))
}

/// Whether a real symmetric matrix is positive definite.
fn positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}

impl SpecialKahlerChart {
    /// A chart with the given polarization; `Im Z` must be positive definite
    /// on the sample grid of the domain.
    pub fn new(prepotential: Prepotential, polarization: Vec<u32>) -> Result<Self> {
        let n = match &prepotential {
            Prepotential::Series(s) => s.dim(),
            Prepotential::Fibration(_) => 1,
        };
        if polarization.len() != n || polarization.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(format!("need {n} positive polarization integers")));
        }
        let chart = SpecialKahlerChart {
            prepotential,
            polarization,
        };
        for u in chart.sample_grid(3, 1.0) {
            chart.metric_at(&u)?;
        }
        Ok(chart)
    }

    pub fn series(prepotential: SeriesPrepotential, polarization: Vec<u32>) -> Result<Self> {
        SpecialKahlerChart::new(Prepotential::Series(prepotential), polarization)
    }

    /// Fibration-backed chart with `d_1 = 1`.
    pub fn fibration(prepotential: FibrationPrepotential) -> Result<Self> {
        SpecialKahlerChart::new(Prepotential::Fibration(prepotential), vec![1])
    }

    pub fn prepotential(&self) -> &Prepotential {
        &self.prepotential
    }

    pub fn polarization(&self) -> &[u32] {
        &self.polarization
    }

    pub fn dim(&self) -> usize {
        self.polarization.len()
    }

    pub fn contains(&self, u: &[Complex64]) -> bool {
        match &self.prepotential {
            Prepotential::Series(s) => s.contains(u),
            Prepotential::Fibration(f) => u.len() == 1 && f.contains(u[0]),
        }
    }

    pub fn center(&self) -> Vec<Complex64> {
        match &self.prepotential {
            Prepotential::Series(s) => s.center.clone(),
            Prepotential::Fibration(f) => vec![f.center()],
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        match &self.prepotential {
            Prepotential::Series(s) => s.radii.clone(),
            Prepotential::Fibration(f) => vec![f.radius()],
        }
    }

    /// Product grid of `1 + 6·(m - 1)` points per variable: the center and
    /// `m - 1` hexagons out to `shrink` times the radius.
    pub fn sample_grid(&self, m: usize, shrink: f64) -> Vec<Vec<Complex64>> {
        let per_axis: Vec<Vec<Complex64>> = self
            .center()
            .iter()
            .zip(self.radii())
            .map(|(&c, r)| {
                let mut pts = vec![c];
                for ring in 1..m {
                    let rho = shrink * r * ring as f64 / (m - 1) as f64;
                    for k in 0..6 {
                        let th = std::f64::consts::PI * (k as f64 / 3.0 + 0.1 * ring as f64);
                        pts.push(c + Complex64::from_polar(rho, th));
                    }
                }
                pts
            })
            .collect();
        let mut grid: Vec<Vec<Complex64>> = vec![Vec::new()];
        for axis in per_axis {
            grid = grid
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&z| {
                        let mut q = p.clone();
                        q.push(z);
                        q
                    })
                })
                .collect();
        }
        grid
    }

    pub fn special(&self, u: &[Complex64]) -> Result<SpecialData> {
        if !self.contains(u) {
            return Err(Error::OutsideDomain(fmt_point(u)));
        }
        Ok(match &self.prepotential {
            Prepotential::Series(s) => SpecialData {
                y: u.iter().zip(&s.center).map(|(a, b)| a - b).collect(),
                dual: s.gradient(u),
                z: s.hessian(u),
                dy: DMatrix::identity(u.len(), u.len()),
            },
            Prepotential::Fibration(f) => {
                let t = u[0];
                let (p1, p2) = f.periods(t);
                SpecialData {
                    y: vec![f.special_coordinate(t)],
                    dual: vec![f.dual_coordinate(t)],
                    z: DMatrix::from_element(1, 1, p2 / p1),
                    dy: DMatrix::from_element(1, 1, p1),
                }
            }
        })
    }

    /// `Im Z(u)`, the metric coefficients in the special coordinates.
    pub fn metric_at(&self, u: &[Complex64]) -> Result<DMatrix<f64>> {
        let h = self.special(u)?.z.map(|z| z.im);
        if positive_definite(&h) {
            Ok(h)
        } else {
            Err(Error::NotPositiveDefinite(fmt_point(u)))
        }
    }

    /// Flat Darboux coordinates `v ∈ R^{2n}`.
    pub fn darboux(&self, u: &[Complex64]) -> Result<DVector<f64>> {
        let s = self.special(u)?;
        let n = self.dim();
        Ok(DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.polarization[i] as f64 * s.y[i].re
            } else {
                s.dual[i - n].re
            }
        }))
    }

    /// `∂v/∂(Re u, Im u)` from `dv_i = d_i Re dy_i`, `dv_{n+i} = Re Σ_j Z_ij dy_j`.
    pub fn darboux_jacobian(&self, u: &[Complex64]) -> Result<DMatrix<f64>> {
        let s = self.special(u)?;
        let n = self.dim();
        let zdy = &s.z * &s.dy;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let d = self.polarization[i] as f64;
            for l in 0..n {
                j[(i, l)] = d * s.dy[(i, l)].re;
                j[(i, n + l)] = -d * s.dy[(i, l)].im;
                j[(n + i, l)] = zdy[(i, l)].re;
                j[(n + i, n + l)] = -zdy[(i, l)].im;
            }
        }
        Ok(j)
    }

    /// `g = 2 Im Z |dy|^2` as a real form on `(Re u, Im u)`.
    pub fn metric_in_parameter(&self, u: &[Complex64]) -> Result<DMatrix<f64>> {
        let s = self.special(u)?;
        let n = self.dim();
        let h = s.z.map(|z| Complex64::new(z.im, 0.0));
        let k = s.dy.adjoint() * h * &s.dy;
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (k[(i, j)].re, k[(i, j)].im);
                g[(i, j)] = 2.0 * a;
                g[(n + i, n + j)] = 2.0 * a;
                g[(i, n + j)] = -2.0 * b;
                g[(n + i, j)] = 2.0 * b;
            }
        }
        Ok(g)
    }

    /// The metric in Darboux coordinates, `J^{-T} g_u J^{-1}`.
    pub fn metric_in_darboux(&self, u: &[Complex64]) -> Result<DMatrix<f64>> {
        let jinv = self.jacobian_inverse(u)?;
        Ok(jinv.transpose() * self.metric_in_parameter(u)? * jinv)
    }

    fn jacobian_inverse(&self, u: &[Complex64]) -> Result<DMatrix<f64>> {
        let j = self.darboux_jacobian(u)?;
        let sv = j.clone().svd(false, false).singular_values;
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 0.0 && hi / lo < MAX_CONDITION) {
            return Err(Error::Singular(format!("Darboux Jacobian at {}", fmt_point(u))));
        }
        j.try_inverse()
            .ok_or_else(|| Error::Singular(format!("Darboux Jacobian at {}", fmt_point(u))))
    }

    /// The Monge-Ampère constant `4^n Π d_i^{-2}` of this convention.
    pub fn monge_ampere_constant(&self) -> f64 {
        self.polarization
            .iter()
            .fold(4f64.powi(self.dim() as i32), |acc, &d| acc / (d as f64 * d as f64))
    }
}

/// `u + h e_l` with `l < n` moving `Re u_l` and `l ≥ n` moving `Im u_{l-n}`.
fn nudge(u: &[Complex64], l: usize, h: f64) -> Vec<Complex64> {
    let n = u.len();
    let mut p = u.to_vec();
    if l < n {
        p[l] += Complex64::new(h, 0.0);
    } else {
        p[l - n] += Complex64::new(0.0, h);
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarbouxReport {
    pub points: usize,
    /// Largest entry of finite-difference `dv` minus `(d_i Re dy_i, Re Σ Z_ij dy_j)`.
    pub max_defect: f64,
    pub worst_point: Vec<Complex64>,
}

/// Compares central differences of `v` (step `h`) with the analytic Jacobian.
pub fn darboux_differential_check(chart: &SpecialKahlerChart, grid: &[Vec<Complex64>], h: f64) -> Result<DarbouxReport> {
    let n = chart.dim();
    let mut worst = (0.0, Vec::new());
    for u in grid {
        let j = chart.darboux_jacobian(u)?;
        for l in 0..2 * n {
            let fd = (chart.darboux(&nudge(u, l, h))? - chart.darboux(&nudge(u, l, -h))?) / (2.0 * h);
            let defect = (fd - j.column(l)).amax();
            if defect > worst.0 || worst.1.is_empty() {
                worst = (defect.max(worst.0), if defect >= worst.0 { u.clone() } else { worst.1 });
            }
        }
    }
    Ok(DarbouxReport {
        points: grid.len(),
        max_defect: worst.0,
        worst_point: worst.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub points: usize,
    /// Largest `|∂g_ij/∂v_k - ∂g_ik/∂v_j|` at step [`HESSIAN_STEP`].
    pub max_defect: f64,
    /// The same at half the step.
    pub max_defect_half_step: f64,
    /// The same from Richardson-extrapolated derivatives.
    pub max_defect_extrapolated: f64,
    pub worst_point: Vec<Complex64>,
    /// Points skipped because the Darboux Jacobian is near-singular.
    pub excluded: Vec<Vec<Complex64>>,
    pub pass: bool,
}

/// `∂g_v/∂v_k` for all `k`, by central differences of step `h` in `u`.
fn metric_derivatives(chart: &SpecialKahlerChart, u: &[Complex64], h: f64) -> Result<Vec<DMatrix<f64>>> {
    let m = 2 * chart.dim();
    let du: Vec<DMatrix<f64>> = (0..m)
        .map(|l| Ok((chart.metric_in_darboux(&nudge(u, l, h))? - chart.metric_in_darboux(&nudge(u, l, -h))?) / (2.0 * h)))
        .collect::<Result<_>>()?;
    let jinv = chart.jacobian_inverse(u)?;
    Ok((0..m)
        .map(|k| (0..m).fold(DMatrix::zeros(m, m), |acc, l| acc + &du[l] * jinv[(l, k)]))
        .collect())
}

fn symmetry_defect(dg: &[DMatrix<f64>]) -> f64 {
    let m = dg.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                worst = worst.max((dg[k][(i, j)] - dg[j][(i, k)]).abs());
            }
        }
    }
    worst
}

/// Symmetry of the third derivatives of the Hessian potential: the metric in
/// Darboux coordinates is locally a Hessian iff `∂_k g_ij = ∂_j g_ik`.
pub fn hessian_structure_check(chart: &SpecialKahlerChart, grid: &[Vec<Complex64>]) -> Result<HessianReport> {
    let mut report = HessianReport {
        points: 0,
        max_defect: 0.0,
        max_defect_half_step: 0.0,
        max_defect_extrapolated: 0.0,
        worst_point: Vec::new(),
        excluded: Vec::new(),
        pass: false,
    };
    for u in grid {
        let (full, half) = match (
            metric_derivatives(chart, u, HESSIAN_STEP),
            metric_derivatives(chart, u, 0.5 * HESSIAN_STEP),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(Error::Singular(_)), _) | (_, Err(Error::Singular(_))) => {
                report.excluded.push(u.clone());
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let extrapolated: Vec<DMatrix<f64>> = full.iter().zip(&half).map(|(a, b)| (b * 4.0 - a) / 3.0).collect();
        let d = symmetry_defect(&full);
        report.points += 1;
        if d >= report.max_defect {
            report.worst_point = u.clone();
        }
        report.max_defect = report.max_defect.max(d);
        report.max_defect_half_step = report.max_defect_half_step.max(symmetry_defect(&half));
        report.max_defect_extrapolated = report.max_defect_extrapolated.max(symmetry_defect(&extrapolated));
    }
    report.pass = report.points > 0
        && report.max_defect < HESSIAN_TOLERANCE
        && report.max_defect_half_step < HESSIAN_TOLERANCE
        && report.max_defect_extrapolated < HESSIAN_TOLERANCE;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MongeAmpereReport {
    pub points: usize,
    pub mean_det: f64,
    pub relative_spread: f64,
    /// `4^n Π d_i^{-2}`.
    pub expected: f64,
    pub worst_point: Vec<Complex64>,
    pub pass: bool,
}

/// `det g` in Darboux coordinates over the grid.
pub fn monge_ampere_check(chart: &SpecialKahlerChart, grid: &[Vec<Complex64>]) -> Result<MongeAmpereReport> {
    let dets: Vec<f64> = grid
        .iter()
        .map(|u| Ok(chart.metric_in_darboux(u)?.determinant()))
        .collect::<Result<_>>()?;
    if dets.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let n = dets.len() as f64;
    let mean = dets.iter().sum::<f64>() / n;
    let sd = (dets.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    let worst = (0..dets.len())
        .max_by(|&a, &b| (dets[a] - mean).abs().total_cmp(&(dets[b] - mean).abs()))
        .unwrap_or(0);
    let relative_spread = sd / mean.abs();
    Ok(MongeAmpereReport {
        points: dets.len(),
        mean_det: mean,
        relative_spread,
        expected: chart.monge_ampere_constant(),
        worst_point: grid[worst].clone(),
        pass: relative_spread < MONGE_AMPERE_TOLERANCE,
    })
}

/// `v_A = P v_B + b` on the overlap of two charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTransition {
    pub p: Vec<Vec<i64>>,
    pub b: Vec<f64>,
    /// Largest of the integrality, fit and symplectic residuals.
    pub residual: f64,
    pub integrality_residual: f64,
    pub fit_residual: f64,
    pub symplectic_residual: f64,
}

impl AffineTransition {
    fn p_matrix(&self) -> DMatrix<f64> {
        let m = self.p.len();
        DMatrix::from_fn(m, m, |i, j| self.p[i][j] as f64)
    }

    /// `self ∘ other`: if `v_A = P v_B + b` and `v_B = P' v_C + b'`, then
    /// `v_A = P P' v_C + (P b' + b)`.
    pub fn compose(&self, other: &AffineTransition) -> AffineTransition {
        let (p, q) = (self.p_matrix(), other.p_matrix());
        let pq = &p * &q;
        let b = &p * DVector::from_vec(other.b.clone()) + DVector::from_vec(self.b.clone());
        AffineTransition {
            p: (0..pq.nrows()).map(|i| (0..pq.ncols()).map(|j| pq[(i, j)].round() as i64).collect()).collect(),
            b: b.iter().copied().collect(),
            residual: self.residual + other.residual,
            integrality_residual: 0.0,
            fit_residual: self.fit_residual + other.fit_residual,
            symplectic_residual: 0.0,
        }
    }

    /// The linear part as a 2×2 integer matrix, for `n = 1`.
    pub fn linear_2x2(&self) -> Option<[[i64; 2]; 2]> {
        (self.p.len() == 2).then(|| [[self.p[0][0], self.p[0][1]], [self.p[1][0], self.p[1][1]]])
    }
}

/// `J_d = [[0, D^{-1}], [-D^{-1}, 0]]`, the form `Σ d_i^{-1} dv_i ∧ dv_{n+i}`.
fn symplectic_form(polarization: &[u32]) -> DMatrix<f64> {
    let n = polarization.len();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for (i, &d) in polarization.iter().enumerate() {
        j[(i, n + i)] = 1.0 / d as f64;
        j[(n + i, i)] = -1.0 / d as f64;
    }
    j
}

/// Least-squares affine map between the Darboux coordinates of two charts,
/// with the linear part rounded to integers.
pub fn transition(a: &SpecialKahlerChart, b: &SpecialKahlerChart, samples: &[Vec<Complex64>]) -> Result<AffineTransition> {
    let n = a.dim();
    if b.dim() != n || a.polarization != b.polarization {
        return Err(Error::InvalidInput("charts differ in dimension or polarization".into()));
    }
    let m = 2 * n;
    if samples.len() < m + 1 {
        return Err(Error::InvalidInput(format!("need at least {} overlap points", m + 1)));
    }
    let mut va = Vec::with_capacity(samples.len());
    let mut vb = Vec::with_capacity(samples.len());
    for u in samples {
        va.push(a.darboux(u)?);
        vb.push(b.darboux(u)?);
    }
    let rows = samples.len();
    let design = DMatrix::from_fn(rows, m + 1, |r, c| if c < m { vb[r][c] } else { 1.0 });
    let rhs = DMatrix::from_fn(rows, m, |r, c| va[r][c]);
    let sol = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Singular(format!("transition fit: {e}")))?;
    // sol is (m+1) × m: rows are coefficients of v_B and the constant
    let p_ls = DMatrix::from_fn(m, m, |i, j| sol[(j, i)]);
    let p_int = p_ls.map(|x| x.round());
    let integrality_residual = (&p_ls - &p_int).amax();
    let mean_offset = (0..rows).fold(DVector::zeros(m), |acc, r| acc + (&va[r] - &p_int * &vb[r])) / rows as f64;
    let fit_residual = (0..rows)
        .map(|r| (&va[r] - &p_int * &vb[r] - &mean_offset).amax())
        .fold(0.0, f64::max);
    let j = symplectic_form(&a.polarization);
    let symplectic_residual = (p_int.transpose() * &j * &p_int - &j).amax();
    let residual = integrality_residual.max(fit_residual).max(symplectic_residual);
    let t = AffineTransition {
        p: (0..m).map(|i| (0..m).map(|k| p_int[(i, k)] as i64).collect()).collect(),
        b: mean_offset.iter().copied().collect(),
        residual,
        integrality_residual,
        fit_residual,
        symplectic_residual,
    };
    if residual >= TRANSITION_TOLERANCE {
        return Err(Error::NonIntegralTransition { residual });
    }
    Ok(t)
}

/// Affine monodromy of a fibration chart around one singular fiber,
/// compared with the period monodromy of the same loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTransitionReport {
    pub fiber: FiberLocation,
    pub base: Complex64,
    pub period_monodromy: [[i64; 2]; 2],
    pub transition: AffineTransition,
    pub matches: bool,
}

/// Continues a chart centered near `fiber` once around it and fits the
/// transition from the continued chart to the original one.
pub fn loop_transition_check(w: &WeierstrassFibration, fiber: &SingularFiberRecord) -> Result<LoopTransitionReport> {
    let chart = chart_for_fiber(w, fiber)?;
    let center = fiber.chart_location();
    let iso = isolation_radius_of(&chart, center)?;
    let base = center + Complex64::from_polar(0.3 * iso.min(1.0), 0.4);
    let radius = 0.4 * chart.distance_to_discriminant(base);
    let a = FibrationPrepotential::new(&chart, base, radius, None)?;
    let lasso = circle_path(center, base, 128, 1);
    let t = loop_monodromy(&chart, a.basis(), &lasso)?;
    let b = a.continued(&lasso, radius)?;
    let (ca, cb) = (SpecialKahlerChart::fibration(a)?, SpecialKahlerChart::fibration(b)?);
    let tr = transition(&cb, &ca, &ca.sample_grid(3, 0.9))?;
    Ok(LoopTransitionReport {
        fiber: fiber.location,
        base,
        period_monodromy: t.entries,
        matches: tr.linear_2x2() == Some(t.entries),
        transition: tr,
    })
}

/// `Im τ |π1|^2` at a base point, the special Kähler density of the
/// fibration in the coordinate of `w`; independent of the period basis.
pub fn base_density(w: &WeierstrassFibration, t: Complex64) -> Result<f64> {
    let p = fiber_periods(w, t)?;
    Ok(p.tau.im * p.pi1.norm_sqr())
}
