//! Semi-flat hyperkähler tensors on `T*B/Λ` over a special Kähler chart.
//!
//! Tangent vectors are written in the real frame
//! `(y'_1..y'_n, y''_1..y''_n, z'_1..z'_n, z''_1..z''_n)` with
//! `y = y' + i y''` the special coordinates and `z = z' + i z''` the fiber
//! coordinates dual to `Re dy`. A 2-form is stored as the antisymmetric
//! matrix `W[(a, b)] = ω(e_a, e_b)`. The tensors are the zero-section
//! formulas, carried to other fiber points by translation.

mod pfaffian;

pub use pfaffian::{mixed_top_power, pfaffian, top_power};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_kahler::{Monomial, SpecialKahlerChart};

/// Largest accepted deviation of `J` from the block action and of `J²` from `-id`.
pub const BLOCK_TOLERANCE: f64 = 1e-10;
pub const SQUARE_TOLERANCE: f64 = 1e-12;
pub const VOLUME_TOLERANCE: f64 = 1e-8;
pub const QUATERNION_TOLERANCE: f64 = 1e-8;
pub const SLOPE_TOLERANCE: f64 = 0.02;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn y_re(_n: usize, i: usize) -> usize {
    i
}
fn y_im(n: usize, i: usize) -> usize {
    n + i
}
fn z_re(n: usize, i: usize) -> usize {
    2 * n + i
}
fn z_im(n: usize, i: usize) -> usize {
    3 * n + i
}

/// `dy_i` or `dz_i` as a complex covector on the real frame.
fn covector(n: usize, re: usize, im: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(4 * n);
    v[re] = Complex64::new(1.0, 0.0);
    v[im] = I;
    v
}

fn wedge(a: &DVector<Complex64>, b: &DVector<Complex64>) -> DMatrix<Complex64> {
    a * b.transpose() - b * a.transpose()
}

fn real_part(m: &DMatrix<Complex64>, what: &str) -> Result<DMatrix<f64>> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if m.iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return Err(Error::InvalidInput(format!("{what} is not a real form")));
    }
    Ok(m.map(|z| z.re))
}

fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Tensors of the semi-flat structure at one point of `T*B/Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiFlatPointFrame {
    pub y: Vec<Complex64>,
    /// Fiber point reduced to the fundamental domain of `Λ_y`.
    pub z: Vec<Complex64>,
    pub period_matrix: DMatrix<Complex64>,
    /// Coefficients `A` of the base form `√-1 Σ A_ij dy_i ∧ dȳ_j`.
    pub base_coefficients: DMatrix<f64>,
    pub omega_sf: DMatrix<f64>,
    pub base_form: DMatrix<f64>,
    pub theta_re: DMatrix<f64>,
    pub theta_im: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// Columns `d_1 e_1, …, d_n e_n, Z_1, …, Z_n`.
    pub lattice: DMatrix<Complex64>,
}

impl SemiFlatPointFrame {
    /// Frame for period matrix `Z` and base coefficients `A`. The semi-flat
    /// structure has `A = Im Z`; other choices are accepted so that their
    /// failure can be observed.
    pub fn new(
        y: Vec<Complex64>,
        z: Vec<Complex64>,
        period_matrix: DMatrix<Complex64>,
        polarization: &[u32],
        base_coefficients: DMatrix<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if period_matrix.shape() != (n, n) || base_coefficients.shape() != (n, n) || z.len() != n || polarization.len() != n {
            return Err(Error::InvalidInput(format!("frame data must have dimension {n}")));
        }
        let im_z = period_matrix.map(|v| v.im);
        let c = inverse(&im_z, "Im Z")?;
        let dy: Vec<_> = (0..n).map(|i| covector(n, y_re(n, i), y_im(n, i))).collect();
        let dz: Vec<_> = (0..n).map(|i| covector(n, z_re(n, i), z_im(n, i))).collect();
        let mut sf = DMatrix::zeros(4 * n, 4 * n);
        let mut base = DMatrix::zeros(4 * n, 4 * n);
        let mut theta = DMatrix::zeros(4 * n, 4 * n);
        for i in 0..n {
            theta += wedge(&dz[i], &dy[i]);
            for j in 0..n {
                sf += wedge(&dz[i], &dz[j].conjugate()) * (I * c[(i, j)]);
                base += wedge(&dy[i], &dy[j].conjugate()) * (I * base_coefficients[(i, j)]);
            }
        }
        let mut g = DMatrix::zeros(4 * n, 4 * n);
        for i in 0..n {
            for j in 0..n {
                g[(z_re(n, i), z_re(n, j))] = c[(i, j)];
                g[(z_im(n, i), z_im(n, j))] = c[(i, j)];
                g[(y_re(n, i), y_re(n, j))] = base_coefficients[(i, j)];
                g[(y_im(n, i), y_im(n, j))] = base_coefficients[(i, j)];
            }
        }
        if g.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("semi-flat metric".into()));
        }
        let mut lattice = DMatrix::zeros(n, 2 * n);
        for i in 0..n {
            lattice[(i, i)] = Complex64::new(polarization[i] as f64, 0.0);
            for j in 0..n {
                lattice[(j, n + i)] = period_matrix[(j, i)];
            }
        }
        let z = reduce(&z, &period_matrix, polarization, &c);
        Ok(SemiFlatPointFrame {
            y,
            z,
            omega_sf: real_part(&sf, "ω_SF")?,
            base_form: real_part(&base, "base form")?,
            theta_re: theta.map(|v| v.re),
            theta_im: theta.map(|v| v.im),
            period_matrix,
            base_coefficients,
            g,
            lattice,
        })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// `Θ` as a complex matrix.
    pub fn theta(&self) -> DMatrix<Complex64> {
        self.theta_re.map(|x| Complex64::new(x, 0.0)) + self.theta_im.map(|x| Complex64::new(0.0, x))
    }

    /// `ω_SF + f*ω`.
    pub fn kahler_form(&self) -> DMatrix<f64> {
        &self.omega_sf + &self.base_form
    }
}

/// Representative of `z` with coordinates in `[0, 1)` along the lattice basis.
fn reduce(z: &[Complex64], zm: &DMatrix<Complex64>, d: &[u32], c: &DMatrix<f64>) -> Vec<Complex64> {
    let n = z.len();
    let im = DVector::from_iterator(n, z.iter().map(|v| v.im));
    let b = c * im;
    let re_z = zm.map(|v| v.re);
    let a = DVector::from_iterator(n, z.iter().map(|v| v.re)) - &re_z * &b;
    let frac = |x: f64| x - x.floor();
    let bf = b.map(frac);
    (0..n)
        .map(|i| {
            let mut v = Complex64::new(d[i] as f64 * frac(a[i] / d[i] as f64), 0.0);
            for j in 0..n {
                v += zm[(i, j)] * bf[j];
            }
            v
        })
        .collect()
}

/// Frame at chart parameter `u` and fiber point `z`.
pub fn frame_at(chart: &SpecialKahlerChart, u: &[Complex64], z: &[Complex64]) -> Result<SemiFlatPointFrame> {
    let s = chart.special(u)?;
    let a = s.z.map(|v| v.im);
    SemiFlatPointFrame::new(s.y, z.to_vec(), s.z, chart.polarization(), a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure {
    pub j: DMatrix<f64>,
    /// The action `∂z' ↦ -A⁻¹∂y'`, `∂z'' ↦ A⁻¹∂y''`, `∂y' ↦ C⁻¹∂z'`, `∂y'' ↦ -C⁻¹∂z''`.
    pub block_action: DMatrix<f64>,
    pub block_defect: f64,
    /// `max |J² + id|`.
    pub square_defect: f64,
    /// `max |Jᵀ g J - g|`.
    pub orthogonality_defect: f64,
}

/// `J` defined by `Re Θ(·, ·) = g(·, J ·)`.
pub fn complex_structure(frame: &SemiFlatPointFrame) -> Result<ComplexStructure> {
    let n = frame.dim();
    let chol = frame
        .g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("semi-flat metric".into()))?;
    let j = chol.solve(&frame.theta_re);
    let c = inverse(&frame.period_matrix.map(|v| v.im), "Im Z")?;
    let c_inv = inverse(&c, "C")?;
    let a_inv = inverse(&frame.base_coefficients, "A")?;
    let mut block = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        for k in 0..n {
            block[(y_re(n, k), z_re(n, i))] = -a_inv[(i, k)];
            block[(y_im(n, k), z_im(n, i))] = a_inv[(i, k)];
            block[(z_re(n, k), y_re(n, i))] = c_inv[(i, k)];
            block[(z_im(n, k), y_im(n, i))] = -c_inv[(i, k)];
        }
    }
    let id = DMatrix::<f64>::identity(4 * n, 4 * n);
    Ok(ComplexStructure {
        block_defect: max_abs(&(&j - &block)),
        square_defect: max_abs(&(&j * &j + &id)),
        orthogonality_defect: max_abs(&(j.transpose() * &frame.g * &j - &frame.g)),
        block_action: block,
        j,
    })
}

/// Largest relative anticommutator among the endomorphisms `g⁻¹W` of
/// `ω_SF + f*ω`, `Re Θ` and `Im Θ`.
pub fn quaternionic_defect(frame: &SemiFlatPointFrame) -> Result<f64> {
    let chol = frame
        .g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("semi-flat metric".into()))?;
    let ends: Vec<DMatrix<f64>> = [frame.kahler_form(), frame.theta_re.clone(), frame.theta_im.clone()]
        .iter()
        .map(|w| chol.solve(w))
        .collect();
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in a + 1..3 {
            let anti = &ends[a] * &ends[b] + &ends[b] * &ends[a];
            worst = worst.max(max_abs(&anti) / (max_abs(&ends[a]) * max_abs(&ends[b])));
        }
    }
    Ok(worst)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(ω_SF + f*ω)^{2n}` and `Θ^n ∧ Θ̄^n` as coefficients of the frame volume element.
pub fn volume_forms(frame: &SemiFlatPointFrame) -> (f64, Complex64) {
    let w = frame.kahler_form().map(|x| Complex64::new(x, 0.0));
    let theta = frame.theta();
    (top_power(&w).re, mixed_top_power(&theta, &theta.conjugate()))
}

/// `(ω_SF + f*ω)^{2n} / (C(2n, n) Θ^n ∧ Θ̄^n)`. The binomial factor is the
/// ratio of the two sides for the normalizations used here.
pub fn volume_ratio(frame: &SemiFlatPointFrame) -> Complex64 {
    let n = frame.dim();
    let (lhs, rhs) = volume_forms(frame);
    Complex64::new(lhs, 0.0) / (rhs * binomial(2 * n, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiFlatSample {
    pub u: Vec<Complex64>,
    pub z: Vec<Complex64>,
}

/// `count` points with `u` uniform in the chart polydisc shrunk by `shrink`
/// and `z` uniform in the fundamental domain of `Λ_u`.
pub fn random_samples(chart: &SpecialKahlerChart, count: usize, shrink: f64, seed: u64) -> Result<Vec<SemiFlatSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (center, radii) = (chart.center(), chart.radii());
    let n = chart.dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: Vec<Complex64> = center
            .iter()
            .zip(&radii)
            .map(|(&c, &r)| {
                let rho = shrink * r * rng.gen::<f64>().sqrt();
                c + Complex64::from_polar(rho, std::f64::consts::TAU * rng.gen::<f64>())
            })
            .collect();
        let zm = chart.special(&u)?.z;
        let z = (0..n)
            .map(|i| {
                let mut v = Complex64::new(chart.polarization()[i] as f64 * rng.gen::<f64>(), 0.0);
                for j in 0..n {
                    v += zm[(i, j)] * rng.gen::<f64>();
                }
                v
            })
            .collect();
        out.push(SemiFlatSample { u, z });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub samples: usize,
    /// Largest `|ratio - 1|`.
    pub max_defect: f64,
    pub worst: Option<SemiFlatSample>,
    pub pass: bool,
}

pub fn hyperkahler_volume_check(chart: &SpecialKahlerChart, samples: &[SemiFlatSample]) -> Result<VolumeReport> {
    let mut worst: (f64, Option<&SemiFlatSample>) = (0.0, None);
    for s in samples {
        let d = (volume_ratio(&frame_at(chart, &s.u, &s.z)?) - 1.0).norm();
        if worst.1.is_none() || d > worst.0 {
            worst = (d, Some(s));
        }
    }
    Ok(VolumeReport {
        samples: samples.len(),
        max_defect: worst.0,
        worst: worst.1.cloned(),
        pass: worst.0 < VOLUME_TOLERANCE,
    })
}

/// A section `σ` of `T*B` with polynomial components in the special coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSection {
    pub components: Vec<Vec<Monomial>>,
}

impl PolynomialSection {
    pub fn zero(n: usize) -> Self {
        PolynomialSection {
            components: vec![Vec::new(); n],
        }
    }

    pub fn value(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.components
            .iter()
            .map(|terms| terms.iter().map(|m| m.coeff * monomial(&m.exponents, y, None)).sum())
            .collect()
    }

    /// `∂σ_i/∂y_k`.
    pub fn jacobian(&self, y: &[Complex64]) -> DMatrix<Complex64> {
        let n = y.len();
        DMatrix::from_fn(self.components.len(), n, |i, k| {
            self.components[i]
                .iter()
                .map(|m| m.coeff * monomial(&m.exponents, y, Some(k)))
                .sum()
        })
    }
}

/// `Π y_j^{e_j}`, or its derivative in `y_k`.
fn monomial(e: &[u32], y: &[Complex64], derivative: Option<usize>) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for (j, (&p, &yj)) in e.iter().zip(y).enumerate() {
        if derivative == Some(j) {
            if p == 0 {
                return Complex64::new(0.0, 0.0);
            }
            v *= p as f64 * yj.powu(p - 1);
        } else {
            v *= yj.powu(p);
        }
    }
    v
}

/// `λ_t* T_σ* (√t Θ)` at `y`, with `λ_t(y, z) = (y, z/√t)` and
/// `T_σ(y, z) = (y, z + σ(y))`, computed as a pullback through the Jacobian.
pub fn pulled_back_theta(sigma: &PolynomialSection, y: &[Complex64], t: f64) -> DMatrix<Complex64> {
    let n = y.len();
    let theta = {
        let mut m = DMatrix::zeros(4 * n, 4 * n);
        for i in 0..n {
            m += wedge(&covector(n, z_re(n, i), z_im(n, i)), &covector(n, y_re(n, i), y_im(n, i)));
        }
        m
    };
    let ds = sigma.jacobian(y);
    let mut translate = DMatrix::<f64>::identity(4 * n, 4 * n);
    for i in 0..n {
        for k in 0..n {
            let d = ds[(i, k)];
            translate[(z_re(n, i), y_re(n, k))] = d.re;
            translate[(z_re(n, i), y_im(n, k))] = -d.im;
            translate[(z_im(n, i), y_re(n, k))] = d.im;
            translate[(z_im(n, i), y_im(n, k))] = d.re;
        }
    }
    let mut dilate = DMatrix::<f64>::identity(4 * n, 4 * n);
    for a in 2 * n..4 * n {
        dilate[(a, a)] = 1.0 / t.sqrt();
    }
    let to_c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    let first = to_c(&translate).transpose() * theta * to_c(&translate) * Complex64::new(t.sqrt(), 0.0);
    to_c(&dilate).transpose() * first * to_c(&dilate)
}

/// `Σ dσ_i ∧ dy_i` as a complex matrix on the real frame.
pub fn section_form(sigma: &PolynomialSection, y: &[Complex64]) -> DMatrix<Complex64> {
    let n = y.len();
    let ds = sigma.jacobian(y);
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        for k in 0..n {
            m += wedge(&covector(n, y_re(n, k), y_im(n, k)), &covector(n, y_re(n, i), y_im(n, i))) * ds[(i, k)];
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub ts: Vec<f64>,
    /// Largest Frobenius norm of `λ_t* T_σ* (√t Θ) - Θ` over the grid, per `t`.
    pub deviations: Vec<f64>,
    /// Least-squares slope of `log deviation` against `log t`; absent when
    /// the deviation vanishes.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub pass: bool,
}

/// `t = 4^{-1}, …, 4^{-k}`.
pub fn default_ts(k: u32) -> Vec<f64> {
    (1..=k as i32).map(|j| 4f64.powi(-j)).collect()
}

pub fn scaling_limit(chart: &SpecialKahlerChart, sigma: &PolynomialSection, ts: &[f64], grid: &[Vec<Complex64>]) -> Result<ScalingReport> {
    let n = chart.dim();
    if sigma.components.len() != n {
        return Err(Error::InvalidInput(format!("section needs {n} components")));
    }
    if ts.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("t must be positive".into()));
    }
    let ys: Vec<Vec<Complex64>> = grid.iter().map(|u| chart.special(u).map(|s| s.y)).collect::<Result<_>>()?;
    let theta = pulled_back_theta(&PolynomialSection::zero(n), &vec![Complex64::new(0.0, 0.0); n], 1.0);
    let deviations: Vec<f64> = ts
        .iter()
        .map(|&t| {
            ys.iter()
                .map(|y| (pulled_back_theta(sigma, y, t) - &theta).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(&deviations)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&t, &d)| (t.ln(), d.ln()))
        .collect();
    let (slope, intercept) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let s = sxy / sxx;
        (Some(s), Some(my - s * mx))
    } else {
        (None, None)
    };
    let pass = match slope {
        Some(s) => (s - 0.5).abs() <= SLOPE_TOLERANCE,
        None => deviations.iter().all(|&d| d == 0.0),
    };
    Ok(ScalingReport {
        ts: ts.to_vec(),
        deviations,
        slope,
        intercept,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn standard() -> SemiFlatPointFrame {
        SemiFlatPointFrame::new(
            vec![c(0.0, 0.0)],
            vec![c(0.0, 0.0)],
            DMatrix::from_element(1, 1, c(0.0, 1.0)),
            &[1],
            DMatrix::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn standard_fiber_has_unit_blocks() {
        let f = standard();
        // order y', y'', z', z''
        let mut sf = DMatrix::zeros(4, 4);
        sf[(2, 3)] = 2.0;
        sf[(3, 2)] = -2.0;
        assert_eq!(f.omega_sf, sf);
        assert_eq!(f.g, DMatrix::identity(4, 4));
        let j = complex_structure(&f).unwrap();
        let perm = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, -1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        ]);
        assert_eq!(j.j, perm);
        assert_eq!(j.block_defect, 0.0);
        assert_eq!(j.square_defect, 0.0);
        assert_eq!(volume_ratio(&f), c(1.0, 0.0));
    }

    #[test]
    fn mismatched_base_form_breaks_the_complex_structure() {
        let f = SemiFlatPointFrame::new(
            vec![c(0.0, 0.0)],
            vec![c(0.0, 0.0)],
            DMatrix::from_element(1, 1, c(0.3, 2.0)),
            &[1],
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let j = complex_structure(&f).unwrap();
        assert!(j.block_defect < 1e-15);
        assert!(j.square_defect > 0.1);
    }

    #[test]
    fn fiber_points_reduce_mod_the_lattice() {
        let zm = DMatrix::from_element(1, 1, c(0.4, 1.3));
        let mk = |z: Complex64| SemiFlatPointFrame::new(vec![c(0.0, 0.0)], vec![z], zm.clone(), &[2], DMatrix::from_element(1, 1, 1.3)).unwrap();
        let a = mk(c(0.7, 0.5));
        let b = mk(c(0.7, 0.5) + c(2.0, 0.0) * 3.0 - zm[(0, 0)] * 2.0);
        assert!((a.z[0] - b.z[0]).norm() < 1e-12);
        assert!((a.z[0] - c(0.7, 0.5)).norm() < 1e-12);
        assert_eq!(a.g, b.g);
        assert_eq!(a.theta_re, b.theta_re);
    }

    #[test]
    fn zero_section_gives_no_deviation() {
        let y = [c(0.2, 0.1), c(-0.3, 0.4)];
        for t in default_ts(10) {
            let theta = pulled_back_theta(&PolynomialSection::zero(2), &y, 1.0);
            assert_eq!(pulled_back_theta(&PolynomialSection::zero(2), &y, t), theta);
        }
    }
}
