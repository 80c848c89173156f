//! Dense univariate polynomials with complex coefficients.
//!
//! Coefficients are stored in ascending degree. Root finding goes through
//! companion-matrix eigenvalues followed by Newton polishing; numerically
//! multiple roots are recognised by a Taylor-coefficient test at the cluster
//! centroid so that, for example, `27 t^2` yields one double root rather than
//! two eigenvalues `1e-8` apart.

use nalgebra::{linalg::Schur, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order of vanishing reported for the zero polynomial.
pub const INFINITE_ORDER: u32 = u32::MAX;

/// Relative tolerance under which a Taylor coefficient counts as zero.
pub const TAYLOR_ZERO_TOL: f64 = 1e-9;

/// Minimum separation of distinct simple roots.
pub const ROOT_SEPARATION_TOL: f64 = 1e-8;

const NEWTON_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

/// A root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub location: Complex64,
    pub multiplicity: u32,
    /// Backward-error residual after polishing (0 for exact roots at the origin).
    pub residual: f64,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `t^k`
    pub fn monomial(k: usize, c: Complex64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 1];
        coeffs[k] = c;
        Poly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `sum |c_k| |z|^k`, the scale used for backward-error residuals.
    pub fn abs_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Exact order of vanishing at `t = 0`.
    pub fn trailing_zeros(&self) -> u32 {
        if self.is_zero() {
            return INFINITE_ORDER;
        }
        self.coeffs
            .iter()
            .take_while(|c| **c == Complex64::new(0.0, 0.0))
            .count() as u32
    }

    /// `t^n p(1/t)`; fails if `deg p > n`.
    pub fn reversed(&self, n: usize, name: &'static str) -> Result<Poly> {
        if let Some(d) = self.degree() {
            if d > n {
                return Err(Error::DegreeOverflow {
                    name,
                    index: d,
                    max_degree: n,
                });
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[n - k] = c;
        }
        Ok(Poly::new(out))
    }

    /// Coefficients of `p(c + u)` in powers of `u`.
    pub fn taylor_at(&self, c: Complex64) -> Vec<Complex64> {
        let mut q = self.coeffs.clone();
        let n = q.len();
        for k in 0..n {
            for j in (k..n.saturating_sub(1)).rev() {
                let hi = q[j + 1];
                q[j] += c * hi;
            }
        }
        q
    }

    /// Scale of the k-th Taylor coefficient at `c`: `sum_i C(i,k) |c_i| |c|^(i-k)`.
    fn taylor_scale(&self, c: Complex64) -> Vec<f64> {
        let abs = Poly::new(self.coeffs.iter().map(|z| Complex64::new(z.norm(), 0.0)).collect());
        abs.taylor_at(Complex64::new(c.norm(), 0.0))
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    /// Numerical order of vanishing at `c`: the number of leading Taylor
    /// coefficients that vanish to within rounding noise.
    pub fn order_at(&self, c: Complex64) -> u32 {
        if self.is_zero() {
            return INFINITE_ORDER;
        }
        if c == Complex64::new(0.0, 0.0) {
            return self.trailing_zeros();
        }
        let q = self.taylor_at(c);
        let s = self.taylor_scale(c);
        q.iter()
            .zip(&s)
            .take_while(|(qk, sk)| qk.norm() <= TAYLOR_ZERO_TOL * **sk)
            .count() as u32
    }

    /// Polynomial quotient by `t^k` (exact when the low coefficients vanish).
    fn shift_down(&self, k: usize) -> Poly {
        Poly::new(self.coeffs.iter().skip(k).copied().collect())
    }

    /// Raw companion-matrix eigenvalues of a polynomial with nonzero constant term.
    fn companion_eigenvalues(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            Some(0) | None => return Ok(Vec::new()),
            Some(n) => n,
        };
        let lead = self.coeffs[n];
        if n == 1 {
            return Ok(vec![-self.coeffs[0] / lead]);
        }
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..n {
            m[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        let schur = Schur::try_new(m, 1e-15, 10_000).ok_or(Error::RootNonConvergence {
            residual: f64::INFINITY,
        })?;
        let (_, t) = schur.unpack();
        Ok((0..n).map(|i| t[(i, i)]).collect())
    }

    fn newton_polish(&self, mut z: Complex64) -> (Complex64, f64) {
        let deriv = self.derivative();
        for _ in 0..100 {
            let p = self.eval(z);
            let dp = deriv.eval(z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            z -= step;
            if step.norm() <= 1e-16 * (1.0 + z.norm()) {
                break;
            }
        }
        let res = self.eval(z).norm() / self.abs_scale(z).max(f64::MIN_POSITIVE);
        (z, res)
    }

    fn is_multiple_root(&self, c: Complex64, m: usize) -> bool {
        let q = self.taylor_at(c);
        let s = self.taylor_scale(c);
        (0..m).all(|k| q[k].norm() <= TAYLOR_ZERO_TOL * s[k])
    }

    /// All roots with multiplicities.
    ///
    /// Roots at the origin are deflated exactly. Eigenvalue clusters are
    /// merged only when the polynomial is numerically indistinguishable from
    /// one with a multiple root at the cluster centroid; otherwise each root
    /// is polished separately and any pair closer than
    /// [`ROOT_SEPARATION_TOL`] is reported as an unresolved cluster.
    pub fn roots(&self) -> Result<Vec<Root>> {
        if self.is_zero() {
            return Err(Error::InvalidInput("roots of the zero polynomial".into()));
        }
        let mut out = Vec::new();
        let k0 = self.trailing_zeros() as usize;
        if k0 > 0 {
            out.push(Root {
                location: Complex64::new(0.0, 0.0),
                multiplicity: k0 as u32,
                residual: 0.0,
            });
        }
        let p = self.shift_down(k0);
        let raw = p.companion_eigenvalues()?;
        let mut assigned = vec![false; raw.len()];

        for rel in [5e-2, 1e-2, 1e-3, 1e-4, 1e-5] {
            let idx: Vec<usize> = (0..raw.len()).filter(|&i| !assigned[i]).collect();
            for cluster in single_linkage(&raw, &idx, rel) {
                if cluster.len() < 2 {
                    continue;
                }
                let centroid = cluster.iter().map(|&i| raw[i]).sum::<Complex64>() / cluster.len() as f64;
                if p.is_multiple_root(centroid, cluster.len()) {
                    for &i in &cluster {
                        assigned[i] = true;
                    }
                    out.push(Root {
                        location: centroid,
                        multiplicity: cluster.len() as u32,
                        residual: p.eval(centroid).norm() / p.abs_scale(centroid),
                    });
                }
            }
        }

        let mut simple = Vec::new();
        for (i, &z0) in raw.iter().enumerate() {
            if assigned[i] {
                continue;
            }
            let (z, res) = p.newton_polish(z0);
            if res > NEWTON_RESIDUAL_TOL {
                return Err(Error::RootNonConvergence { residual: res });
            }
            simple.push(Root {
                location: z,
                multiplicity: 1,
                residual: res,
            });
        }
        for i in 0..simple.len() {
            for j in (i + 1)..simple.len() {
                let d = (simple[i].location - simple[j].location).norm();
                if d < ROOT_SEPARATION_TOL * (1.0 + simple[i].location.norm()) {
                    return Err(Error::UnresolvedCluster {
                        center: (simple[i].location + simple[j].location) / 2.0,
                        size: 2,
                        spread: d,
                    });
                }
            }
        }
        out.extend(simple);
        Ok(out)
    }
}

/// Groups the selected points into single-linkage clusters at relative radius `rel`.
fn single_linkage(points: &[Complex64], idx: &[usize], rel: f64) -> Vec<Vec<usize>> {
    let n = idx.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut j = i;
        while parent[j] != r {
            let next = parent[j];
            parent[j] = r;
            j = next;
        }
        r
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (za, zb) = (points[idx[a]], points[idx[b]]);
            let scale = 1.0 + za.norm().max(zb.norm());
            if (za - zb).norm() < rel * scale {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for a in 0..n {
        let r = find(&mut parent, a);
        groups.entry(r).or_default().push(idx[a]);
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn taylor_shift_matches_evaluation() {
        let p = Poly::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0), c(2.0, 0.0)]);
        let center = c(0.3, -0.7);
        let q = Poly::new(p.taylor_at(center));
        for u in [c(0.1, 0.2), c(-1.0, 0.4)] {
            assert!((q.eval(u) - p.eval(center + u)).norm() < 1e-12);
        }
    }

    #[test]
    fn reversal_is_an_involution_with_padding() {
        let p = Poly::from_real(&[1.0, 0.0, 3.0]);
        let r = p.reversed(8, "a").unwrap();
        assert_eq!(r.degree(), Some(8));
        assert_eq!(r.reversed(8, "a").unwrap(), p);
        assert!(matches!(
            Poly::from_real(&[0.0; 10].iter().chain([1.0].iter()).copied().collect::<Vec<_>>())
                .reversed(8, "a"),
            Err(Error::DegreeOverflow { index: 10, .. })
        ));
    }

    #[test]
    fn exact_multiple_root_at_origin() {
        let p = Poly::monomial(2, c(27.0, 0.0));
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 2);
        assert_eq!(roots[0].location, c(0.0, 0.0));
    }

    #[test]
    fn off_origin_double_root_is_merged() {
        // (t - 1)^2 (t + 2)
        let p = Poly::from_real(&[-1.0, 1.0]).mul(&Poly::from_real(&[-1.0, 1.0])).mul(&Poly::from_real(&[2.0, 1.0]));
        let mut roots = p.roots().unwrap();
        roots.sort_by(|a, b| b.multiplicity.cmp(&a.multiplicity));
        assert_eq!(roots[0].multiplicity, 2);
        assert!((roots[0].location - c(1.0, 0.0)).norm() < 1e-10);
        assert_eq!(roots[1].multiplicity, 1);
        assert!((roots[1].location - c(-2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn high_multiplicity_off_origin() {
        // (t - 0.5)^10 (t + 1)
        let mut p = Poly::from_real(&[1.0, 1.0]);
        for _ in 0..10 {
            p = p.mul(&Poly::from_real(&[-0.5, 1.0]));
        }
        let roots = p.roots().unwrap();
        let m: u32 = roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(m, 11);
        assert!(roots.iter().any(|r| r.multiplicity == 10 && (r.location - c(0.5, 0.0)).norm() < 1e-6));
    }

    #[test]
    fn close_but_distinct_roots_stay_separate() {
        // roots 1 and 1 + 1e-3: numerically distinguishable, never merged
        let p = Poly::from_real(&[-1.0, 1.0]).mul(&Poly::from_real(&[-1.001, 1.0]));
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|r| r.multiplicity == 1));
    }

    #[test]
    fn order_at_numeric_root() {
        let p = Poly::from_real(&[-1.0, 1.0]).mul(&Poly::from_real(&[-1.0, 1.0]));
        assert_eq!(p.order_at(c(1.0, 0.0)), 2);
        assert_eq!(p.order_at(c(2.0, 0.0)), 0);
        assert_eq!(Poly::zero().order_at(c(1.0, 0.0)), INFINITE_ORDER);
    }
}
