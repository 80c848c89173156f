//! Polynomial prepotentials `F(y) = Σ c_e (y - y0)^e`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: Complex64,
}

/// A polynomial prepotential on the polydisc `|y_i - center_i| ≤ radii_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPrepotential {
    pub center: Vec<Complex64>,
    pub radii: Vec<f64>,
    /// Monomials in the shifted variables `y - center`.
    pub terms: Vec<Monomial>,
}

fn powi(z: Complex64, k: u32) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl SeriesPrepotential {
    pub fn new(center: Vec<Complex64>, radii: Vec<f64>, terms: Vec<Monomial>) -> Result<Self> {
        let n = center.len();
        if n == 0 || radii.len() != n || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidInput("polydisc needs one positive radius per variable".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.exponents.len() != n) {
            return Err(Error::InvalidInput(format!("monomial {:?} has the wrong arity", t.exponents)));
        }
        Ok(SeriesPrepotential { center, radii, terms })
    }

    /// A polynomial given in powers of `y`, restricted to a polydisc.
    pub fn from_global(terms: Vec<Monomial>, center: Vec<Complex64>, radii: Vec<f64>) -> Result<Self> {
        let n = center.len();
        SeriesPrepotential::new(vec![Complex64::new(0.0, 0.0); n], vec![f64::INFINITY; n], terms)?
            .recentered(center, radii)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The same function expanded around `center`, on a new polydisc.
    pub fn recentered(&self, center: Vec<Complex64>, radii: Vec<f64>) -> Result<Self> {
        let n = self.dim();
        if center.len() != n {
            return Err(Error::InvalidInput("center has the wrong dimension".into()));
        }
        let shift: Vec<Complex64> = center.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        for t in &self.terms {
            // Π (x_i + s_i)^{e_i} = Σ_{k ≤ e} Π C(e_i, k_i) s_i^{e_i - k_i} x_i^{k_i}
            let mut partial: Vec<(Vec<u32>, Complex64)> = vec![(Vec::new(), t.coeff)];
            for i in 0..n {
                let (e, s) = (t.exponents[i], shift[i]);
                partial = partial
                    .into_iter()
                    .flat_map(|(ks, c)| {
                        (0..=e).map(move |k| {
                            let mut ks = ks.clone();
                            ks.push(k);
                            (ks, c * binom(e, k) * powi(s, e - k))
                        })
                    })
                    .collect();
            }
            for (ks, c) in partial {
                *out.entry(ks).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        let terms = out
            .into_iter()
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .map(|(exponents, coeff)| Monomial { exponents, coeff })
            .collect();
        SeriesPrepotential::new(center, radii, terms)
    }

    pub fn contains(&self, y: &[Complex64]) -> bool {
        y.len() == self.dim()
            && y.iter()
                .zip(&self.center)
                .zip(&self.radii)
                .all(|((y, c), r)| (y - c).norm() <= *r * (1.0 + 1e-12))
    }

    fn shifted(&self, y: &[Complex64]) -> Vec<Complex64> {
        y.iter().zip(&self.center).map(|(a, b)| a - b).collect()
    }

    /// `∂^k F` for a multi-index of derivatives `k`.
    fn derivative(&self, x: &[Complex64], k: &[u32]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut c = t.coeff;
            for i in 0..x.len() {
                let (e, d) = (t.exponents[i], k[i]);
                if d > e {
                    c = Complex64::new(0.0, 0.0);
                    break;
                }
                let falling = (0..d).fold(1.0, |a, j| a * (e - j) as f64);
                c *= falling * powi(x[i], e - d);
            }
            acc += c;
        }
        acc
    }

    pub fn value(&self, y: &[Complex64]) -> Complex64 {
        self.derivative(&self.shifted(y), &vec![0; self.dim()])
    }

    pub fn gradient(&self, y: &[Complex64]) -> Vec<Complex64> {
        let x = self.shifted(y);
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut k = vec![0; n];
                k[i] = 1;
                self.derivative(&x, &k)
            })
            .collect()
    }

    /// `Z_ij = ∂²F/∂y_i∂y_j`, symmetric by construction.
    pub fn hessian(&self, y: &[Complex64]) -> DMatrix<Complex64> {
        let x = self.shifted(y);
        let n = self.dim();
        let mut z = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut k = vec![0; n];
                k[i] += 1;
                k[j] += 1;
                let v = self.derivative(&x, &k);
                z[(i, j)] = v;
                z[(j, i)] = v;
            }
        }
        z
    }
}
