//! Period lattices of `w^2 = x^3 + a x + b` against `dx/w`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const AGM_MAX_ITER: usize = 64;
/// Relative margin below which the sign test `|a-b| <= |a+b|` is treated as ambiguous.
const BRANCH_AMBIGUITY: f64 = 1e-6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Roots of `x^3 + a x + b`, Cardano followed by Newton polishing.
pub fn cubic_roots(a: Complex64, b: Complex64) -> [Complex64; 3] {
    let d0 = -3.0 * a;
    let d1 = 27.0 * b;
    let disc = (d1 * d1 - 4.0 * d0 * d0 * d0).sqrt();
    let (p, m) = (d1 + disc, d1 - disc);
    let big = if p.norm() >= m.norm() { p } else { m };
    let cc = (big * 0.5).powf(1.0 / 3.0);
    let xi = c(-0.5, 3f64.sqrt() / 2.0);
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    let mut rot = c(1.0, 0.0);
    for r in roots.iter_mut() {
        let ck = rot * cc;
        *r = if ck.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            -(ck + d0 / ck) / 3.0
        };
        rot *= xi;
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = *r * *r * *r + a * *r + b;
            let df = 3.0 * *r * *r + a;
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots
}

/// `y` or `-y`, whichever is closer to `x`.
fn right_choice(x: Complex64, y: Complex64) -> Complex64 {
    if (x - y).norm() <= (x + y).norm() {
        y
    } else {
        -y
    }
}

fn ambiguous(x: Complex64, y: Complex64) -> bool {
    ((x - y).norm() - (x + y).norm()).abs() <= BRANCH_AMBIGUITY * (x.norm() + y.norm())
}

/// Arithmetic-geometric mean with the right choice of square root at every step.
pub fn agm(mut a: Complex64, mut b: Complex64) -> Result<Complex64> {
    for _ in 0..AGM_MAX_ITER {
        if (a - b).norm() <= 1e-15 * a.norm() {
            return Ok(a);
        }
        let a1 = 0.5 * (a + b);
        let g = right_choice(a1, (a * b).sqrt());
        a = a1;
        b = g;
    }
    if (a - b).norm() <= 1e-13 * a.norm() {
        Ok(a)
    } else {
        Err(Error::AgmNonConvergence {
            iterations: AGM_MAX_ITER,
        })
    }
}

/// How a period pair was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodMethod {
    Agm,
    Quadrature,
}

/// A lattice basis `(ω1, ω2)` with `Im(ω2/ω1) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBasis {
    pub w1: Complex64,
    pub w2: Complex64,
    pub method: PeriodMethod,
}

impl LatticeBasis {
    pub fn tau(&self) -> Complex64 {
        self.w2 / self.w1
    }
}

fn oriented(w1: Complex64, w2: Complex64, method: PeriodMethod) -> LatticeBasis {
    if (w2 / w1).im < 0.0 {
        LatticeBasis { w1, w2: -w2, method }
    } else {
        LatticeBasis { w1, w2, method }
    }
}

/// Periods of `dx/w` from the AGM; falls back to quadrature when a sign
/// test in the first step is ambiguous.
pub fn lattice_periods(a: Complex64, b: Complex64) -> Result<LatticeBasis> {
    let mut e = cubic_roots(a, b);
    // for real roots this is e1 > e2 > e3, making ω1 the real period
    e.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let sa = (e[0] - e[2]).sqrt();
    let sb = (e[0] - e[1]).sqrt();
    let sc = (e[1] - e[2]).sqrt();
    if ambiguous(sa, sb) || ambiguous(sa, sc) {
        return quadrature_periods(&e);
    }
    let sb = right_choice(sa, sb);
    let sc = right_choice(sa, sc);
    let m1 = agm(sa, sb)?;
    let m2 = agm(sa, sc)?;
    let w1 = 2.0 * PI / m1;
    let w2 = c(0.0, 2.0 * PI) / m2;
    Ok(oriented(w1, w2, PeriodMethod::Agm))
}

/// `2 ∫_{ei}^{ej} dx/w` along the straight segment, computed with the
/// substitution `x = m + h cos θ`; the result is a lattice vector up to sign.
pub fn segment_period(ei: Complex64, ej: Complex64, ek: Complex64) -> Complex64 {
    let m = 0.5 * (ei + ej);
    let h = 0.5 * (ej - ei);
    // the integrand is an even periodic function of θ, so the midpoint rule
    // converges geometrically
    let eval = |n: usize| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut prev: Option<Complex64> = None;
        for k in 0..n {
            let th = (k as f64 + 0.5) * PI / n as f64;
            let mut r = (m + h * th.cos() - ek).sqrt();
            if let Some(p) = prev {
                r = right_choice(p, r);
            }
            prev = Some(r);
            acc += 1.0 / r;
        }
        acc * c(0.0, 2.0 * PI / n as f64)
    };
    let mut n = 32;
    let mut prev = eval(n);
    while n < 1 << 20 {
        n *= 2;
        let next = right_choice(prev, eval(n));
        if (next - prev).norm() <= 1e-15 * next.norm() {
            return next;
        }
        prev = next;
    }
    prev
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let t = ((p - a) * d.conj()).re / d.norm_sqr();
    (p - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Lattice from two of the three segment periods, choosing the two segments
/// whose opposite root is relatively farthest away.
pub fn quadrature_periods(e: &[Complex64; 3]) -> Result<LatticeBasis> {
    let mut cands: Vec<(f64, usize)> = (0..3)
        .map(|k| {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let len = (e[j] - e[i]).norm();
            (segment_distance(e[k], e[i], e[j]) / len, k)
        })
        .collect();
    cands.sort_by(|x, y| y.0.total_cmp(&x.0));
    let per = |k: usize| {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        segment_period(e[i], e[j], e[k])
    };
    let w1 = per(cands[0].1);
    let w2 = per(cands[1].1);
    if (w2 / w1).im.abs() < 1e-12 {
        return Err(Error::Singular("degenerate quadrature lattice".into()));
    }
    Ok(oriented(w1, w2, PeriodMethod::Quadrature))
}

/// Maps `tau` to the standard fundamental domain.
pub fn reduce_tau(mut tau: Complex64) -> Complex64 {
    for _ in 0..1000 {
        tau.re -= tau.re.round();
        if tau.norm_sqr() < 1.0 - 1e-15 {
            tau = -1.0 / tau;
        } else {
            break;
        }
    }
    tau
}

/// Reduces the basis `(ω1, ω2)` so that `τ = ω2/ω1` lies in the standard
/// fundamental domain with `Re τ ∈ (-1/2, 1/2]`; returns the new basis and
/// the integer matrix `M` with `(ω1', ω2') = M (ω1, ω2)`.
pub fn reduce_basis(w1: Complex64, w2: Complex64) -> (Complex64, Complex64, [[i64; 2]; 2]) {
    let (mut a, mut b) = (w1, w2);
    let mut m = [[1i64, 0], [0, 1]];
    for _ in 0..1000 {
        let tau = b / a;
        let n = (tau.re - 0.5).ceil();
        if n != 0.0 {
            b -= a * n;
            let k = n as i64;
            m[1][0] -= k * m[0][0];
            m[1][1] -= k * m[0][1];
        }
        let tau = b / a;
        if tau.norm_sqr() < 1.0 - 1e-14 {
            // τ -> -1/τ
            let (na, nb) = (b, -a);
            a = na;
            b = nb;
            m = [[m[1][0], m[1][1]], [-m[0][0], -m[0][1]]];
        } else {
            break;
        }
    }
    let tau = b / a;
    // on the unit circle prefer Re τ >= 0
    if (tau.norm_sqr() - 1.0).abs() <= 1e-14 && tau.re < -1e-14 {
        let (na, nb) = (b, -a);
        a = na;
        b = nb;
        m = [[m[1][0], m[1][1]], [-m[0][0], -m[0][1]]];
    }
    (a, b, m)
}

/// Normalized Eisenstein series `(E4, E6)` by q-expansion.
pub fn eisenstein(tau: Complex64) -> (Complex64, Complex64) {
    let q = (c(0.0, 2.0 * PI) * tau).exp();
    let mut e4 = c(1.0, 0.0);
    let mut e6 = c(1.0, 0.0);
    let mut qn = c(1.0, 0.0);
    for n in 1..200 {
        qn *= q;
        if qn.norm() < 1e-300 {
            break;
        }
        let nf = n as f64;
        let l = qn / (1.0 - qn);
        let t4 = 240.0 * nf.powi(3) * l;
        let t6 = -504.0 * nf.powi(5) * l;
        e4 += t4;
        e6 += t6;
        if t4.norm() < 1e-18 * e4.norm() && t6.norm() < 1e-18 * e6.norm().max(1e-300) {
            break;
        }
    }
    (e4, e6)
}

/// Klein's `j` invariant of the lattice `Z + Z tau`.
pub fn j_of_tau(tau: Complex64) -> Complex64 {
    let (e4, e6) = eisenstein(reduce_tau(tau));
    let e43 = e4 * e4 * e4;
    1728.0 * e43 / (e43 - e6 * e6)
}

/// `j` of `w^2 = x^3 + a x + b`: `1728 · 4a^3 / (4a^3 + 27b^2)`.
pub fn j_of_curve(a: Complex64, b: Complex64) -> Complex64 {
    let a3 = 4.0 * a * a * a;
    1728.0 * a3 / (a3 + 27.0 * b * b)
}
