//! Weierstrass elliptic fibrations `w^2 = x^3 + a(t) x + b(t)` over the
//! projective line, their discriminants, and Kodaira classification of the
//! singular fibers.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periods::{MonodromyMatrix, QuasiUnipotenceData};
use crate::poly::{Poly, Root, INFINITE_ORDER};
use crate::volume;

pub mod models;

/// Maximal degree of `a` for a K3 model.
pub const MAX_DEG_A: usize = 8;
/// Maximal degree of `b` for a K3 model.
pub const MAX_DEG_B: usize = 12;

#[derive(Debug, Clone)]
pub struct WeierstrassFibration {
    label: String,
    a: Poly,
    b: Poly,
    discriminant: Poly,
    roots: OnceLock<std::result::Result<Vec<Root>, Error>>,
}

impl PartialEq for WeierstrassFibration {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.a == other.a && self.b == other.b
    }
}

impl WeierstrassFibration {
    pub fn new(label: impl Into<String>, a: Poly, b: Poly) -> Result<Self> {
        if let Some(d) = a.degree().filter(|&d| d > MAX_DEG_A) {
            return Err(Error::DegreeOverflow {
                name: "a",
                index: d,
                max_degree: MAX_DEG_A,
            });
        }
        if let Some(d) = b.degree().filter(|&d| d > MAX_DEG_B) {
            return Err(Error::DegreeOverflow {
                name: "b",
                index: d,
                max_degree: MAX_DEG_B,
            });
        }
        let discriminant = discriminant_of(&a, &b);
        if discriminant.is_zero() {
            return Err(Error::DegenerateDiscriminant);
        }
        Ok(WeierstrassFibration {
            label: label.into(),
            a,
            b,
            discriminant,
            roots: OnceLock::new(),
        })
    }

    pub fn from_real(label: impl Into<String>, a: &[f64], b: &[f64]) -> Result<Self> {
        Self::new(label, Poly::from_real(a), Poly::from_real(b))
    }

    /// Converts `y^2 = 4x^3 - g2 x - g3` to the fixed normal form.
    pub fn from_g2_g3(label: impl Into<String>, g2: &Poly, g3: &Poly) -> Result<Self> {
        let q = Complex64::new(-0.25, 0.0);
        Self::new(label, g2.scale(q), g3.scale(q))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn a(&self) -> &Poly {
        &self.a
    }

    pub fn b(&self) -> &Poly {
        &self.b
    }

    /// `(a(y), b(y))`
    pub fn coefficients_at(&self, y: Complex64) -> (Complex64, Complex64) {
        (self.a.eval(y), self.b.eval(y))
    }

    /// `Δ = 4a^3 + 27b^2`
    pub fn discriminant(&self) -> &Poly {
        &self.discriminant
    }

    /// Roots of Δ on this chart with multiplicities; computed once.
    pub fn discriminant_roots(&self) -> Result<&[Root]> {
        self.roots
            .get_or_init(|| {
                if self.discriminant.degree() == Some(0) {
                    Ok(Vec::new())
                } else {
                    self.discriminant.roots()
                }
            })
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(Clone::clone)
    }

    /// Distance from `y` to the nearest discriminant root on this chart.
    pub fn distance_to_discriminant(&self, y: Complex64) -> f64 {
        match self.discriminant_roots() {
            Ok(roots) => roots
                .iter()
                .map(|r| (r.location - y).norm())
                .fold(f64::INFINITY, f64::min),
            Err(_) => {
                let (d, dd) = self.discriminant.eval_with_derivative(y);
                if dd.norm() == 0.0 {
                    f64::INFINITY
                } else {
                    (d / dd).norm()
                }
            }
        }
    }

    /// The chart at infinity `a~(s) = s^8 a(1/s)`, `b~(s) = s^12 b(1/s)`.
    pub fn infinity_chart(&self) -> Result<WeierstrassFibration> {
        let a = self.a.reversed(MAX_DEG_A, "a")?;
        let b = self.b.reversed(MAX_DEG_B, "b")?;
        let label = match self.label.strip_suffix("@inf") {
            Some(base) => base.to_string(),
            None => format!("{}@inf", self.label),
        };
        WeierstrassFibration::new(label, a, b)
    }

    pub fn to_json(&self) -> FibrationJson {
        let conv = |p: &Poly| p.coeffs().iter().map(|c| [c.re, c.im]).collect();
        FibrationJson {
            label: self.label.clone(),
            a: conv(&self.a),
            b: conv(&self.b),
        }
    }

    pub fn from_json(json: &FibrationJson) -> Result<Self> {
        let conv = |v: &[[f64; 2]]| Poly::new(v.iter().map(|p| Complex64::new(p[0], p[1])).collect());
        Self::new(json.label.clone(), conv(&json.a), conv(&json.b))
    }
}

/// `4a^3 + 27b^2`. Coefficients that cancel to within rounding of the
/// terms producing them are set to zero, so exact vanishing orders survive
/// inexact input coefficients.
pub fn discriminant_of(a: &Poly, b: &Poly) -> Poly {
    let a3 = a.mul(a).mul(a).scale(Complex64::new(4.0, 0.0));
    let b2 = b.mul(b).scale(Complex64::new(27.0, 0.0));
    let abs = |p: &Poly| Poly::new(p.coeffs().iter().map(|z| Complex64::new(z.norm(), 0.0)).collect());
    let (aa, ab) = (abs(a), abs(b));
    let scale = aa.mul(&aa).mul(&aa).scale(Complex64::new(4.0, 0.0)).add(&ab.mul(&ab).scale(Complex64::new(27.0, 0.0)));
    let sum = a3.add(&b2);
    Poly::new(
        sum.coeffs()
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                if z.norm() <= 64.0 * f64::EPSILON * scale.coeff(k).re {
                    Complex64::new(0.0, 0.0)
                } else {
                    z
                }
            })
            .collect(),
    )
}

/// On-disk fibration description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibrationJson {
    pub label: String,
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
}

/// Kodaira types of singular fibers of a minimal Weierstrass model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kodaira {
    /// `I_k`, k ≥ 1
    I(u32),
    II,
    III,
    IV,
    I0Star,
    /// `I_k*`, k ≥ 1
    IStar(u32),
    IVStar,
    IIIStar,
    IIStar,
}

impl Kodaira {
    /// Largest component multiplicity of the normal-crossings model.
    pub fn multiplicity_max(self) -> u32 {
        match self {
            Kodaira::I(_) => 1,
            Kodaira::II | Kodaira::IIStar => 6,
            Kodaira::III | Kodaira::IIIStar => 4,
            Kodaira::IV | Kodaira::IVStar => 3,
            Kodaira::I0Star | Kodaira::IStar(_) => 2,
        }
    }

    /// Euler number of the fiber, equal to ord Δ for a minimal model.
    pub fn discriminant_order(self) -> u32 {
        match self {
            Kodaira::I(k) => k,
            Kodaira::II => 2,
            Kodaira::III => 3,
            Kodaira::IV => 4,
            Kodaira::I0Star => 6,
            Kodaira::IStar(k) => 6 + k,
            Kodaira::IVStar => 8,
            Kodaira::IIIStar => 9,
            Kodaira::IIStar => 10,
        }
    }

    /// Trace of the monodromy conjugacy class.
    pub fn monodromy_trace(self) -> i64 {
        match self {
            Kodaira::I(_) => 2,
            Kodaira::II | Kodaira::IIStar => 1,
            Kodaira::III | Kodaira::IIIStar => 0,
            Kodaira::IV | Kodaira::IVStar => -1,
            Kodaira::I0Star | Kodaira::IStar(_) => -2,
        }
    }

    /// Order of the monodromy, `None` when infinite.
    pub fn monodromy_order(self) -> Option<u32> {
        match self {
            Kodaira::I(_) | Kodaira::IStar(_) => None,
            Kodaira::II | Kodaira::IIStar => Some(6),
            Kodaira::III | Kodaira::IIIStar => Some(4),
            Kodaira::IV | Kodaira::IVStar => Some(3),
            Kodaira::I0Star => Some(2),
        }
    }

    /// Index `k` of `I_k` / `I_k*`, zero for the additive types with finite monodromy.
    pub fn unipotent_index(self) -> u32 {
        match self {
            Kodaira::I(k) | Kodaira::IStar(k) => k,
            _ => 0,
        }
    }

    /// All nine families with a representative index.
    pub fn table() -> [Kodaira; 9] {
        [
            Kodaira::I(1),
            Kodaira::II,
            Kodaira::III,
            Kodaira::IV,
            Kodaira::I0Star,
            Kodaira::IStar(1),
            Kodaira::IVStar,
            Kodaira::IIIStar,
            Kodaira::IIStar,
        ]
    }

    pub fn parse(s: &str) -> Option<Kodaira> {
        let s = s.trim();
        Some(match s {
            "II" => Kodaira::II,
            "III" => Kodaira::III,
            "IV" => Kodaira::IV,
            "I0*" => Kodaira::I0Star,
            "IV*" => Kodaira::IVStar,
            "III*" => Kodaira::IIIStar,
            "II*" => Kodaira::IIStar,
            _ => {
                let rest = s.strip_prefix('I')?;
                if let Some(k) = rest.strip_suffix('*') {
                    Kodaira::IStar(k.parse().ok().filter(|&k| k >= 1)?)
                } else {
                    Kodaira::I(rest.parse().ok().filter(|&k| k >= 1)?)
                }
            }
        })
    }
}

impl fmt::Display for Kodaira {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kodaira::I(k) => write!(f, "I{k}"),
            Kodaira::II => write!(f, "II"),
            Kodaira::III => write!(f, "III"),
            Kodaira::IV => write!(f, "IV"),
            Kodaira::I0Star => write!(f, "I0*"),
            Kodaira::IStar(k) => write!(f, "I{k}*"),
            Kodaira::IVStar => write!(f, "IV*"),
            Kodaira::IIIStar => write!(f, "III*"),
            Kodaira::IIStar => write!(f, "II*"),
        }
    }
}

/// Classifies a fiber from its order triple. Returns `Ok(None)` for a smooth fiber.
pub fn classify(ord_a: u32, ord_b: u32, ord_delta: u32) -> Result<Option<Kodaira>> {
    if ord_a >= 4 && ord_b >= 6 {
        return Err(Error::NonMinimal {
            location: "?".into(),
            ord_a,
            ord_b,
        });
    }
    let bad = || Error::Unclassifiable {
        ord_a,
        ord_b,
        ord_delta,
    };
    if ord_delta == 0 {
        return Ok(None);
    }
    if ord_a == 0 && ord_b == 0 {
        return Ok(Some(Kodaira::I(ord_delta)));
    }
    let kind = match ord_delta {
        2 if ord_a >= 1 && ord_b == 1 => Kodaira::II,
        3 if ord_a == 1 && ord_b >= 2 => Kodaira::III,
        4 if ord_a >= 2 && ord_b == 2 => Kodaira::IV,
        6 if ord_a >= 2 && ord_b >= 3 => Kodaira::I0Star,
        k if k > 6 && ord_a == 2 && ord_b == 3 => Kodaira::IStar(k - 6),
        8 if ord_a >= 3 && ord_b == 4 => Kodaira::IVStar,
        9 if ord_a == 3 && ord_b >= 5 => Kodaira::IIIStar,
        10 if ord_a >= 4 && ord_b == 5 => Kodaira::IIStar,
        _ => return Err(bad()),
    };
    Ok(Some(kind))
}

/// Where a singular fiber sits on the projective line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FiberLocation {
    Finite(Complex64),
    Infinity,
}

impl fmt::Display for FiberLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberLocation::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
            FiberLocation::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularFiberRecord {
    pub location: FiberLocation,
    /// `(ord a, ord b, ord Δ)`; [`INFINITE_ORDER`] marks an identically zero coefficient.
    pub orders: (u32, u32, u32),
    pub kodaira_type: Kodaira,
    pub multiplicity_max: u32,
    pub monodromy: Option<MonodromyMatrix>,
    pub quasi: Option<QuasiUnipotenceData>,
    pub alpha_pred: Rational64,
    pub d_pred: u32,
    pub alpha_fit: Option<f64>,
    pub d_fit: Option<u32>,
}

impl SingularFiberRecord {
    fn new(location: FiberLocation, orders: (u32, u32, u32), kodaira_type: Kodaira) -> Self {
        let (alpha_pred, d_pred) = volume::predicted_exponents(kodaira_type);
        SingularFiberRecord {
            location,
            orders,
            kodaira_type,
            multiplicity_max: kodaira_type.multiplicity_max(),
            monodromy: None,
            quasi: None,
            alpha_pred,
            d_pred,
            alpha_fit: None,
            d_fit: None,
        }
    }

    /// Location in the coordinate of the chart that contains the fiber
    /// (`t` for finite fibers, `s = 1/t` for the fiber at infinity).
    pub fn chart_location(&self) -> Complex64 {
        match self.location {
            FiberLocation::Finite(z) => z,
            FiberLocation::Infinity => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_at_infinity(&self) -> bool {
        matches!(self.location, FiberLocation::Infinity)
    }
}

/// A problem found while scanning for singular fibers that does not prevent
/// classifying the remaining fibers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FiberIssue {
    NonMinimal {
        location: FiberLocation,
        ord_a: u32,
        ord_b: u32,
    },
    Unclassifiable {
        location: FiberLocation,
        orders: (u32, u32, u32),
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FiberScan {
    pub records: Vec<SingularFiberRecord>,
    pub issues: Vec<FiberIssue>,
}

impl FiberScan {
    /// Sum of ord Δ over classified fibers.
    pub fn total_discriminant_order(&self) -> u32 {
        self.records.iter().map(|r| r.orders.2).sum()
    }
}

fn scan_point(
    location: FiberLocation,
    orders: (u32, u32, u32),
    scan: &mut FiberScan,
) {
    let (oa, ob, od) = orders;
    if oa >= 4 && ob >= 6 {
        scan.issues.push(FiberIssue::NonMinimal {
            location,
            ord_a: oa,
            ord_b: ob,
        });
        return;
    }
    match classify(oa, ob, od) {
        Ok(Some(kind)) => scan.records.push(SingularFiberRecord::new(location, orders, kind)),
        Ok(None) => {}
        Err(_) => scan.issues.push(FiberIssue::Unclassifiable { location, orders }),
    }
}

/// Locates and classifies all singular fibers on both charts.
///
/// Root-finding failures (non-convergence, unresolved clusters) are errors;
/// non-minimal points are collected in [`FiberScan::issues`].
pub fn singular_fibers(w: &WeierstrassFibration) -> Result<FiberScan> {
    let mut scan = FiberScan::default();
    for root in w.discriminant_roots()? {
        let z = root.location;
        let orders = (w.a.order_at(z), w.b.order_at(z), root.multiplicity);
        scan_point(FiberLocation::Finite(z), orders, &mut scan);
    }
    if let Ok(inf) = w.infinity_chart() {
        let od = inf.discriminant.trailing_zeros();
        if od >= 1 {
            let orders = (inf.a.trailing_zeros(), inf.b.trailing_zeros(), od);
            scan_point(FiberLocation::Infinity, orders, &mut scan);
        }
    }
    scan.records.sort_by(|x, y| location_key(&x.location).total_cmp(&location_key(&y.location)).then(
        location_key2(&x.location).total_cmp(&location_key2(&y.location)),
    ));
    Ok(scan)
}

fn location_key(l: &FiberLocation) -> f64 {
    match l {
        FiberLocation::Finite(z) => z.re,
        FiberLocation::Infinity => f64::INFINITY,
    }
}

fn location_key2(l: &FiberLocation) -> f64 {
    match l {
        FiberLocation::Finite(z) => z.im,
        FiberLocation::Infinity => f64::INFINITY,
    }
}

fn fmt_order(o: u32) -> String {
    if o == INFINITE_ORDER {
        "inf".into()
    } else {
        o.to_string()
    }
}

/// CSV with columns `location_re, location_im, ord_a, ord_b, ord_delta, type, alpha_pred, d_pred`.
pub fn singular_fibers_csv(records: &[SingularFiberRecord]) -> String {
    let mut out = String::from("location_re,location_im,ord_a,ord_b,ord_delta,type,alpha_pred,d_pred\n");
    for r in records {
        let (re, im) = match r.location {
            FiberLocation::Finite(z) => (crate::io::fmt_f64(z.re), crate::io::fmt_f64(z.im)),
            FiberLocation::Infinity => ("inf".to_string(), "inf".to_string()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            re,
            im,
            fmt_order(r.orders.0),
            fmt_order(r.orders.1),
            fmt_order(r.orders.2),
            r.kodaira_type,
            r.alpha_pred,
            r.d_pred
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn discriminant_examples() {
        let w = WeierstrassFibration::from_real("lemniscatic", &[-1.0], &[]).unwrap();
        assert_eq!(w.discriminant(), &Poly::from_real(&[-4.0]));
        let w = WeierstrassFibration::from_real("cusp", &[], &[0.0, 1.0]).unwrap();
        assert_eq!(w.discriminant(), &Poly::from_real(&[0.0, 0.0, 27.0]));
    }

    #[test]
    fn zero_discriminant_is_rejected() {
        assert_eq!(
            WeierstrassFibration::from_real("zero", &[], &[]),
            Err(Error::DegenerateDiscriminant)
        );
        // a = -3 t^2, b = 2 t^3 gives 4(-27 t^6) + 27 (4 t^6) = 0
        assert_eq!(
            WeierstrassFibration::from_real("cancel", &[0.0, 0.0, -3.0], &[0.0, 0.0, 0.0, 2.0]),
            Err(Error::DegenerateDiscriminant)
        );
    }

    #[test]
    fn degree_overflow_names_coefficient() {
        let err = WeierstrassFibration::from_real("big", &[0.0; 10], &[1.0]).ok();
        assert!(err.is_some(), "trailing zero coefficients are trimmed");
        let mut a = vec![0.0; 10];
        a[9] = 1.0;
        match WeierstrassFibration::from_real("big", &a, &[1.0]) {
            Err(Error::DegreeOverflow { name, index, .. }) => {
                assert_eq!(name, "a");
                assert_eq!(index, 9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify(0, 0, 1).unwrap(), Some(Kodaira::I(1)));
        assert_eq!(classify(0, 0, 5).unwrap(), Some(Kodaira::I(5)));
        assert_eq!(classify(INFINITE_ORDER, 1, 2).unwrap(), Some(Kodaira::II));
        assert_eq!(classify(1, INFINITE_ORDER, 3).unwrap(), Some(Kodaira::III));
        assert_eq!(classify(2, 2, 4).unwrap(), Some(Kodaira::IV));
        assert_eq!(classify(2, 3, 6).unwrap(), Some(Kodaira::I0Star));
        assert_eq!(classify(2, 3, 9).unwrap(), Some(Kodaira::IStar(3)));
        assert_eq!(classify(3, 4, 8).unwrap(), Some(Kodaira::IVStar));
        assert_eq!(classify(3, 5, 9).unwrap(), Some(Kodaira::IIIStar));
        assert_eq!(classify(4, 5, 10).unwrap(), Some(Kodaira::IIStar));
        assert_eq!(classify(0, 0, 0).unwrap(), None);
        assert!(matches!(classify(4, 6, 12), Err(Error::NonMinimal { .. })));
        assert!(matches!(classify(1, 1, 5), Err(Error::Unclassifiable { .. })));
    }

    #[test]
    fn kodaira_display_roundtrip() {
        for k in Kodaira::table().into_iter().chain([Kodaira::I(7), Kodaira::IStar(4)]) {
            assert_eq!(Kodaira::parse(&k.to_string()), Some(k));
        }
    }

    #[test]
    fn cusp_fiber_is_type_ii() {
        let w = WeierstrassFibration::from_real("cusp", &[], &[0.0, 1.0]).unwrap();
        let scan = singular_fibers(&w).unwrap();
        assert_eq!(scan.records.len(), 1);
        let r = &scan.records[0];
        assert_eq!(r.orders, (INFINITE_ORDER, 1, 2));
        assert_eq!(r.kodaira_type, Kodaira::II);
        // b~ = s^11 with a~ = 0 is non-minimal at infinity and is reported
        assert!(matches!(
            scan.issues.as_slice(),
            [FiberIssue::NonMinimal { location: FiberLocation::Infinity, .. }]
        ));
    }

    #[test]
    fn simple_discriminant_zero_is_i1() {
        let w = WeierstrassFibration::from_real("i1", &[-3.0], &[1.0, 1.0]).unwrap();
        let scan = singular_fibers(&w).unwrap();
        // Δ = 27((1+t)^2 - 4): roots t = 1, -3
        let finite: Vec<_> = scan.records.iter().filter(|r| !r.is_at_infinity()).collect();
        assert_eq!(finite.len(), 2);
        for r in finite {
            assert_eq!(r.orders, (0, 0, 1));
            assert_eq!(r.kodaira_type, Kodaira::I(1));
        }
    }

    #[test]
    fn constant_discriminant_has_no_affine_fibers() {
        let w = WeierstrassFibration::from_real("lemniscatic", &[-1.0], &[]).unwrap();
        let scan = singular_fibers(&w).unwrap();
        assert!(scan.records.iter().all(|r| r.is_at_infinity()));
        assert!(scan.records.is_empty());
        assert!(matches!(scan.issues.as_slice(), [FiberIssue::NonMinimal { location: FiberLocation::Infinity, ord_a: 8, .. }]));
    }

    #[test]
    fn infinity_chart_examples() {
        let w = WeierstrassFibration::from_real("lemniscatic", &[-1.0], &[]).unwrap();
        let inf = w.infinity_chart().unwrap();
        assert_eq!(inf.a(), &Poly::monomial(8, c(-1.0)));
        assert!(inf.b().is_zero());
        assert!(inf.a().trailing_zeros() >= 4 && inf.b().trailing_zeros() >= 6);

        let w = WeierstrassFibration::from_real("t4", &[0.0, 0.0, 0.0, 0.0, 1.0], &[1.0]).unwrap();
        assert_eq!(w.infinity_chart().unwrap().a(), &Poly::monomial(4, c(1.0)));
        assert_eq!(w.infinity_chart().unwrap().infinity_chart().unwrap(), w);
    }

    #[test]
    fn json_roundtrip() {
        let w = models::generic_k3(7);
        let json = serde_json::to_string(&w.to_json()).unwrap();
        let back = WeierstrassFibration::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn g2_g3_conversion() {
        // y^2 = 4x^3 - 4x  <=>  w^2 = x^3 - x
        let w = WeierstrassFibration::from_g2_g3("g", &Poly::from_real(&[4.0]), &Poly::zero()).unwrap();
        assert_eq!(w.a(), &Poly::from_real(&[-1.0]));
    }
}
