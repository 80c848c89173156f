use k3limit::fibration::models::{engineered, generic_k3};
use k3limit::fibration::{singular_fibers, singular_fibers_csv, FiberLocation, Kodaira, WeierstrassFibration};
use k3limit::poly::Poly;
use num_complex::Complex64;
use proptest::prelude::*;

mod common;

use common::c;

/// Euler number of the singular fiber, which equals ord Δ for a minimal model.
fn euler_number(k: Kodaira) -> u32 {
    match k {
        Kodaira::I(n) => n,
        Kodaira::II => 2,
        Kodaira::III => 3,
        Kodaira::IV => 4,
        Kodaira::I0Star => 6,
        Kodaira::IStar(n) => n + 6,
        Kodaira::IVStar => 8,
        Kodaira::IIIStar => 9,
        Kodaira::IIStar => 10,
    }
}

fn shifted(w: &WeierstrassFibration, shift: Complex64) -> WeierstrassFibration {
    let a = Poly::new(w.a().taylor_at(shift));
    let b = Poly::new(w.b().taylor_at(shift));
    WeierstrassFibration::new("shifted", a, b).unwrap()
}

fn finite_types(w: &WeierstrassFibration) -> Vec<(Complex64, Kodaira)> {
    singular_fibers(w)
        .unwrap()
        .records
        .iter()
        .filter_map(|r| match r.location {
            FiberLocation::Finite(z) => Some((z, r.kodaira_type)),
            FiberLocation::Infinity => None,
        })
        .collect()
}

#[test]
fn cusp_model_classifies_to_a_type_ii_fiber() {
    let w = WeierstrassFibration::from_real("cusp", &[], &[-1.0, 1.0]).unwrap();
    let scan = singular_fibers(&w).unwrap();
    let csv = singular_fibers_csv(&scan.records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert!((fields[0].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!(fields[1].parse::<f64>().unwrap().abs() < 1e-12);
    assert_eq!(fields[5], "II");
    assert_eq!(fields[6], "-1/3");
}

#[test]
fn engineered_fibers_have_consistent_euler_numbers() {
    for kind in Kodaira::table().into_iter().chain([Kodaira::I(3), Kodaira::IStar(2)]) {
        let scan = singular_fibers(&engineered(kind)).unwrap();
        for r in &scan.records {
            assert_eq!(r.orders.2, euler_number(r.kodaira_type), "{kind} at {:?}", r.location);
        }
        let origin = scan.records.iter().find(|r| r.location == FiberLocation::Finite(c(0.0, 0.0))).unwrap();
        assert_eq!(origin.kodaira_type, kind);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generic_models_have_24_nodal_fibers(seed in 0u64..10_000) {
        let scan = singular_fibers(&generic_k3(seed)).unwrap();
        prop_assert!(scan.issues.is_empty());
        prop_assert_eq!(scan.records.len(), 24);
        prop_assert!(scan.records.iter().all(|r| r.kodaira_type == Kodaira::I(1)));
        prop_assert_eq!(scan.total_discriminant_order(), 24);
    }

    #[test]
    fn types_are_invariant_under_translation(k in 0usize..9, re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let kind = Kodaira::table()[k];
        let w = engineered(kind);
        let shift = c(re, im);
        let moved = finite_types(&shifted(&w, shift));
        for (z, t) in finite_types(&w) {
            prop_assert!(moved.iter().any(|&(m, u)| u == t && (m + shift - z).norm() < 1e-6 * (1.0 + z.norm())),
                "{kind}: {t} at {z} missing after shift");
        }
    }

    #[test]
    fn types_are_invariant_under_weighted_rescaling(k in 0usize..9, lambda in 0.3..3.0f64, arg in 0.0..6.28f64) {
        let kind = Kodaira::table()[k];
        let w = engineered(kind);
        let l = Complex64::from_polar(lambda, arg);
        let scaled = WeierstrassFibration::new("scaled", w.a().scale(l.powu(4)), w.b().scale(l.powu(6))).unwrap();
        let (mut a, mut b) = (finite_types(&w), finite_types(&scaled));
        let key = |x: &(Complex64, Kodaira)| (x.0.re, x.0.im);
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.1, y.1);
            prop_assert!((x.0 - y.0).norm() < 1e-6);
        }
    }
}
