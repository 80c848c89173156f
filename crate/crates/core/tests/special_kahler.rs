use k3limit::fibration::models::{default_generic_k3, two_nodal};
use k3limit::periods::lattice::{j_of_curve, j_of_tau};
use k3limit::periods::{circle_path, loop_monodromy};
use k3limit::special_kahler::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cubic_chart() -> SpecialKahlerChart {
    let terms = vec![Monomial { exponents: vec![3], coeff: c(1.0 / 6.0, 0.0) }];
    let f = SeriesPrepotential::from_global(terms, vec![c(0.3, 1.0)], vec![0.5]).unwrap();
    SpecialKahlerChart::series(f, vec![1]).unwrap()
}

fn two_dimensional(center: Vec<Complex64>, radii: Vec<f64>, polarization: Vec<u32>) -> SpecialKahlerChart {
    let m = |e: [u32; 2], re: f64, im: f64| Monomial { exponents: e.to_vec(), coeff: c(re, im) };
    let terms = vec![
        m([2, 0], 0.1, 1.0),
        m([1, 1], 0.3, 0.2),
        m([0, 2], -0.2, 0.75),
        m([3, 0], 0.05, 0.02),
        m([1, 2], 0.0, 0.04),
        m([2, 2], 0.01, 0.0),
    ];
    SpecialKahlerChart::series(SeriesPrepotential::from_global(terms, center, radii).unwrap(), polarization).unwrap()
}

#[test]
fn z_equals_y_matches_closed_form_elimination() {
    let chart = cubic_chart();
    for y in [c(0.3, 1.0), c(0.5, 0.7), c(0.0, 1.3)] {
        // v = (x, (x^2 - s^2)/2) for y = x + i s, g = 2s(dx^2 + ds^2)
        let (x, s) = (y.re, y.im);
        let g = chart.metric_in_darboux(&[y]).unwrap();
        let exact = [[2.0 * s + 2.0 * x * x / s, -2.0 * x / s], [-2.0 * x / s, 2.0 / s]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - exact[i][j]).abs() < 1e-12, "{y}: {g}");
            }
        }
        assert!((g.determinant() - 4.0).abs() < 1e-12);
    }
    let grid = chart.sample_grid(4, 0.9);
    let h = hessian_structure_check(&chart, &grid).unwrap();
    assert!(h.max_defect < 1e-6, "{h:?}");
    let ma = monge_ampere_check(&chart, &grid).unwrap();
    assert!(ma.pass && (ma.mean_det - 4.0).abs() < 1e-10);
    assert!(darboux_differential_check(&chart, &grid, 1e-5).unwrap().max_defect < 1e-8);
}

#[test]
fn two_dimensional_series_is_monge_ampere() {
    let chart = two_dimensional(vec![c(0.1, 0.0), c(0.0, 0.1)], vec![0.3, 0.3], vec![1, 3]);
    let grid = chart.sample_grid(2, 0.9);
    let h = hessian_structure_check(&chart, &grid).unwrap();
    assert!(h.pass, "{h:?}");
    let ma = monge_ampere_check(&chart, &grid).unwrap();
    assert!(ma.pass, "{ma:?}");
    assert!((ma.mean_det - 16.0 / 9.0).abs() < 1e-10 * ma.mean_det);
    assert!(darboux_differential_check(&chart, &grid, 1e-5).unwrap().max_defect < 1e-8);
}

#[test]
fn rebased_charts_differ_by_a_translation_and_compose() {
    let (ca, cb, cc) = (
        vec![c(0.1, 0.0), c(0.0, 0.1)],
        vec![c(0.15, 0.05), c(0.02, 0.08)],
        vec![c(0.12, -0.03), c(-0.04, 0.1)],
    );
    let r = vec![0.3, 0.3];
    let (a, b, cch) = (
        two_dimensional(ca.clone(), r.clone(), vec![2, 1]),
        two_dimensional(cb.clone(), r.clone(), vec![2, 1]),
        two_dimensional(cc.clone(), r.clone(), vec![2, 1]),
    );
    let overlap: Vec<Vec<Complex64>> = a
        .sample_grid(2, 0.3)
        .into_iter()
        .filter(|u| b.contains(u) && cch.contains(u))
        .collect();
    assert!(overlap.len() >= 5);
    let ab = transition(&a, &b, &overlap).unwrap();
    assert_eq!(ab.p, (0..4).map(|i| (0..4).map(|j| (i == j) as i64).collect::<Vec<i64>>()).collect::<Vec<_>>());
    // v_A - v_B = (d_i Re(c_B - c_A), 0)
    let expected = [2.0 * (cb[0] - ca[0]).re, (cb[1] - ca[1]).re, 0.0, 0.0];
    for (x, e) in ab.b.iter().zip(expected) {
        assert!((x - e).abs() < 1e-12, "{:?}", ab.b);
    }
    let bc = transition(&b, &cch, &overlap).unwrap();
    let ac = transition(&a, &cch, &overlap).unwrap();
    let composed = ab.compose(&bc);
    assert_eq!(composed.p, ac.p);
    for (x, y) in composed.b.iter().zip(&ac.b) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn fibration_chart_is_special_kahler() {
    let w = default_generic_k3();
    let t0 = c(0.3, -0.2);
    let radius = 0.2 * w.distance_to_discriminant(t0);
    let chart = SpecialKahlerChart::fibration(FibrationPrepotential::new(&w, t0, radius, None).unwrap()).unwrap();
    let grid = chart.sample_grid(3, 0.9);
    let h = hessian_structure_check(&chart, &grid).unwrap();
    assert!(h.pass, "{h:?}");
    let ma = monge_ampere_check(&chart, &grid).unwrap();
    assert!(ma.pass && (ma.mean_det - 4.0).abs() < 1e-8, "{ma:?}");
    assert!(darboux_differential_check(&chart, &grid, 1e-6).unwrap().max_defect < 1e-8);
    let Prepotential::Fibration(f) = chart.prepotential() else { unreachable!() };
    for u in &grid {
        let t = u[0];
        let tau = f.tau(t);
        assert_eq!(chart.metric_at(u).unwrap()[(0, 0)], tau.im);
        let (a, b) = w.coefficients_at(t);
        let (jt, jc) = (j_of_tau(tau), j_of_curve(a, b));
        assert!((jt - jc).norm() < 1e-8 * jc.norm().max(1.0));
        let direct = base_density(&w, t).unwrap();
        assert!((f.density(t) - direct).abs() < 1e-10 * direct);
    }
}

#[test]
fn loop_transitions_are_the_period_monodromies() {
    let w = two_nodal();
    for fiber in [c(1.0, 0.0), c(-3.0, 0.0)] {
        let base = fiber + c(0.0, 1.0);
        let a = FibrationPrepotential::new(&w, base, 0.3, None).unwrap();
        let lasso = circle_path(fiber, base, 64, 1);
        let t = loop_monodromy(&w, a.basis(), &lasso).unwrap();
        let b = a.continued(&lasso, 0.3).unwrap();
        let (ca, cb) = (SpecialKahlerChart::fibration(a).unwrap(), SpecialKahlerChart::fibration(b).unwrap());
        let overlap = ca.sample_grid(3, 0.9);
        let tr = transition(&cb, &ca, &overlap).unwrap();
        assert_eq!(tr.linear_2x2().unwrap(), t.entries, "{fiber}");
        let p = t.entries;
        assert_eq!(p[0][0] + p[1][1], 2);
        let n = [[p[0][0] - 1, p[0][1]], [p[1][0], p[1][1] - 1]];
        assert!(n != [[0, 0], [0, 0]]);
        assert_eq!(n[0][0] * n[0][0] + n[0][1] * n[1][0], 0);
        assert!(tr.residual < TRANSITION_TOLERANCE);
    }
}

#[test]
fn every_loop_of_the_generic_k3_matches_its_period_monodromy() {
    let w = default_generic_k3();
    let scan = k3limit::fibration::singular_fibers(&w).unwrap();
    for rec in &scan.records {
        let r = loop_transition_check(&w, rec).unwrap();
        assert!(r.matches, "{:?}: {:?} vs {:?}", r.fiber, r.transition.p, r.period_monodromy);
        assert!(r.transition.residual < TRANSITION_TOLERANCE);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratic_darboux_map_is_additive(
        tr in -2.0..2.0f64, ti in 0.1..3.0f64,
        a in (-0.3..0.3f64, -0.3..0.3f64), b in (-0.3..0.3f64, -0.3..0.3f64),
        d in 1u32..5,
    ) {
        let terms = vec![Monomial { exponents: vec![2], coeff: c(tr, ti) * 0.5 }];
        let f = SeriesPrepotential::from_global(terms, vec![c(0.0, 0.0)], vec![1.0]).unwrap();
        let chart = SpecialKahlerChart::series(f, vec![d]).unwrap();
        let (ya, yb) = (c(a.0, a.1), c(b.0, b.1));
        let sum = chart.darboux(&[ya + yb]).unwrap();
        let parts = chart.darboux(&[ya]).unwrap() + chart.darboux(&[yb]).unwrap();
        prop_assert!((sum - parts).amax() < 1e-14);
        let ma = monge_ampere_check(&chart, &chart.sample_grid(2, 0.9)).unwrap();
        prop_assert!((ma.mean_det - 4.0 / (d * d) as f64).abs() < 1e-10);
    }

    #[test]
    fn z_is_symmetric_with_positive_imaginary_part(
        x in (-0.25..0.25f64, -0.25..0.25f64, -0.25..0.25f64, -0.25..0.25f64),
    ) {
        let chart = two_dimensional(vec![c(0.0, 0.0), c(0.0, 0.0)], vec![0.36, 0.36], vec![1, 1]);
        let u = [c(x.0, x.1), c(x.2, x.3)];
        let s = chart.special(&u).unwrap();
        prop_assert_eq!(s.z[(0, 1)], s.z[(1, 0)]);
        prop_assert!(chart.metric_at(&u).is_ok());
    }
}
