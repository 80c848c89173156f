use std::f64::consts::PI;

use k3limit::fibration::{singular_fibers, FiberLocation};
use k3limit::periods::lattice::lattice_periods;
use k3limit::periods::{
    default_loop_radius, monodromy, monodromy_report, quasi_unipotence, untwist_check, PeriodPoint,
};
use k3limit::{MonodromyMatrix, SingularFiberRecord, WeierstrassFibration};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::output::{f, re_im, Csv};
use crate::{CliError, Context, Outcome, PeriodsAction};

/// Reference curves with known lattice shape.
const REFERENCE_TOLERANCE: f64 = 1e-10;

pub fn run(ctx: &Context, action: PeriodsAction) -> Result<Outcome, CliError> {
    match action {
        PeriodsAction::Sample => sample(ctx),
        PeriodsAction::Monodromy => monodromy_table(ctx),
        PeriodsAction::Untwist => untwist(ctx),
    }
}

/// Points drawn uniformly from `|t| ≤ radius`, at least `clearance` from the discriminant.
pub fn regular_points(w: &WeierstrassFibration, count: usize, radius: f64, clearance: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = radius * rng.gen::<f64>().sqrt();
        let y = Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>());
        if w.distance_to_discriminant(y) >= clearance {
            out.push(y);
        }
    }
    out
}

fn reference_taus() -> k3limit::Result<Vec<(&'static str, Complex64, Complex64)>> {
    let mut out = Vec::new();
    for (name, a, b, expected) in [
        ("x^3 - x", -1.0, 0.0, Complex64::new(0.0, 1.0)),
        ("x^3 - 1", 0.0, -1.0, Complex64::from_polar(1.0, PI / 3.0)),
    ] {
        let l = lattice_periods(Complex64::new(a, 0.0), Complex64::new(b, 0.0))?;
        let tau = PeriodPoint::new(Complex64::new(0.0, 0.0), l.w1, l.w2, "direct").reduced().tau;
        out.push((name, tau, expected));
    }
    Ok(out)
}

fn sample(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.periods;
    let w = &ctx.fibration;
    let ys = regular_points(w, cfg.samples, cfg.sample_radius, cfg.clearance, ctx.seed);
    let points: Vec<PeriodPoint> = ys
        .par_iter()
        .map(|&y| ctx.periods_at(w, y))
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    let mut csv = Csv::new(
        ctx.seed,
        &["t_re", "t_im", "pi1_re", "pi1_im", "pi2_re", "pi2_im", "tau_re", "tau_im", "j_defect"],
    );
    let mut worst = (0.0f64, Complex64::new(0.0, 0.0));
    for p in &points {
        let defect = p.j_defect(w);
        if defect > worst.0 || defect.is_nan() {
            worst = (defect, p.y);
        }
        csv.row(
            [re_im(p.y), re_im(p.pi1), re_im(p.pi2), re_im(p.tau)]
                .concat()
                .into_iter()
                .chain([f(defect)]),
        );
    }
    csv.write(&ctx.path("periods.csv"))?;
    out.check(worst.0 < cfg.j_tolerance, || {
        format!("j defect {:e} at t = {} exceeds {:e}", worst.0, worst.1, cfg.j_tolerance)
    });
    let mut references = Vec::new();
    for (name, tau, expected) in reference_taus()? {
        let err = (tau - expected).norm();
        out.check(err < REFERENCE_TOLERANCE, || format!("tau of {name} is {tau}, expected {expected}"));
        references.push(json!({ "curve": name, "tau": tau, "expected": expected, "error": err }));
    }
    out.results = json!({
        "samples": points.len(),
        "sample_radius": cfg.sample_radius,
        "max_j_defect": worst.0,
        "worst_point": worst.1,
        "references": references,
    });
    Ok(out)
}

fn location(r: &SingularFiberRecord) -> String {
    r.location.to_string()
}

fn monodromy_table(ctx: &Context) -> Result<Outcome, CliError> {
    let w = &ctx.fibration;
    let tol = ctx.config.periods.monodromy_tolerance;
    let mut records = singular_fibers(w)?.records;
    let entries: Vec<_> = records
        .par_iter_mut()
        .map(|r| monodromy_report(w, std::slice::from_mut(r)).map(|mut e| e.remove(0)))
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    let mut csv = Csv::new(
        ctx.seed,
        &["fiber_location", "type", "t11", "t12", "t21", "t22", "trace", "order", "residual", "beta", "d"],
    );
    for (r, e) in records.iter().zip(&entries) {
        let t = MonodromyMatrix::exact(e.t);
        let kind = r.kodaira_type;
        let order = t.order(12);
        let at = location(r);
        out.check(t.det() == 1, || format!("{at} ({kind}): det T = {}", t.det()));
        out.check(e.residual < tol, || format!("{at} ({kind}): integer residual {:e}", e.residual));
        out.check(t.trace() == kind.monodromy_trace(), || {
            format!("{at} ({kind}): trace {} expected {}", t.trace(), kind.monodromy_trace())
        });
        out.check(order == kind.monodromy_order(), || {
            format!("{at} ({kind}): order {order:?} expected {:?}", kind.monodromy_order())
        });
        out.check(e.beta <= 6 && e.d <= 2, || format!("{at} ({kind}): beta {} d {}", e.beta, e.d));
        // (T^β - I)^d = 0 with d = 2 exactly when T^β is a nontrivial unipotent
        let d_expected = if kind.unipotent_index() > 0 { 2 } else { 1 };
        out.check(e.d == d_expected, || format!("{at} ({kind}): nilpotency {} expected {d_expected}", e.d));
        csv.row([
            at.clone(),
            kind.to_string(),
            e.t[0][0].to_string(),
            e.t[0][1].to_string(),
            e.t[1][0].to_string(),
            e.t[1][1].to_string(),
            t.trace().to_string(),
            order.map_or("inf".to_string(), |o| o.to_string()),
            f(e.residual),
            e.beta.to_string(),
            e.d.to_string(),
        ]);
    }
    csv.write(&ctx.path("monodromy.csv"))?;
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    out.results = json!({ "fibers": entries.len(), "max_residual": max_residual, "entries": entries });
    Ok(out)
}

struct UntwistRow {
    location: FiberLocation,
    kind: String,
    beta: u32,
    rho: f64,
    defect: f64,
}

fn untwist_fiber(w: &WeierstrassFibration, r: &SingularFiberRecord, radii: &[f64]) -> k3limit::Result<Vec<UntwistRow>> {
    let t = monodromy(w, r, default_loop_radius(w, r)?)?;
    let beta = quasi_unipotence(&t)?.beta;
    radii
        .iter()
        .map(|&rho| {
            let ws = Complex64::from_polar(rho.powf(1.0 / beta as f64), 0.3);
            Ok(UntwistRow {
                location: r.location,
                kind: r.kodaira_type.to_string(),
                beta,
                rho,
                defect: untwist_check(w, r, ws)?,
            })
        })
        .collect()
}

fn untwist(ctx: &Context) -> Result<Outcome, CliError> {
    let w = &ctx.fibration;
    let cfg = &ctx.config.periods;
    let records = singular_fibers(w)?.records;
    let rows: Vec<Vec<UntwistRow>> = records
        .par_iter()
        .map(|r| untwist_fiber(w, r, &cfg.untwist_radii))
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    let mut csv = Csv::new(ctx.seed, &["fiber_location", "type", "beta", "rho", "defect"]);
    let mut max_defect = 0.0f64;
    for row in rows.iter().flatten() {
        max_defect = max_defect.max(row.defect);
        out.check(row.defect < cfg.untwist_tolerance, || {
            format!("{} ({}): defect {:e} at rho {:e}", row.location, row.kind, row.defect, row.rho)
        });
        csv.row([
            row.location.to_string(),
            row.kind.clone(),
            row.beta.to_string(),
            f(row.rho),
            f(row.defect),
        ]);
    }
    csv.write(&ctx.path("untwist.csv"))?;
    out.results = json!({
        "fibers": records.len(),
        "radii": cfg.untwist_radii,
        "max_defect": max_defect,
    });
    Ok(out)
}
