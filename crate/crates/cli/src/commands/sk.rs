use k3limit::fibration::singular_fibers;
use k3limit::special_kahler::{
    darboux_differential_check, hessian_structure_check, loop_transition_check, monge_ampere_check, transition,
    AffineTransition, FibrationPrepotential, SpecialKahlerChart,
};
use k3limit::WeierstrassFibration;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::SeriesSpec;
use crate::output::{f, Csv};
use crate::{CliError, Context, Outcome, SkAction};

/// Step of the finite-difference Darboux check.
const DARBOUX_STEP: f64 = 1e-6;
const COCYCLE_TOLERANCE: f64 = 1e-6;

pub fn run(ctx: &Context, action: SkAction) -> Result<Outcome, CliError> {
    match action {
        SkAction::Check => check(ctx),
        SkAction::Transitions => transitions(ctx),
    }
}

/// The chart of the fibration's periods on a disc of `fraction` times the
/// distance from `center` to the discriminant.
pub fn fibration_chart(w: &WeierstrassFibration, center: Complex64, fraction: f64) -> k3limit::Result<SpecialKahlerChart> {
    let radius = fraction * w.distance_to_discriminant(center);
    SpecialKahlerChart::fibration(FibrationPrepotential::new(w, center, radius, None)?)
}

fn check(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.sk;
    let charts = [
        ("linear", cfg.linear.chart()?),
        ("fibration", fibration_chart(&ctx.fibration, cfg.fibration_center, cfg.radius_fraction)?),
        ("series", cfg.series.chart()?),
    ];
    let mut out = Outcome::default();
    let mut csv = Csv::new(
        ctx.seed,
        &["chart", "dim", "points", "hessian_defect", "mean_det", "expected_det", "det_spread", "darboux_defect"],
    );
    let mut results = Vec::new();
    for (name, chart) in &charts {
        let grid = chart.sample_grid(cfg.grid, cfg.shrink);
        let h = hessian_structure_check(chart, &grid)?;
        let ma = monge_ampere_check(chart, &grid)?;
        let dx = darboux_differential_check(chart, &grid, DARBOUX_STEP)?;
        out.check(h.max_defect_extrapolated < cfg.hessian_tolerance, || {
            format!("{name}: Hessian defect {:e}", h.max_defect_extrapolated)
        });
        out.check(h.excluded.is_empty(), || format!("{name}: {} grid points excluded", h.excluded.len()));
        out.check(ma.relative_spread < cfg.monge_ampere_tolerance, || {
            format!("{name}: det spread {:e}", ma.relative_spread)
        });
        out.check((ma.mean_det - ma.expected).abs() < cfg.monge_ampere_tolerance * ma.expected, || {
            format!("{name}: mean det {} expected {}", ma.mean_det, ma.expected)
        });
        csv.row([
            name.to_string(),
            chart.dim().to_string(),
            grid.len().to_string(),
            f(h.max_defect_extrapolated),
            f(ma.mean_det),
            f(ma.expected),
            f(ma.relative_spread),
            f(dx.max_defect),
        ]);
        results.push(json!({ "chart": name, "hessian": h, "monge_ampere": ma, "darboux": dx }));
    }
    csv.write(&ctx.path("sk_check.csv"))?;
    out.results = json!({ "grid": cfg.grid, "shrink": cfg.shrink, "charts": results });
    Ok(out)
}

fn transition_row(csv: &mut Csv, kind: &str, label: &str, t: &AffineTransition, matches: Option<bool>) {
    let p: Vec<String> = t.p.iter().map(|row| row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).collect();
    csv.row([
        kind.to_string(),
        label.to_string(),
        p.join(";"),
        f(t.residual),
        f(t.integrality_residual),
        f(t.symplectic_residual),
        matches.map_or(String::new(), |m| m.to_string()),
    ]);
}

fn rebased(spec: &SeriesSpec, center: &[Complex64]) -> k3limit::Result<SpecialKahlerChart> {
    SeriesSpec {
        center: center.to_vec(),
        ..spec.clone()
    }
    .chart()
}

fn transitions(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.sk;
    let tol = cfg.transition_tolerance;
    let mut out = Outcome::default();
    let mut csv = Csv::new(
        ctx.seed,
        &["kind", "label", "P", "residual", "integrality_residual", "symplectic_residual", "matches_monodromy"],
    );

    // a chain A → B → C of rebased series charts
    let base = cfg.series.chart()?;
    let mut chain = vec![base];
    for c in &cfg.rebased_centers {
        chain.push(rebased(&cfg.series, c)?);
    }
    let overlap: Vec<Vec<Complex64>> = chain[0]
        .sample_grid(2, 0.3)
        .into_iter()
        .filter(|u| chain.iter().all(|ch| ch.contains(u)))
        .collect();
    let mut series = Vec::new();
    if chain.len() > 1 {
        out.check(overlap.len() > 2 * chain[0].dim(), || {
            format!("rebased charts share only {} grid points", overlap.len())
        });
        let steps: Vec<AffineTransition> = chain
            .windows(2)
            .map(|w| transition(&w[0], &w[1], &overlap))
            .collect::<k3limit::Result<_>>()?;
        let direct = transition(&chain[0], &chain[chain.len() - 1], &overlap)?;
        for (i, t) in steps.iter().enumerate() {
            out.check(t.residual < tol, || format!("rebased transition {i}: residual {:e}", t.residual));
            transition_row(&mut csv, "rebased", &format!("{i}->{}", i + 1), t, None);
        }
        let composed = steps[1..].iter().fold(steps[0].clone(), |acc, t| acc.compose(t));
        let shift = composed
            .b
            .iter()
            .zip(&direct.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.check(composed.p == direct.p && shift < COCYCLE_TOLERANCE, || {
            format!("rebased transitions do not compose: shift {shift:e}")
        });
        transition_row(&mut csv, "rebased", &format!("0->{}", chain.len() - 1), &direct, None);
        series = steps;
        series.push(direct);
    }

    let w = &ctx.fibration;
    let records = singular_fibers(w)?.records;
    let loops: Vec<_> = records
        .par_iter()
        .map(|r| loop_transition_check(w, r))
        .collect::<k3limit::Result<_>>()?;
    for (r, l) in records.iter().zip(&loops) {
        let label = format!("{} ({})", r.location, r.kodaira_type);
        out.check(l.matches, || {
            format!("{label}: transition {:?} against monodromy {:?}", l.transition.p, l.period_monodromy)
        });
        out.check(l.transition.residual < tol, || format!("{label}: residual {:e}", l.transition.residual));
        transition_row(&mut csv, "loop", &label, &l.transition, Some(l.matches));
    }
    csv.write(&ctx.path("transitions.csv"))?;
    out.results = json!({
        "overlap_points": overlap.len(),
        "rebased": series,
        "loops": loops,
    });
    Ok(out)
}
