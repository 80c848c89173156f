use k3limit::fibration::singular_fibers;
use k3limit::periods::{chart_for_fiber, isolation_radius_of};
use k3limit::volume::{density_from_periods, fit_density, fit_report_csv, fit_svg, VolumeSampleSet, MIN_RADIUS};
use k3limit::{SingularFiberRecord, WeierstrassFibration};
use rayon::prelude::*;
use serde_json::json;

use crate::output::{svg_with_seed, Csv};
use crate::{CliError, Context, Outcome, VolumeAction};

/// Starting radius and depth for one fiber: at most a quarter of the
/// isolation radius, and never below [`MIN_RADIUS`].
pub fn fit_window(rho0: f64, levels: usize, isolation: f64) -> (f64, usize) {
    let rho0 = rho0.min(0.25 * isolation);
    let depth = (rho0 / MIN_RADIUS).log2().floor().max(0.0) as usize;
    (rho0, levels.min(depth))
}

fn fit_fiber(ctx: &Context, w: &WeierstrassFibration, r: &SingularFiberRecord) -> k3limit::Result<VolumeSampleSet> {
    let cfg = &ctx.config.volume;
    let chart = chart_for_fiber(w, r)?;
    let center = r.chart_location();
    let (rho0, levels) = fit_window(cfg.rho0, cfg.levels, isolation_radius_of(&chart, center)?);
    fit_density(r.location, center, rho0, levels, cfg.angles, |y| {
        ctx.periods_at(&chart, y).map(|p| density_from_periods(&p))
    })
}

pub fn run(ctx: &Context, VolumeAction::Fit: VolumeAction) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.volume;
    let w = &ctx.fibration;
    let records = singular_fibers(w)?.records;
    let sets: Vec<VolumeSampleSet> = records
        .par_iter()
        .map(|r| fit_fiber(ctx, w, r))
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    let mut rows = Vec::with_capacity(records.len());
    let mut fits = Vec::with_capacity(records.len());
    for (i, (r, set)) in records.iter().zip(&sets).enumerate() {
        let fit = &set.fitted;
        let alpha_pred = *r.alpha_pred.numer() as f64 / *r.alpha_pred.denom() as f64;
        let at = format!("{} ({})", r.location, r.kodaira_type);
        out.check(fit.alpha_fit > cfg.alpha_floor, || {
            format!("{at}: alpha {} not above {}", fit.alpha_fit, cfg.alpha_floor)
        });
        out.check((fit.alpha_fit - alpha_pred).abs() <= cfg.alpha_tolerance, || {
            format!("{at}: alpha {} predicted {alpha_pred}", fit.alpha_fit)
        });
        out.check(fit.d_fit == r.d_pred, || format!("{at}: d {} predicted {}", fit.d_fit, r.d_pred));
        if cfg.svg {
            std::fs::write(ctx.path(&format!("fit_{i:02}.svg")), svg_with_seed(ctx.seed, &fit_svg(set)))?;
        }
        fits.push(json!({
            "location": r.location,
            "type": r.kodaira_type,
            "alpha_pred": alpha_pred,
            "d_pred": r.d_pred,
            "rho0": set.radii[0],
            "levels": set.radii.len() - 1,
            "fit": fit,
        }));
        rows.push((r.clone(), fit.clone()));
    }
    Csv::from_rendered(ctx.seed, &fit_report_csv(&rows)).write(&ctx.path("fits.csv"))?;
    let min_alpha = sets.iter().map(|s| s.fitted.alpha_fit).fold(f64::INFINITY, f64::min);
    out.results = json!({ "fibers": records.len(), "min_alpha": min_alpha, "fits": fits });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_respects_isolation_and_depth() {
        assert_eq!(fit_window(1e-2, 19, 1.0), (1e-2, 19));
        let (rho0, levels) = fit_window(1e-2, 19, 1e-3);
        assert_eq!(rho0, 2.5e-4);
        assert!(rho0 * 0.5f64.powi(levels as i32) >= MIN_RADIUS);
        assert!(rho0 * 0.5f64.powi(levels as i32 + 1) < MIN_RADIUS);
    }
}
