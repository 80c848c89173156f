use k3limit::semiflat::{
    complex_structure, default_ts, frame_at, quaternionic_defect, random_samples, scaling_limit, volume_ratio,
    SemiFlatSample,
};
use k3limit::special_kahler::SpecialKahlerChart;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::sk::fibration_chart;
use crate::output::{f, Csv};
use crate::{CliError, Context, Outcome, SemiflatAction};

pub fn run(ctx: &Context, action: SemiflatAction) -> Result<Outcome, CliError> {
    match action {
        SemiflatAction::Check => check(ctx),
        SemiflatAction::Scaling => scaling(ctx),
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
struct Defects {
    block: f64,
    square: f64,
    orthogonality: f64,
    quaternion: f64,
    volume: f64,
}

impl Defects {
    fn max(self, o: Defects) -> Defects {
        Defects {
            block: self.block.max(o.block),
            square: self.square.max(o.square),
            orthogonality: self.orthogonality.max(o.orthogonality),
            quaternion: self.quaternion.max(o.quaternion),
            volume: self.volume.max(o.volume),
        }
    }
}

fn defects(chart: &SpecialKahlerChart, s: &SemiFlatSample) -> k3limit::Result<Defects> {
    let frame = frame_at(chart, &s.u, &s.z)?;
    let j = complex_structure(&frame)?;
    Ok(Defects {
        block: j.block_defect,
        square: j.square_defect,
        orthogonality: j.orthogonality_defect,
        quaternion: quaternionic_defect(&frame)?,
        volume: (volume_ratio(&frame) - 1.0).norm(),
    })
}

fn check(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.semiflat;
    let charts = [
        ("fibration", fibration_chart(&ctx.fibration, cfg.fibration_center, cfg.radius_fraction)?),
        ("series", cfg.series.chart()?),
    ];
    let mut out = Outcome::default();
    let mut csv = Csv::new(
        ctx.seed,
        &["chart", "sample", "block", "square", "orthogonality", "quaternion", "volume"],
    );
    let mut results = Vec::new();
    for (i, (name, chart)) in charts.iter().enumerate() {
        let samples = random_samples(chart, cfg.samples, cfg.shrink, ctx.seed.wrapping_add(i as u64))?;
        let rows: Vec<Defects> = samples
            .par_iter()
            .map(|s| defects(chart, s))
            .collect::<k3limit::Result<_>>()?;
        for (k, d) in rows.iter().enumerate() {
            csv.row([
                name.to_string(),
                k.to_string(),
                f(d.block),
                f(d.square),
                f(d.orthogonality),
                f(d.quaternion),
                f(d.volume),
            ]);
        }
        let worst = rows.iter().fold(Defects::default(), |a, &b| a.max(b));
        let nan = rows.iter().any(|d| [d.block, d.square, d.quaternion, d.volume].iter().any(|x| x.is_nan()));
        out.check(!nan, || format!("{name}: undefined defect"));
        out.check(worst.block < cfg.block_tolerance, || format!("{name}: J block defect {:e}", worst.block));
        out.check(worst.square < cfg.square_tolerance, || format!("{name}: J^2 + 1 defect {:e}", worst.square));
        out.check(worst.quaternion < cfg.quaternion_tolerance, || {
            format!("{name}: quaternionic defect {:e}", worst.quaternion)
        });
        out.check(worst.volume < cfg.volume_tolerance, || format!("{name}: volume ratio defect {:e}", worst.volume));
        results.push(json!({ "chart": name, "dim": chart.dim(), "samples": rows.len(), "max": worst }));
    }
    csv.write(&ctx.path("semiflat_samples.csv"))?;
    out.results = json!({ "charts": results });
    Ok(out)
}

fn scaling(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.semiflat;
    let chart = cfg.series.chart()?;
    let grid = chart.sample_grid(cfg.scaling_grid, 0.9);
    let ts = default_ts(cfg.scaling_steps);
    let r = scaling_limit(&chart, &cfg.section, &ts, &grid)?;
    let mut out = Outcome::default();
    match r.slope {
        Some(s) => out.check((s - cfg.expected_slope).abs() <= cfg.slope_tolerance, || {
            format!("slope {s} expected {} ± {}", cfg.expected_slope, cfg.slope_tolerance)
        }),
        None => out.failures.push("deviation vanishes; no slope to fit".into()),
    }
    let mut csv = Csv::new(ctx.seed, &["t", "deviation"]);
    for (t, d) in r.ts.iter().zip(&r.deviations) {
        csv.row([f(*t), f(*d)]);
    }
    csv.write(&ctx.path("scaling.csv"))?;
    out.results = json!({ "section": cfg.section, "grid_points": grid.len(), "report": r });
    Ok(out)
}
