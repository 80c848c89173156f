use k3limit::metric::{ChartPoint, Density, DensityKind, LimitMetric, Site};
use k3limit::special_kahler::base_density;
use rayon::prelude::*;
use serde_json::json;

use crate::output::{f, re_im, Csv};
use crate::{CliError, Context, MetricAction, Outcome};

pub fn run(ctx: &Context, action: MetricAction) -> Result<Outcome, CliError> {
    let density = Density::fibration(&ctx.fibration)?;
    let metric = LimitMetric::build(density, ctx.config.metric.mesh)?;
    match action {
        MetricAction::Build => build(ctx, &metric),
        MetricAction::Distance => distance(ctx, &metric),
        MetricAction::Diameter => diameter(ctx, &metric),
        MetricAction::Completion => completion(ctx, &metric),
        MetricAction::Bound => bound(ctx, &metric),
    }
}

/// `Im τ |π1|²` in the coordinates of chart `p.chart` of a sphere density.
pub fn special_kahler_density(density: &Density, p: ChartPoint) -> k3limit::Result<f64> {
    let DensityKind::Fibration { w, w_inf, scale } = density.kind() else {
        return Err(k3limit::Error::InvalidInput("not a fibration density".into()));
    };
    match p.chart {
        0 => Ok(scale * scale * base_density(w, p.z * *scale)?),
        _ => Ok(base_density(w_inf, p.z / *scale)? / (scale * scale)),
    }
}

fn build(ctx: &Context, m: &LimitMetric) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.metric;
    let mut out = Outcome::default();
    let change = m.area_relative_change();
    out.check(change < cfg.area_tolerance, || {
        format!("area changed by {change:e} over the last refinement")
    });
    let prop = m.proportionality(cfg.proportionality_samples, |p| special_kahler_density(m.density(), p))?;
    out.check(prop.relative_std < cfg.proportionality_tolerance, || {
        format!("density ratio has relative std {:e}", prop.relative_std)
    });
    let mut csv = Csv::new(ctx.seed, &["level", "vertices", "edges", "area"]);
    for (level, (g, a)) in m.graphs().iter().zip(m.areas()).enumerate() {
        csv.row([level.to_string(), g.vertex_count().to_string(), g.edge_count().to_string(), f(*a)]);
    }
    csv.write(&ctx.path("mesh_levels.csv"))?;
    out.results = json!({
        "mesh": m.params(),
        "c": m.c(),
        "scale": m.scale(),
        "areas": m.areas(),
        "area_relative_change": change,
        "punctures": m.density().punctures(),
        "finest_vertices": m.finest().vertex_count(),
        "proportionality": prop,
    });
    Ok(out)
}

fn distance(ctx: &Context, m: &LimitMetric) -> Result<Outcome, CliError> {
    let points = &ctx.config.metric.points;
    let sites: Vec<Site> = points
        .iter()
        .map(|&t| m.density().base_point(t).map(Site::Point))
        .collect::<k3limit::Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..sites.len())
        .flat_map(|i| (i + 1..sites.len()).map(move |j| (i, j)))
        .collect();
    let estimates: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| m.distance(&sites[i], &sites[j]))
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    let mut csv = Csv::new(
        ctx.seed,
        &["i", "j", "ti_re", "ti_im", "tj_re", "tj_im", "distance", "graph", "gap"],
    );
    let mut rows = Vec::new();
    for (&(i, j), e) in pairs.iter().zip(&estimates) {
        out.check(e.value.is_finite() && e.value > 0.0 && e.value <= e.graph * (1.0 + 1e-12), || {
            format!("distance {i}-{j}: {} against graph {}", e.value, e.graph)
        });
        csv.row(
            [i.to_string(), j.to_string()]
                .into_iter()
                .chain(re_im(points[i]))
                .chain(re_im(points[j]))
                .chain([f(e.value), f(e.graph), f(e.gap)]),
        );
        rows.push(json!({ "i": i, "j": j, "distance": e.value, "graph": e.graph, "gap": e.gap }));
    }
    csv.write(&ctx.path("distances.csv"))?;
    out.results = json!({ "points": points, "distances": rows });
    Ok(out)
}

fn diameter(ctx: &Context, m: &LimitMetric) -> Result<Outcome, CliError> {
    let tol = ctx.config.metric.diameter_tolerance;
    let d = m.diameter()?;
    let mut out = Outcome::default();
    out.check(d.relative_change < tol, || {
        format!("diameter changed by {:e} over the last refinement", d.relative_change)
    });
    let mut csv = Csv::new(ctx.seed, &["level", "diameter", "graph_diameter"]);
    for (level, (a, b)) in d.by_level.iter().zip(&d.graph_by_level).enumerate() {
        csv.row([level.to_string(), f(*a), f(*b)]);
    }
    csv.write(&ctx.path("diameter.csv"))?;
    out.results = serde_json::to_value(&d).map_err(k3limit::Error::from)?;
    Ok(out)
}

fn completion(ctx: &Context, m: &LimitMetric) -> Result<Outcome, CliError> {
    let cfg = &ctx.config.metric;
    let summary = m.completion_summary()?;
    let q = Site::Point(m.density().base_point(cfg.base_point)?);
    let reports: Vec<_> = (0..m.zones().len())
        .into_par_iter()
        .map(|k| m.distance_to_singular(&q, k))
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    out.check(summary.finite, || "some completion distance is not finite".into());
    out.check(summary.distinct, || {
        format!("completion points may coincide: {:?}", summary.merge_candidates)
    });
    out.check(summary.min_gap_ratio > cfg.gap_factor, || {
        format!("smallest distance/gap ratio {} is below {}", summary.min_gap_ratio, cfg.gap_factor)
    });
    let mut table = Csv::new(ctx.seed, &["puncture", "label", "limit", "smoothed", "last_increment", "last_spread", "cauchy", "angle_independent"]);
    for r in &reports {
        let label = &summary.labels[r.puncture];
        out.check(r.cauchy, || format!("distance to {label} is not Cauchy"));
        out.check(r.angle_independent, || format!("distance to {label} depends on the angle"));
        table.row([
            r.puncture.to_string(),
            label.clone(),
            f(r.limit),
            f(r.smoothed),
            f(r.increments.last().copied().unwrap_or(f64::NAN)),
            f(r.spreads.last().copied().unwrap_or(f64::NAN)),
            r.cauchy.to_string(),
            r.angle_independent.to_string(),
        ]);
    }
    table.write(&ctx.path("singular_distances.csv"))?;
    let mut header = vec!["label".to_string()];
    header.extend(summary.labels.iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut matrix = Csv::new(ctx.seed, &header);
    for (label, row) in summary.labels.iter().zip(&summary.distances) {
        matrix.row(std::iter::once(label.clone()).chain(row.iter().map(|x| f(*x))));
    }
    matrix.write(&ctx.path("completion_distances.csv"))?;
    out.results = json!({
        "base_point": cfg.base_point,
        "labels": summary.labels,
        "min_distance": summary.min_distance,
        "min_gap_ratio": summary.min_gap_ratio,
        "distinct": summary.distinct,
        "finite": summary.finite,
        "diameter": summary.diameter.value,
        "distances_to_singular": reports,
    });
    Ok(out)
}

fn bound(ctx: &Context, m: &LimitMetric) -> Result<Outcome, CliError> {
    let levels = ctx.config.metric.bound_levels;
    let punctures = m.density().punctures().to_vec();
    let reports: Vec<_> = (0..m.zones().len())
        .into_par_iter()
        .map(|k| {
            let p = &punctures[m.zones()[k].puncture];
            m.verify_length_bound(k, p.alpha, p.d, levels)
        })
        .collect::<k3limit::Result<_>>()?;
    let mut out = Outcome::default();
    let mut csv = Csv::new(ctx.seed, &["puncture", "label", "alpha", "d", "radius", "ratio"]);
    for r in &reports {
        let label = &punctures[m.zones()[r.puncture].puncture].label;
        out.check(r.pass, || format!("length ratio grows at {label}: {:?}", r.ratios));
        for (rho, ratio) in r.radii.iter().zip(&r.ratios) {
            csv.row([r.puncture.to_string(), label.clone(), f(r.alpha), r.d.to_string(), f(*rho), f(*ratio)]);
        }
    }
    csv.write(&ctx.path("length_bound.csv"))?;
    out.results = json!({ "levels": levels, "reports": reports });
    Ok(out)
}
