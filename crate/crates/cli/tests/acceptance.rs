//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use k3limit::fibration::models::{default_generic_k3, engineered};
use k3limit::fibration::{singular_fibers, FiberLocation};
use k3limit::metric::{Density, LimitMetric, MeshParams, Site};
use k3limit::periods::lattice::lattice_periods;
use k3limit::periods::{
    chart_for_fiber, default_loop_radius, fiber_periods, isolation_radius_of, monodromy, quasi_unipotence,
    untwist_check, PeriodPoint,
};
use k3limit::semiflat::{
    complex_structure, default_ts, frame_at, random_samples, scaling_limit, volume_ratio,
};
use k3limit::special_kahler::{
    hessian_structure_check, loop_transition_check, monge_ampere_check, transition, SpecialKahlerChart,
};
use k3limit::volume::{fit_asymptotics, fit_density, fiber_volume};
use k3limit::{Kodaira, SingularFiberRecord, WeierstrassFibration};
use k3limit::io::fmt_f64;
use k3limit_cli::commands::metric::special_kahler_density;
use k3limit_cli::commands::periods::regular_points;
use k3limit_cli::commands::sk::fibration_chart;
use k3limit_cli::commands::volume::fit_window;
use k3limit_cli::config::{SemiflatConfig, SkConfig};
use num_complex::Complex64;

type Verdict = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn fiber_at_zero(w: &WeierstrassFibration) -> SingularFiberRecord {
    singular_fibers(w)
        .expect("scan")
        .records
        .into_iter()
        .find(|r| matches!(r.location, FiberLocation::Finite(z) if z.norm() < 1e-12))
        .expect("fiber at 0")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn numeric<T>(r: k3limit::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn periods_correct() -> Verdict {
    let start = Instant::now();
    for (a, b, expected) in [(-1.0, 0.0, c(0.0, 1.0)), (0.0, -1.0, Complex64::from_polar(1.0, PI / 3.0))] {
        let l = numeric(lattice_periods(c(a, 0.0), c(b, 0.0)))?;
        let tau = PeriodPoint::new(c(0.0, 0.0), l.w1, l.w2, "").reduced().tau;
        ensure((tau - expected).norm() < 1e-10, || format!("tau(a={a}, b={b}) = {tau}"))?;
    }
    let w = default_generic_k3();
    let mut worst = 0.0f64;
    for y in regular_points(&w, 1000, 2.0, 1e-3, 1) {
        let d = numeric(fiber_periods(&w, y))?.j_defect(&w);
        ensure(d < 1e-8, || format!("j defect {d:e} at {y}"))?;
        worst = worst.max(d);
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {}", secs(t)))?;
    Ok(format!("max j defect {worst:.1e} over 1000 fibers, {}", secs(t)))
}

fn monodromy_signatures() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for kind in Kodaira::table() {
        let w = engineered(kind);
        let f = fiber_at_zero(&w);
        let t = numeric(monodromy(&w, &f, numeric(default_loop_radius(&w, &f))?))?;
        let q = numeric(quasi_unipotence(&t))?;
        worst = worst.max(t.residual);
        let d_expected = if kind.unipotent_index() > 0 { 2 } else { 1 };
        ensure(
            t.det() == 1
                && t.residual < 1e-6
                && t.trace() == kind.monodromy_trace()
                && t.order(12) == kind.monodromy_order()
                && q.beta <= 6
                && q.d == d_expected,
            || format!("{kind}: T = {:?}, residual {:e}, beta {}, d {}", t.entries, t.residual, q.beta, q.d),
        )?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), || format!("took {}", secs(t)))?;
    Ok(format!("nine types, max residual {worst:.1e}, {}", secs(t)))
}

fn untwisting() -> Verdict {
    let mut worst = 0.0f64;
    for kind in [Kodaira::I(1), Kodaira::II] {
        let w = engineered(kind);
        let f = fiber_at_zero(&w);
        let beta = numeric(quasi_unipotence(&numeric(monodromy(&w, &f, 0.1))?))?.beta;
        for rho in [0.1, 0.01, 0.001] {
            let ws = Complex64::from_polar(f64::powf(rho, 1.0 / beta as f64), 0.3);
            let d = numeric(untwist_check(&w, &f, ws))?;
            ensure(d < 1e-7, || format!("{kind} (beta {beta}) at rho {rho}: {d:e}"))?;
            worst = worst.max(d);
        }
    }
    Ok(format!("I1 and II at three radii, max defect {worst:.1e}"))
}

fn volume_exponents() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for kind in Kodaira::table() {
        let w = engineered(kind);
        let f = fiber_at_zero(&w);
        let fit = numeric(fit_asymptotics(&w, &f, 1e-2, 19))?.fitted;
        let alpha_pred = *f.alpha_pred.numer() as f64 / *f.alpha_pred.denom() as f64;
        let err = (fit.alpha_fit - alpha_pred).abs();
        ensure(err <= 0.05 && fit.d_fit == f.d_pred, || {
            format!("{kind}: alpha {} d {} against ({alpha_pred}, {})", fit.alpha_fit, fit.d_fit, f.d_pred)
        })?;
        worst = worst.max(err);
    }
    let w = default_generic_k3();
    let mut min_alpha = f64::INFINITY;
    for r in numeric(singular_fibers(&w))?.records {
        let chart = numeric(chart_for_fiber(&w, &r))?;
        let center = r.chart_location();
        let (rho0, levels) = fit_window(1e-2, 19, numeric(isolation_radius_of(&chart, center))?);
        let set = numeric(fit_density(r.location, center, rho0, levels, 16, |y| fiber_volume(&chart, y)))?;
        min_alpha = min_alpha.min(set.fitted.alpha_fit);
    }
    ensure(min_alpha > -1.99, || format!("generic K3 alpha {min_alpha}"))?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(300), || format!("took {}", secs(t)))?;
    Ok(format!(
        "table max |alpha - alpha_pred| {worst:.1e}; generic K3 min alpha {min_alpha:.4}; {}",
        secs(t)
    ))
}

fn completion(m: &LimitMetric, build: Duration) -> Verdict {
    let start = Instant::now();
    let d = numeric(m.diameter())?;
    ensure(d.relative_change < 0.02, || format!("diameter change {:e}", d.relative_change))?;
    let s = numeric(m.completion_summary())?;
    ensure(s.distinct && s.finite && s.labels.len() == 24, || {
        format!("{} points, distinct {}, finite {}", s.labels.len(), s.distinct, s.finite)
    })?;
    ensure(s.min_gap_ratio > 10.0, || format!("distance/gap ratio {}", s.min_gap_ratio))?;
    let q = Site::Point(numeric(m.density().base_point(c(0.3, -0.2)))?);
    let mut spread = 0.0f64;
    for k in 0..m.zones().len() {
        let r = numeric(m.distance_to_singular(&q, k))?;
        ensure(r.cauchy && r.angle_independent, || format!("puncture {k}: {r:?}"))?;
        spread = spread.max(*r.spreads.last().expect("rings"));
    }
    let t = build + start.elapsed();
    ensure(t < Duration::from_secs(600), || format!("took {}", secs(t)))?;
    Ok(format!(
        "diameter {:.6} (change {:.1e}), min distance/gap {:.1}, last angle spread {spread:.1e}, {} vertices, {}",
        d.value,
        d.relative_change,
        s.min_gap_ratio,
        m.finest().vertex_count(),
        secs(t)
    ))
}

fn length_bound() -> Verdict {
    let params = MeshParams {
        h0: 0.1,
        levels: 1,
        ..MeshParams::default()
    };
    let mut kinds = Vec::new();
    for kind in Kodaira::table() {
        let w = engineered(kind);
        let d = numeric(Density::fibration_disc(&w, c(0.0, 0.0), 1.0))?;
        let m = numeric(LimitMetric::build(d, params))?;
        let k = m.zones().iter().position(|z| z.center.norm() < 1e-12).ok_or("no zone at 0")?;
        let (alpha, dp) = k3limit::volume::predicted_exponents(kind);
        let alpha = *alpha.numer() as f64 / *alpha.denom() as f64;
        let r = numeric(m.verify_length_bound(k, alpha, dp, 12))?;
        ensure(r.pass, || format!("{kind}: ratios {:?}", r.ratios))?;
        kinds.push(kind.to_string());
    }
    Ok(format!("bounded over the last 6 radii for {}", kinds.join(" ")))
}

fn special_kahler() -> Verdict {
    let cfg = SkConfig::default();
    let w = default_generic_k3();
    let charts: Vec<(&str, SpecialKahlerChart)> = vec![
        ("Z = y", numeric(cfg.linear.chart())?),
        ("fibration", numeric(fibration_chart(&w, c(0.3, -0.2), 0.2))?),
        ("n = 2 series", numeric(cfg.series.chart())?),
    ];
    let (mut spread, mut hess) = (0.0f64, 0.0f64);
    for (name, chart) in &charts {
        let grid = chart.sample_grid(3, 0.9);
        let ma = numeric(monge_ampere_check(chart, &grid))?;
        let h = numeric(hessian_structure_check(chart, &grid))?;
        ensure(ma.relative_spread < 1e-4 && h.max_defect_extrapolated < 1e-5 && h.excluded.is_empty(), || {
            format!("{name}: det spread {:e}, Hessian defect {:e}", ma.relative_spread, h.max_defect_extrapolated)
        })?;
        spread = spread.max(ma.relative_spread);
        hess = hess.max(h.max_defect_extrapolated);
    }
    let series = &charts[2].1;
    let other = numeric(
        k3limit_cli::config::SeriesSpec {
            center: cfg.rebased_centers[0].clone(),
            ..cfg.series.clone()
        }
        .chart(),
    )?;
    let overlap: Vec<Vec<Complex64>> =
        series.sample_grid(2, 0.3).into_iter().filter(|u| other.contains(u)).collect();
    let tr = numeric(transition(series, &other, &overlap))?;
    ensure(tr.residual < 1e-6, || format!("rebased transition residual {:e}", tr.residual))?;
    let mut residual = tr.residual;
    let records = numeric(singular_fibers(&w))?.records;
    for r in &records {
        let l = numeric(loop_transition_check(&w, r))?;
        ensure(l.matches && l.transition.residual < 1e-6, || {
            format!("{}: {:?} vs {:?}", r.location, l.transition.p, l.period_monodromy)
        })?;
        residual = residual.max(l.transition.residual);
    }
    Ok(format!(
        "det spread {spread:.1e}, Hessian defect {hess:.1e}, transition residual {residual:.1e}, {} loops match",
        records.len()
    ))
}

fn proportional_densities(m: &LimitMetric) -> Verdict {
    let r = numeric(m.proportionality(10_000, |p| special_kahler_density(m.density(), p)))?;
    ensure(r.samples >= 9_000, || format!("only {} samples", r.samples))?;
    ensure(r.relative_std < 1e-6, || format!("relative std {:e}", r.relative_std))?;
    Ok(format!("relative std {:.1e} over {} points, mean ratio {:.6e}", r.relative_std, r.samples, r.mean_ratio))
}

fn semiflat() -> Verdict {
    let cfg = SemiflatConfig::default();
    let w = default_generic_k3();
    let charts = [
        numeric(fibration_chart(&w, c(0.3, -0.2), 0.2))?,
        numeric(cfg.series.chart())?,
    ];
    let (mut block, mut square, mut volume) = (0.0f64, 0.0f64, 0.0f64);
    for (i, chart) in charts.iter().enumerate() {
        for s in numeric(random_samples(chart, 1000, 0.95, 100 + i as u64))? {
            let frame = numeric(frame_at(chart, &s.u, &s.z))?;
            let j = numeric(complex_structure(&frame))?;
            block = block.max(j.block_defect);
            square = square.max(j.square_defect);
            volume = volume.max((volume_ratio(&frame) - 1.0).norm());
        }
    }
    ensure(block < 1e-10 && square < 1e-12 && volume < 1e-8, || {
        format!("block {block:e}, square {square:e}, volume {volume:e}")
    })?;
    let chart = &charts[1];
    let r = numeric(scaling_limit(chart, &cfg.section, &default_ts(10), &chart.sample_grid(2, 0.9)))?;
    let slope = r.slope.ok_or("no slope")?;
    ensure((slope - 0.5).abs() <= 0.02, || format!("slope {slope}"))?;
    Ok(format!(
        "block {block:.1e}, J^2 {square:.1e}, volume {volume:.1e} on 2x1000 samples; slope {slope:.4}"
    ))
}

fn cli(args: &[&str], out: &Path) -> i32 {
    let mut full = vec!["k3limit", "--out", out.to_str().expect("utf-8 path")];
    full.extend_from_slice(args);
    k3limit_cli::run(full)
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Largest difference between numeric cells of two CSV tables with the same layout.
fn csv_difference(a: &str, b: &str) -> Result<f64, String> {
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    ensure(la.len() == lb.len(), || "tables differ in length".into())?;
    let mut worst = 0.0f64;
    for (x, y) in la.iter().zip(&lb) {
        for (u, v) in x.split(',').zip(y.split(',')) {
            match (u.parse::<f64>(), v.parse::<f64>()) {
                (Ok(p), Ok(q)) => worst = worst.max((p - q).abs() / q.abs().max(1.0)),
                _ => ensure(u == v, || format!("cells {u} and {v} differ"))?,
            }
        }
    }
    Ok(worst)
}

fn determinism() -> Verdict {
    let dirs: Vec<tempfile::TempDir> = (0..4).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    let config = dirs[0].path().join("job.json");
    fs::write(&config, r#"{"periods": {"samples": 300}, "semiflat": {"samples": 200}}"#).map_err(|e| e.to_string())?;
    let config = config.to_str().expect("utf-8 path");
    let runs: [&[&str]; 3] = [&["periods", "sample"], &["semiflat", "check"], &["volume", "fit"]];
    for args in runs {
        let stem = args.join("_");
        let mut summaries = Vec::new();
        for dir in &dirs[1..3] {
            let mut a = vec!["--config", config, "--seed", "11", "--cache", "off"];
            a.extend_from_slice(args);
            let code = cli(&a, dir.path());
            ensure(code == 0, || format!("{stem} exited {code}"))?;
            summaries.push(read(&dir.path().join(format!("{stem}.json")))?);
        }
        ensure(summaries[0] == summaries[1], || format!("{stem}.json differs between runs"))?;
    }
    // cache: cold run writes it, warm run reads it; both against the uncached run
    let cache = dirs[3].path().join("cache.jsonl");
    let cache = cache.to_str().expect("utf-8 path");
    let mut worst = 0.0f64;
    for (args, table) in [(&["periods", "sample"][..], "periods.csv"), (&["volume", "fit"][..], "fits.csv")] {
        let uncached = read(&dirs[1].path().join(table))?;
        for _ in 0..2 {
            let mut a = vec!["--config", config, "--seed", "11", "--cache", cache];
            a.extend_from_slice(args);
            let code = cli(&a, dirs[3].path());
            ensure(code == 0, || format!("cached {} exited {code}", args.join(" ")))?;
            worst = worst.max(csv_difference(&read(&dirs[3].path().join(table))?, &uncached)?);
        }
    }
    ensure(worst <= 1e-12, || format!("cache on/off differ by {worst:e}"))?;
    let empty = tempfile::tempdir().expect("tempdir");
    ensure(cli(&["report"], empty.path()) == 2, || "report on an empty directory did not exit 2".into())?;
    ensure(cli(&["report"], dirs[1].path()) == 0, || "report on passing summaries did not exit 0".into())?;
    Ok(format!("byte-identical summaries for 3 commands; cache on/off difference {}", fmt_f64(worst)))
}

fn main() {
    let k3_metric = || -> Result<(LimitMetric, Duration), String> {
        let start = Instant::now();
        let d = numeric(Density::fibration(&default_generic_k3()))?;
        let m = numeric(LimitMetric::build(d, MeshParams::default()))?;
        Ok((m, start.elapsed()))
    };
    let metric = k3_metric();
    let on_metric = |f: &dyn Fn(&LimitMetric, Duration) -> Verdict| match &metric {
        Ok((m, t)) => f(m, *t),
        Err(e) => Err(format!("metric construction failed: {e}")),
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("period correctness", Box::new(periods_correct)),
        ("monodromy signatures", Box::new(monodromy_signatures)),
        ("untwisting", Box::new(untwisting)),
        ("volume exponents", Box::new(volume_exponents)),
        ("completion of the limit metric", Box::new(|| on_metric(&completion))),
        ("length bound", Box::new(length_bound)),
        ("special Kahler structure", Box::new(special_kahler)),
        ("metric and special Kahler densities", Box::new(|| on_metric(&|m, _| proportional_densities(m)))),
        ("semi-flat identities", Box::new(semiflat)),
        ("determinism and cache coherence", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let t = secs(start.elapsed());
        match verdict {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{t}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail} [{t}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
