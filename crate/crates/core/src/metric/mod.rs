//! The collapsed limit metric `g = 2cφ|dy|^2` on the punctured base.
//!
//! The density `φ` is evaluated exactly from the periods. Lengths of
//! straight segments are Gauss-Legendre integrals of `√(2cφ)`; distances are
//! shortest paths in a graph on nested grids with dyadic polar rings around
//! each puncture, shortened afterwards by coordinate descent. `c` makes the
//! total area `∫ cφ · 2 dx dy` equal to 1.

mod area;
mod density;
mod graph;
mod segment;
mod smooth;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use density::{ChartPoint, Density, DensityKind, Domain, Puncture};
pub use graph::{PathGraph, Vertex, VertexKind, Zone};

use crate::error::{Error, Result};
use graph::{GraphContext, ShortestPaths};
use segment::{segment_integral, PATH_QUAD};
use smooth::Smoother;

/// Mesh construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshParams {
    /// Grid spacing of the coarsest level; each further level halves it.
    pub h0: f64,
    pub levels: usize,
    /// Radius of the innermost polar ring.
    pub r_min: f64,
    /// Radius of the excluded disc around each puncture.
    pub r_cut: f64,
    pub min_ring_angles: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            h0: 0.0317,
            levels: 3,
            r_min: 1e-6,
            r_cut: 1e-8,
            min_ring_angles: 24,
        }
    }
}

impl MeshParams {
    pub fn finest_spacing(&self) -> f64 {
        self.h0 / (1u64 << (self.levels.max(1) - 1)) as f64
    }

    fn validate(&self) -> Result<()> {
        let ok = self.h0 > 0.0
            && self.levels >= 1
            && self.levels <= 8
            && self.r_cut > 0.0
            && self.r_min > 10.0 * self.r_cut
            && self.min_ring_angles >= 8
            && self.min_ring_angles % 8 == 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid mesh parameters {self:?}")))
        }
    }
}

/// A disc around a puncture that no path may cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedDisc {
    pub label: String,
    pub chart: usize,
    pub center: Complex64,
    pub radius: f64,
}

/// A query location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Site {
    Point(ChartPoint),
    Puncture(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Length of the shortened path.
    pub value: f64,
    /// Graph distance on the finest level.
    pub graph: f64,
    /// Graph distance one level coarser, when there is one.
    pub coarse_graph: Option<f64>,
    /// `coarse_graph - graph`, the refinement gap.
    pub gap: f64,
    pub path: Vec<ChartPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDistanceReport {
    pub puncture: usize,
    pub radii: Vec<f64>,
    /// Graph distance to the point at angle 0 of each circle.
    pub values: Vec<f64>,
    pub increments: Vec<f64>,
    /// Spread of the graph distance over 8 angles of each circle.
    pub spreads: Vec<f64>,
    pub circle_lengths: Vec<f64>,
    pub limit: f64,
    pub cauchy: bool,
    pub angle_independent: bool,
    /// Shortened distance to the puncture itself.
    pub smoothed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub by_level: Vec<f64>,
    pub graph_by_level: Vec<f64>,
    pub value: f64,
    /// Relative change over the last refinement.
    pub relative_change: f64,
    pub endpoints: (Site, Site),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionSummary {
    pub labels: Vec<String>,
    /// Shortened pairwise distances between completion points.
    pub distances: Vec<Vec<f64>>,
    pub graph: Vec<Vec<f64>>,
    pub gaps: Vec<Vec<f64>>,
    pub min_distance: f64,
    /// Smallest `distance / gap` over pairs.
    pub min_gap_ratio: f64,
    pub merge_candidates: Vec<(usize, usize)>,
    pub diameter: DiameterReport,
    pub distinct: bool,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBoundReport {
    pub puncture: usize,
    pub alpha: f64,
    pub d: u32,
    pub radii: Vec<f64>,
    /// Longest connecting curve over sampled pairs, divided by `ρ^{1+α/2}(-log ρ)^d`.
    pub ratios: Vec<f64>,
    pub c_est: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalityReport {
    pub samples: usize,
    pub mean_ratio: f64,
    pub relative_std: f64,
}

/// Levels compared by the length-bound test.
pub const LENGTH_BOUND_WINDOW: usize = 6;
/// Increment below which a distance sequence counts as converged.
pub const CAUCHY_TOLERANCE: f64 = 1e-4;

/// The normalized metric with its path graphs.
pub struct LimitMetric {
    density: Density,
    params: MeshParams,
    c: f64,
    areas: Vec<f64>,
    zones: Vec<Zone>,
    graphs: Vec<PathGraph>,
    excluded: Vec<ExcludedDisc>,
}

fn zones_for(density: &Density, params: &MeshParams) -> Result<Vec<Zone>> {
    let rd = density.domain().chart_radius();
    let h = params.finest_spacing();
    density
        .punctures()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let nearest = density
                .singular_points(p.chart)
                .iter()
                .filter(|(j, _)| *j != k)
                .map(|(_, s)| (s - p.z).norm())
                .fold(f64::INFINITY, f64::min);
            let r_outer = (0.4 * nearest).min(0.8 * (rd - p.z.norm())).min(0.25);
            if !(r_outer > 2.0 * params.r_min) {
                return Err(Error::InvalidInput(format!(
                    "puncture {} has no room for polar rings (outer radius {r_outer:e})",
                    p.label
                )));
            }
            let mut radii = vec![r_outer];
            while radii[radii.len() - 1] / 2.0 >= params.r_min * (1.0 - 1e-12) {
                radii.push(radii[radii.len() - 1] / 2.0);
            }
            let max_exp = (512 / params.min_ring_angles).ilog2() as i32;
            let angles = radii
                .iter()
                .map(|r| {
                    let e = (2.0 * PI * r / (h * params.min_ring_angles as f64)).log2().ceil() as i32;
                    params.min_ring_angles << e.clamp(0, max_exp)
                })
                .collect();
            Ok(Zone {
                puncture: k,
                chart: p.chart,
                center: p.z,
                r_outer,
                radii,
                angles,
            })
        })
        .collect()
}

/// Samples `φ`, normalizes the area and builds the path graphs.
pub fn build_metric(density: Density, params: MeshParams) -> Result<LimitMetric> {
    LimitMetric::build(density, params)
}

impl LimitMetric {
    pub fn build(density: Density, params: MeshParams) -> Result<LimitMetric> {
        params.validate()?;
        let mut areas = Vec::with_capacity(params.levels);
        for l in 0..params.levels {
            areas.push(area::density_integral(&density, params.h0 / (1u64 << l) as f64, params.r_cut)?);
        }
        let c = 1.0 / (2.0 * areas[areas.len() - 1]);
        let zones = zones_for(&density, &params)?;
        let excluded = density
            .punctures()
            .iter()
            .map(|p| ExcludedDisc {
                label: p.label.clone(),
                chart: p.chart,
                center: p.z,
                radius: params.r_cut,
            })
            .collect();
        let mut metric = LimitMetric {
            density,
            params,
            c,
            areas,
            zones,
            graphs: Vec::new(),
            excluded,
        };
        let ctx = metric.context();
        let mesh = graph::ZoneMesh::build(&ctx)?;
        let mut graphs = Vec::with_capacity(params.levels);
        for level in 0..params.levels {
            graphs.push(PathGraph::build(&ctx, &mesh, level)?);
        }
        metric.graphs = graphs;
        Ok(metric)
    }

    fn context(&self) -> GraphContext<'_> {
        GraphContext {
            density: &self.density,
            zones: &self.zones,
            h0: self.params.h0,
            r_cut: self.params.r_cut,
            scale: self.scale(),
        }
    }

    fn smoother(&self) -> Smoother<'_> {
        Smoother {
            density: &self.density,
            r_cut: self.params.r_cut,
            scale: self.scale(),
        }
    }

    /// `√(2c)`, the factor turning `∫√φ|dz|` into a length.
    pub fn scale(&self) -> f64 {
        (2.0 * self.c).sqrt()
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn params(&self) -> &MeshParams {
        &self.params
    }

    /// The normalization constant `c`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `∫ φ dx dy` at each level's quadrature resolution.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Relative change of the raw area over the last refinement.
    pub fn area_relative_change(&self) -> f64 {
        let n = self.areas.len();
        if n < 2 {
            return 0.0;
        }
        ((self.areas[n - 1] - self.areas[n - 2]) / self.areas[n - 1]).abs()
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn graphs(&self) -> &[PathGraph] {
        &self.graphs
    }

    pub fn finest(&self) -> &PathGraph {
        &self.graphs[self.graphs.len() - 1]
    }

    pub fn excluded(&self) -> &[ExcludedDisc] {
        &self.excluded
    }

    /// `c φ` at a point.
    pub fn normalized_density(&self, p: ChartPoint) -> Result<f64> {
        let p = p.normalized(self.density.domain());
        Ok(self.c * self.density.value(p.chart, p.z)?)
    }

    pub fn site_point(&self, site: &Site) -> ChartPoint {
        match site {
            Site::Point(p) => p.normalized(self.density.domain()),
            Site::Puncture(k) => {
                let p = &self.density.punctures()[*k];
                ChartPoint::new(p.chart, p.z)
            }
        }
    }

    /// Length of a polyline, each piece straight in the common chart of its ends.
    pub fn path_length(&self, polyline: &[ChartPoint]) -> Result<f64> {
        let mut total = 0.0;
        for w in polyline.windows(2) {
            total += segment_integral(&self.density, w[0], w[1], self.params.r_cut, PATH_QUAD)?;
        }
        Ok(total * self.scale())
    }

    /// Closed `n`-gon inscribed in the circle of the given radius.
    pub fn circle(&self, center: ChartPoint, radius: f64, n: usize) -> Vec<ChartPoint> {
        (0..=n)
            .map(|k| {
                let z = center.z + Complex64::from_polar(radius, 2.0 * PI * (k % n) as f64 / n as f64);
                ChartPoint::new(center.chart, z)
            })
            .collect()
    }

    fn sources(&self, level: usize, site: &Site) -> Result<Vec<(usize, f64)>> {
        let g = &self.graphs[level];
        match site {
            Site::Puncture(k) => Ok(vec![(g.puncture_vertex(*k), 0.0)]),
            Site::Point(p) => g.attach(&self.context(), *p),
        }
    }

    fn shortest(&self, level: usize, from: &Site, stop: Option<&[usize]>) -> Result<ShortestPaths> {
        let src = self.sources(level, from)?;
        Ok(self.graphs[level].dijkstra(&src, stop))
    }

    /// Graph route from `a` to `b`: length, points and cumulative labels.
    fn route(&self, level: usize, a: &Site, b: &Site) -> Result<(f64, Vec<ChartPoint>, Vec<f64>)> {
        let g = &self.graphs[level];
        let targets = self.sources(level, b)?;
        let stop: Vec<usize> = targets.iter().map(|t| t.0).collect();
        let sp = self.shortest(level, a, Some(&stop))?;
        let (v, total) = targets
            .iter()
            .map(|&(v, w)| (v, sp.dist[v] + w))
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
            .ok_or_else(|| Error::Disconnected("no target".into()))?;
        if !total.is_finite() {
            return Err(Error::Disconnected(format!("{a:?} and {b:?} are not connected")));
        }
        let ids = sp.path_to(v);
        let mut pts = Vec::with_capacity(ids.len() + 2);
        let mut labels = Vec::with_capacity(ids.len() + 2);
        if let Site::Point(_) = a {
            pts.push(self.site_point(a));
            labels.push(0.0);
        }
        for &id in &ids {
            pts.push(g.vertices()[id].point);
            labels.push(sp.dist[id]);
        }
        if let Site::Point(_) = b {
            pts.push(self.site_point(b));
            labels.push(total);
        }
        Ok((total, pts, labels))
    }

    /// Graph distance on one level.
    pub fn graph_distance(&self, level: usize, a: &Site, b: &Site) -> Result<f64> {
        Ok(self.route(level, a, b)?.0)
    }

    /// Shortest-path distance with the refinement gap.
    pub fn distance(&self, a: &Site, b: &Site) -> Result<DistanceEstimate> {
        let fine = self.graphs.len() - 1;
        let (graph, pts, labels) = self.route(fine, a, b)?;
        let (smoothed, path) = self.smoother().smooth(&pts, &labels)?;
        let (value, path) = if smoothed <= graph { (smoothed, path) } else { (graph, pts) };
        let coarse_graph = if fine > 0 {
            Some(self.graph_distance(fine - 1, a, b)?)
        } else {
            None
        };
        Ok(DistanceEstimate {
            value,
            graph,
            coarse_graph,
            gap: coarse_graph.map_or(0.0, |c| (c - graph).max(0.0)),
            path,
        })
    }

    fn smoothed_on(&self, level: usize, a: &Site, b: &Site) -> Result<f64> {
        let (graph, pts, labels) = self.route(level, a, b)?;
        let (smoothed, _) = self.smoother().smooth(&pts, &labels)?;
        Ok(smoothed.min(graph))
    }

    /// Distances `d(q, q_s)` to points on dyadic circles around puncture `k`.
    pub fn distance_to_singular(&self, q: &Site, k: usize) -> Result<SingularDistanceReport> {
        let zone = self
            .zones
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("no puncture {k}")))?;
        let fine = self.graphs.len() - 1;
        let g = &self.graphs[fine];
        let sp = self.shortest(fine, q, None)?;
        let mut radii = Vec::new();
        let mut values = Vec::new();
        let mut spreads = Vec::new();
        let mut circle_lengths = Vec::new();
        let center = ChartPoint::new(zone.chart, zone.center);
        for ring in 1..zone.radii.len() {
            let ds: Vec<f64> = (0..8)
                .map(|m| sp.dist[g.ring_vertex(zone, ring, m * zone.angles[ring] / 8)])
                .collect();
            let hi = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = ds.iter().copied().fold(f64::INFINITY, f64::min);
            radii.push(zone.radii[ring]);
            values.push(ds[0]);
            spreads.push(hi - lo);
            circle_lengths.push(self.path_length(&self.circle(center, zone.radii[ring], 64))?);
        }
        let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let settled = increments.iter().rposition(|&d| d >= CAUCHY_TOLERANCE).map_or(0, |i| i + 1);
        let cauchy = settled < increments.len();
        let limit = values[values.len() - 1];
        let angle_independent = spreads.iter().zip(&circle_lengths).all(|(s, c)| *s < 2.0 * c)
            && spreads[spreads.len() - 1] <= spreads[0];
        let smoothed = self.distance(q, &Site::Puncture(k))?.value;
        Ok(SingularDistanceReport {
            puncture: k,
            radii,
            values,
            increments,
            spreads,
            circle_lengths,
            limit,
            cauchy,
            angle_independent,
            smoothed,
        })
    }

    fn vertex_site(&self, level: usize, v: usize) -> Site {
        let vert = self.graphs[level].vertices()[v];
        match vert.kind {
            VertexKind::Puncture(k) => Site::Puncture(k as usize),
            _ => Site::Point(vert.point),
        }
    }

    fn farthest(sp: &ShortestPaths) -> (usize, f64) {
        sp.dist
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc })
    }

    fn diameter_on(&self, level: usize) -> Result<(f64, f64, (Site, Site))> {
        let g = &self.graphs[level];
        let mut starts: Vec<usize> = (0..self.zones.len()).map(|k| g.puncture_vertex(k)).collect();
        if starts.is_empty() {
            starts.push(0);
        }
        let mut cands: Vec<(usize, usize, f64)> = Vec::new();
        for &s in &starts {
            let sp = g.dijkstra(&[(s, 0.0)], None);
            let (v, d) = Self::farthest(&sp);
            cands.push((s, v, d));
        }
        cands.sort_by(|a, b| b.2.total_cmp(&a.2));
        let mut a = cands[0].1;
        for _ in 0..2 {
            let sp = g.dijkstra(&[(a, 0.0)], None);
            let (b, d) = Self::farthest(&sp);
            cands.push((a, b, d));
            a = b;
        }
        cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        let mut seen = Vec::new();
        let mut best = (f64::NEG_INFINITY, cands[0].2, (Site::Point(g.vertices()[0].point), Site::Point(g.vertices()[0].point)));
        for &(u, v, _) in &cands {
            let key = (u.min(v), u.max(v));
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let (su, sv) = (self.vertex_site(level, u), self.vertex_site(level, v));
            let d = self.smoothed_on(level, &su, &sv)?;
            if d > best.0 {
                best = (d, best.1, (su, sv));
            }
            if seen.len() == 4 {
                break;
            }
        }
        Ok(best)
    }

    /// Diameter of the completion on every level.
    pub fn diameter(&self) -> Result<DiameterReport> {
        let mut by_level = Vec::new();
        let mut graph_by_level = Vec::new();
        let mut endpoints = None;
        for level in 0..self.graphs.len() {
            let (d, dg, ends) = self.diameter_on(level)?;
            by_level.push(d);
            graph_by_level.push(dg);
            endpoints = Some(ends);
        }
        let n = by_level.len();
        let value = by_level[n - 1];
        let relative_change = if n >= 2 { ((value - by_level[n - 2]) / value).abs() } else { 0.0 };
        Ok(DiameterReport {
            by_level,
            graph_by_level,
            value,
            relative_change,
            endpoints: endpoints.expect("at least one level"),
        })
    }

    /// Pairwise distances between completion points and the diameter.
    pub fn completion_summary(&self) -> Result<CompletionSummary> {
        let n = self.zones.len();
        let fine = self.graphs.len() - 1;
        let pairwise = |level: usize| -> Vec<Vec<f64>> {
            let g = &self.graphs[level];
            (0..n)
                .map(|i| {
                    let sp = g.dijkstra(&[(g.puncture_vertex(i), 0.0)], None);
                    (0..n).map(|j| sp.dist[g.puncture_vertex(j)]).collect()
                })
                .collect()
        };
        let graph = pairwise(fine);
        let coarse = if fine > 0 { Some(pairwise(fine - 1)) } else { None };
        let mut distances = vec![vec![0.0; n]; n];
        let mut gaps = vec![vec![0.0; n]; n];
        let mut merge_candidates = Vec::new();
        let mut min_distance = f64::INFINITY;
        let mut min_gap_ratio = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d = self.smoothed_on(fine, &Site::Puncture(i), &Site::Puncture(j))?;
                let gap = coarse.as_ref().map_or(0.0, |c| (c[i][j] - graph[i][j]).max(0.0));
                distances[i][j] = d;
                distances[j][i] = d;
                gaps[i][j] = gap;
                gaps[j][i] = gap;
                min_distance = min_distance.min(d);
                min_gap_ratio = min_gap_ratio.min(if gap > 0.0 { d / gap } else { f64::INFINITY });
                if !(d > 10.0 * gap && d > 0.0) {
                    merge_candidates.push((i, j));
                }
            }
        }
        let diameter = self.diameter()?;
        let finite = diameter.value.is_finite() && graph.iter().flatten().all(|d| d.is_finite());
        Ok(CompletionSummary {
            labels: self.density.punctures().iter().map(|p| p.label.clone()).collect(),
            distances,
            graph,
            gaps,
            min_distance,
            min_gap_ratio,
            distinct: merge_candidates.is_empty(),
            merge_candidates,
            diameter,
            finite,
        })
    }

    /// Compares the longest connecting curve in `Δ*(ρ)` with
    /// `ρ^{1+α/2}(-log ρ)^d` over `levels` dyadic radii below half the outer ring.
    pub fn verify_length_bound(&self, k: usize, alpha: f64, d: u32, levels: usize) -> Result<LengthBoundReport> {
        let zone = self
            .zones
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("no puncture {k}")))?;
        if levels < LENGTH_BOUND_WINDOW {
            return Err(Error::InvalidInput(format!("need at least {LENGTH_BOUND_WINDOW} radii")));
        }
        let rho0 = (0.5 * zone.r_outer).min(0.5);
        let center = zone.center;
        let pt = |z: Complex64| ChartPoint::new(zone.chart, z);
        let angles: Vec<f64> = (0..4).map(|m| 0.1 + 0.5 * PI * m as f64).collect();
        let fractions = [1.0, 0.5, 0.125, 1.0 / 64.0];
        let mut radii = Vec::new();
        let mut ratios = Vec::new();
        for j in 0..levels {
            let rho = rho0 / (1u64 << j) as f64;
            let big = 0.999 * rho;
            // radial pieces out to the circle of radius 0.999ρ
            let mut radial = Vec::new();
            for &th in &angles {
                let u = Complex64::from_polar(1.0, th);
                for &f in &fractions {
                    let l = if f == 1.0 {
                        0.0
                    } else {
                        self.path_length(&[pt(center + u * (f * big)), pt(center + u * big)])?
                    };
                    radial.push((th, l));
                }
            }
            let arc = |t1: f64, t2: f64| -> Result<f64> {
                let mut dt = (t2 - t1).rem_euclid(2.0 * PI);
                if dt > PI {
                    dt -= 2.0 * PI;
                }
                let n = ((dt.abs() / (2.0 * PI) * 64.0).ceil() as usize).max(1);
                let pts: Vec<ChartPoint> = (0..=n)
                    .map(|i| pt(center + Complex64::from_polar(big, t1 + dt * i as f64 / n as f64)))
                    .collect();
                self.path_length(&pts)
            };
            let mut sup: f64 = 0.0;
            for (a, &(t1, l1)) in radial.iter().enumerate() {
                for &(t2, l2) in &radial[a + 1..] {
                    let a12 = if t1 == t2 { 0.0 } else { arc(t1, t2)? };
                    let through = if t1 == t2 { (l1 - l2).abs() } else { l1 + a12 + l2 };
                    sup = sup.max(through);
                }
            }
            let norm = rho.powf(1.0 + alpha / 2.0) * (-rho.ln()).powi(d as i32);
            radii.push(rho);
            ratios.push(sup / norm);
        }
        let tail = &ratios[ratios.len() - LENGTH_BOUND_WINDOW..];
        let rising = tail.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
        let first = tail[1] - tail[0];
        let last = tail[tail.len() - 1] - tail[tail.len() - 2];
        let pass = !(rising && last >= 0.5 * first);
        let c_est = ratios.iter().copied().fold(0.0, f64::max);
        Ok(LengthBoundReport {
            puncture: k,
            alpha,
            d,
            radii,
            ratios,
            c_est,
            pass,
        })
    }

    /// Compares `c φ` with another density on up to `max_samples` grid
    /// vertices of the finest level.
    pub fn proportionality<F>(&self, max_samples: usize, other: F) -> Result<ProportionalityReport>
    where
        F: Fn(ChartPoint) -> Result<f64>,
    {
        let grid: Vec<ChartPoint> = self
            .finest()
            .vertices()
            .iter()
            .filter(|v| matches!(v.kind, VertexKind::Grid { .. }))
            .map(|v| v.point)
            .collect();
        let stride = grid.len().div_ceil(max_samples.max(1)).max(1);
        let mut ratios = Vec::new();
        for p in grid.iter().step_by(stride) {
            ratios.push(self.normalized_density(*p)? / other(*p)?);
        }
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Ok(ProportionalityReport {
            samples: ratios.len(),
            mean_ratio: mean,
            relative_std: var.sqrt() / mean.abs(),
        })
    }
}
