//! Weighted path graphs on nested grids with polar rings around the punctures.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{ChartPoint, Density, Domain};
use super::segment::{common_chart, point_segment_distance, segment_integral, EDGE_QUAD};
use crate::error::{Error, Result};

/// Grid edges join vertices closer than this many birth spacings.
const STENCIL: f64 = 2.5;
/// Grid vertices closer than this multiple of the outer ring radius are dropped.
const ZONE_MARGIN: f64 = 1.05;
/// Adjacent rings are joined across this many angular steps.
const RING_FAN: i64 = 3;
const ATTACH_NEIGHBORS: usize = 12;
const NONE: u32 = u32::MAX;

/// Polar refinement around one puncture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Zone {
    pub puncture: usize,
    pub chart: usize,
    pub center: Complex64,
    pub r_outer: f64,
    /// `r_outer 2^{-j}` down to `r_min`.
    pub radii: Vec<f64>,
    /// Angles on each ring, multiples of 8; consecutive rings differ by at most a factor 2.
    pub angles: Vec<usize>,
}

impl Zone {
    pub fn ring_point(&self, ring: usize, angle: usize) -> Complex64 {
        let m = self.angles[ring];
        self.center + Complex64::from_polar(self.radii[ring], 2.0 * PI * (angle % m) as f64 / m as f64)
    }

    /// Index of a ring vertex within the zone; the puncture comes last.
    pub fn local_index(&self, ring: usize, angle: usize) -> usize {
        self.angles[..ring].iter().sum::<usize>() + angle % self.angles[ring]
    }

    pub fn size(&self) -> usize {
        self.angles.iter().sum::<usize>() + 1
    }
}

/// Vertices and edges shared by all levels: rings and punctures.
pub(crate) struct ZoneMesh {
    pub vertices: Vec<Vertex>,
    pub base: Vec<usize>,
    pub edges: Vec<(u32, u32, f64)>,
}

impl ZoneMesh {
    pub fn build(ctx: &GraphContext) -> Result<ZoneMesh> {
        let mut vertices = Vec::new();
        let mut base = vec![usize::MAX; ctx.density.punctures().len()];
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for zone in ctx.zones {
            let b = vertices.len();
            base[zone.puncture] = b;
            for ring in 0..zone.radii.len() {
                for angle in 0..zone.angles[ring] {
                    vertices.push(Vertex {
                        point: ChartPoint::new(zone.chart, zone.ring_point(ring, angle)),
                        kind: VertexKind::Ring {
                            puncture: zone.puncture as u32,
                            ring: ring as u32,
                            angle: angle as u32,
                        },
                    });
                }
            }
            vertices.push(Vertex {
                point: ChartPoint::new(zone.chart, zone.center),
                kind: VertexKind::Puncture(zone.puncture as u32),
            });
            let id = |ring: usize, angle: i64| {
                let m = zone.angles[ring] as i64;
                (b + zone.local_index(ring, angle.rem_euclid(m) as usize)) as u32
            };
            for ring in 0..zone.radii.len() {
                let m = zone.angles[ring] as i64;
                for a in 0..m {
                    edges.push((id(ring, a), id(ring, a + 1)));
                    edges.push((id(ring, a), id(ring, a + 2)));
                    if ring + 1 < zone.radii.len() {
                        let m2 = zone.angles[ring + 1] as i64;
                        let c = a * m2 / m;
                        for d in -RING_FAN..=RING_FAN {
                            edges.push((id(ring, a), id(ring + 1, c + d)));
                        }
                    }
                }
            }
            let inner = zone.radii.len() - 1;
            let pv = (b + zone.size() - 1) as u32;
            for a in 0..zone.angles[inner] as i64 {
                edges.push((id(inner, a), pv));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let weights: Vec<f64> = edges
            .par_iter()
            .map(|&(u, v)| {
                segment_integral(ctx.density, vertices[u as usize].point, vertices[v as usize].point, ctx.r_cut, EDGE_QUAD)
                    .map(|x| x * ctx.scale)
            })
            .collect::<Result<Vec<f64>>>()?;
        let edges = edges.into_iter().zip(weights).map(|((u, v), w)| (u, v, w)).collect();
        Ok(ZoneMesh { vertices, base, edges })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    Grid { birth: u32 },
    Ring { puncture: u32, ring: u32, angle: u32 },
    Puncture(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub point: ChartPoint,
    pub kind: VertexKind,
}

struct SpatialIndex {
    cell: f64,
    reach: i64,
    map: HashMap<(i64, i64), Vec<u32>>,
}

impl SpatialIndex {
    fn new(cell: f64, extent: f64) -> Self {
        SpatialIndex {
            cell,
            reach: (2.0 * extent / cell).ceil() as i64 + 2,
            map: HashMap::new(),
        }
    }

    fn key(&self, z: Complex64) -> (i64, i64) {
        ((z.re / self.cell).floor() as i64, (z.im / self.cell).floor() as i64)
    }

    fn insert(&mut self, z: Complex64, id: u32) {
        let k = self.key(z);
        self.map.entry(k).or_default().push(id);
    }

    /// The `k` nearest vertices to `z` by Euclidean distance in this chart.
    fn nearest(&self, z: Complex64, k: usize, vertices: &[Vertex]) -> Vec<(u32, f64)> {
        let (ci, cj) = self.key(z);
        let mut found: Vec<(u32, f64)> = Vec::new();
        for r in 0..=self.reach {
            for di in -r..=r {
                for dj in -r..=r {
                    if di.abs().max(dj.abs()) != r {
                        continue;
                    }
                    if let Some(ids) = self.map.get(&(ci + di, cj + dj)) {
                        found.extend(ids.iter().map(|&id| (id, (vertices[id as usize].point.z - z).norm())));
                    }
                }
            }
            if found.len() >= k {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                if found[k - 1].1 <= r as f64 * self.cell {
                    found.truncate(k);
                    return found;
                }
            }
        }
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        found.truncate(k);
        found
    }
}

/// Everything a level needs besides its spacing.
pub(crate) struct GraphContext<'a> {
    pub density: &'a Density,
    pub zones: &'a [Zone],
    pub h0: f64,
    pub r_cut: f64,
    /// `√(2c)`.
    pub scale: f64,
}

impl GraphContext<'_> {
    /// Whether the straight segment keeps out of every zone other than `allowed`.
    fn clear(&self, a: ChartPoint, b: ChartPoint, allowed: Option<(usize, f64)>) -> bool {
        let domain = self.density.domain();
        let (chart, za, zb) = common_chart(domain, a, b);
        self.zones.iter().all(|zone| {
            let need = match allowed {
                Some((k, f)) if k == zone.puncture => f * zone.r_outer,
                _ => zone.r_outer,
            };
            if zone.chart == chart {
                point_segment_distance(zone.center, za, zb) >= need
            } else {
                match (a.coords_in(zone.chart), b.coords_in(zone.chart)) {
                    (Some(pa), Some(pb)) => point_segment_distance(zone.center, pa, pb) >= need,
                    _ => true,
                }
            }
        })
    }
}

/// Shortest-path labels from a set of sources.
pub(crate) struct ShortestPaths {
    pub dist: Vec<f64>,
    pub pred: Vec<u32>,
}

impl ShortestPaths {
    /// Vertices from a source to `v`.
    pub fn path_to(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = v;
        while self.pred[cur] != NONE {
            cur = self.pred[cur] as usize;
            out.push(cur);
        }
        out.reverse();
        out
    }
}

/// One refinement level of the path graph.
pub struct PathGraph {
    pub level: usize,
    pub spacing: f64,
    vertices: Vec<Vertex>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    puncture_vertex: Vec<usize>,
    ring_base: Vec<usize>,
    index: Vec<SpatialIndex>,
}

fn birth_level(i: i64, j: i64, level: usize) -> u32 {
    for l in 0..level {
        let step = 1i64 << (level - l);
        if i.rem_euclid(step) == 0 && j.rem_euclid(step) == 0 {
            return l as u32;
        }
    }
    level as u32
}

impl PathGraph {
    pub(crate) fn build(ctx: &GraphContext, mesh: &ZoneMesh, level: usize) -> Result<PathGraph> {
        let density = ctx.density;
        let domain = density.domain();
        let rd = domain.chart_radius();
        let h = ctx.h0 / (1u64 << level) as f64;
        let n = (rd / h).floor() as i64;
        let side = (2 * n + 1) as usize;
        let spacing_of = |birth: u32| ctx.h0 / (1u64 << birth) as f64;

        let mut vertices = mesh.vertices.clone();
        let mut lattice = vec![vec![NONE; side * side]; domain.charts()];
        let lat = |i: i64, j: i64| -> Option<usize> {
            if i.abs() > n || j.abs() > n {
                None
            } else {
                Some(((j + n) as usize) * side + (i + n) as usize)
            }
        };
        for (chart, grid) in lattice.iter_mut().enumerate() {
            for j in -n..=n {
                for i in -n..=n {
                    let z = Complex64::new(i as f64 * h, j as f64 * h);
                    if z.norm() > rd * (1.0 + 1e-12) {
                        continue;
                    }
                    let inside = ctx
                        .zones
                        .iter()
                        .any(|zn| zn.chart == chart && (z - zn.center).norm() < ZONE_MARGIN * zn.r_outer);
                    if inside {
                        continue;
                    }
                    grid[lat(i, j).expect("in range")] = vertices.len() as u32;
                    vertices.push(Vertex {
                        point: ChartPoint::new(chart, z),
                        kind: VertexKind::Grid {
                            birth: birth_level(i, j, level),
                        },
                    });
                }
            }
        }
        let puncture_vertex: Vec<usize> = ctx
            .zones
            .iter()
            .map(|z| mesh.base[z.puncture] + z.size() - 1)
            .collect();
        let birth = |v: u32| match vertices[v as usize].kind {
            VertexKind::Grid { birth } => birth,
            _ => unreachable!("grid vertex expected"),
        };
        let reach = |b: u32| STENCIL * (1u64 << (level as u32 - b)) as f64;
        let mut edges: Vec<(u32, u32)> = Vec::new();

        for grid in &lattice {
            for j in -n..=n {
                for i in -n..=n {
                    let u = grid[lat(i, j).expect("in range")];
                    if u == NONE {
                        continue;
                    }
                    let ru = reach(birth(u));
                    let k = ru.floor() as i64;
                    for dj in 0..=k {
                        for di in -k..=k {
                            if dj == 0 && di <= 0 {
                                continue;
                            }
                            let r2 = (di * di + dj * dj) as f64;
                            if r2 > ru * ru {
                                continue;
                            }
                            let Some(idx) = lat(i + di, j + dj) else { continue };
                            let v = grid[idx];
                            if v == NONE {
                                continue;
                            }
                            let rv = reach(birth(v));
                            if r2 > rv * rv {
                                continue;
                            }
                            let (pa, pb) = (vertices[u as usize].point, vertices[v as usize].point);
                            if ctx.clear(pa, pb, None) {
                                edges.push((u, v));
                            }
                        }
                    }
                }
            }
        }

        if domain == Domain::Sphere {
            for j in -n..=n {
                for i in -n..=n {
                    let v = lattice[1][lat(i, j).expect("in range")];
                    if v == NONE {
                        continue;
                    }
                    let zv = vertices[v as usize].point.z;
                    let sv = spacing_of(birth(v));
                    if zv.norm() < 1.0 - STENCIL * sv - h {
                        continue;
                    }
                    let w = zv.inv();
                    let r = STENCIL * sv;
                    let (i0, i1) = (((w.re - r) / h).floor() as i64, ((w.re + r) / h).ceil() as i64);
                    let (j0, j1) = (((w.im - r) / h).floor() as i64, ((w.im + r) / h).ceil() as i64);
                    for jj in j0..=j1 {
                        for ii in i0..=i1 {
                            let Some(idx) = lat(ii, jj) else { continue };
                            let u = lattice[0][idx];
                            if u == NONE {
                                continue;
                            }
                            let su = spacing_of(birth(u));
                            let zu = vertices[u as usize].point.z;
                            if (zu - w).norm() > STENCIL * su.min(sv) * (1.0 + 1e-12) {
                                continue;
                            }
                            if ctx.clear(vertices[u as usize].point, vertices[v as usize].point, None) {
                                edges.push((u, v));
                            }
                        }
                    }
                }
            }
        }

        for zone in ctx.zones {
            let m = zone.angles[0] as i64;
            let id = |ring: usize, angle: i64| (mesh.base[zone.puncture] + zone.local_index(ring, angle.rem_euclid(m) as usize)) as u32;
            // outer ring to the surrounding grid
            let r = STENCIL * ctx.h0;
            for a in 0..m {
                let rv = id(0, a);
                let zr = vertices[rv as usize].point.z;
                let (i0, i1) = (((zr.re - r) / h).floor() as i64, ((zr.re + r) / h).ceil() as i64);
                let (j0, j1) = (((zr.im - r) / h).floor() as i64, ((zr.im + r) / h).ceil() as i64);
                for jj in j0..=j1 {
                    for ii in i0..=i1 {
                        let Some(idx) = lat(ii, jj) else { continue };
                        let g = lattice[zone.chart][idx];
                        if g == NONE {
                            continue;
                        }
                        let pg = vertices[g as usize].point;
                        if (pg.z - zr).norm() > STENCIL * spacing_of(birth(g)) {
                            continue;
                        }
                        if ctx.clear(vertices[rv as usize].point, pg, Some((zone.puncture, 0.75))) {
                            edges.push((rv, g));
                        }
                    }
                }
            }
        }

        let mut weights: Vec<f64> = edges
            .par_iter()
            .map(|&(u, v)| {
                segment_integral(
                    density,
                    vertices[u as usize].point,
                    vertices[v as usize].point,
                    ctx.r_cut,
                    EDGE_QUAD,
                )
                .map(|x| x * ctx.scale)
            })
            .collect::<Result<Vec<f64>>>()?;
        for &(u, v, w) in &mesh.edges {
            edges.push((u, v));
            weights.push(w);
        }

        let mut degree = vec![0usize; vertices.len() + 1];
        for &(u, v) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0usize; vertices.len() + 1];
        for i in 0..vertices.len() {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0u32, 0.0f64); offsets[vertices.len()]];
        for (&(u, v), &w) in edges.iter().zip(&weights) {
            adj[fill[u as usize]] = (v, w);
            fill[u as usize] += 1;
            adj[fill[v as usize]] = (u, w);
            fill[v as usize] += 1;
        }
        for i in 0..vertices.len() {
            adj[offsets[i]..offsets[i + 1]].sort_by(|a, b| a.0.cmp(&b.0));
        }
        let (targets, weights) = adj.into_iter().unzip();

        let mut index: Vec<SpatialIndex> = (0..domain.charts()).map(|_| SpatialIndex::new(h, rd)).collect();
        for (id, v) in vertices.iter().enumerate() {
            index[v.point.chart].insert(v.point.z, id as u32);
        }
        let graph = PathGraph {
            level,
            spacing: h,
            vertices,
            offsets,
            targets,
            weights,
            puncture_vertex,
            ring_base: mesh.base.clone(),
            index,
        };
        let unreached = graph.dijkstra(&[(0, 0.0)], None).dist.iter().filter(|d| d.is_infinite()).count();
        if unreached > 0 {
            return Err(Error::Disconnected(format!("{unreached} vertices unreachable at level {level}")));
        }
        Ok(graph)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.offsets[u]..self.offsets[u + 1]).map(move |e| (self.targets[e] as usize, self.weights[e]))
    }

    pub fn puncture_vertex(&self, k: usize) -> usize {
        self.puncture_vertex[k]
    }

    pub fn ring_vertex(&self, zone: &Zone, ring: usize, angle: usize) -> usize {
        self.ring_base[zone.puncture] + zone.local_index(ring, angle)
    }

    /// Multi-source Dijkstra; stops once every vertex in `stop` is settled.
    pub(crate) fn dijkstra(&self, sources: &[(usize, f64)], stop: Option<&[usize]>) -> ShortestPaths {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NONE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &(s, d) in sources {
            if d < dist[s] {
                dist[s] = d;
                heap.push(Reverse((Key(d), s as u32)));
            }
        }
        let mut remaining = stop.map(|s| {
            let mut v: Vec<usize> = s.to_vec();
            v.sort_unstable();
            v.dedup();
            v.len()
        });
        let mut is_stop = vec![false; if stop.is_some() { n } else { 0 }];
        if let Some(s) = stop {
            for &v in s {
                is_stop[v] = true;
            }
        }
        while let Some(Reverse((Key(d), u))) = heap.pop() {
            let u = u as usize;
            if done[u] || d > dist[u] {
                continue;
            }
            done[u] = true;
            if let Some(r) = remaining.as_mut() {
                if is_stop[u] {
                    *r -= 1;
                    if *r == 0 {
                        break;
                    }
                }
            }
            for e in self.offsets[u]..self.offsets[u + 1] {
                let v = self.targets[e] as usize;
                let nd = d + self.weights[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = u as u32;
                    heap.push(Reverse((Key(nd), v as u32)));
                }
            }
        }
        ShortestPaths { dist, pred }
    }

    /// Edges from an arbitrary point to nearby vertices.
    pub(crate) fn attach(&self, ctx: &GraphContext, q: ChartPoint) -> Result<Vec<(usize, f64)>> {
        let density = ctx.density;
        let domain = density.domain();
        let q = q.normalized(domain);
        if let Some(&(k, _)) = density
            .singular_points(q.chart)
            .iter()
            .find(|(_, s)| (q.z - s).norm() <= 1e-3 * ctx.r_cut)
        {
            if self.puncture_vertex[k] != usize::MAX {
                return Ok(vec![(self.puncture_vertex[k], 0.0)]);
            }
        }
        let mut cands = self.index[q.chart].nearest(q.z, ATTACH_NEIGHBORS, &self.vertices);
        if domain == Domain::Sphere && q.z.norm() > 1.0 - 3.0 * STENCIL * ctx.h0 && q.z.norm() > 0.0 {
            cands.extend(self.index[1 - q.chart].nearest(q.z.inv(), ATTACH_NEIGHBORS, &self.vertices));
            cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            cands.truncate(ATTACH_NEIGHBORS);
        }
        let mut out = Vec::new();
        for (v, _) in cands {
            let vp = self.vertices[v as usize].point;
            let own = match self.vertices[v as usize].kind {
                VertexKind::Puncture(k) => Some(k as usize),
                _ => None,
            };
            let (chart, zq, zv) = common_chart(domain, q, vp);
            let ok = density.singular_points(chart).iter().all(|&(k, s)| {
                Some(k) == own || point_segment_distance(s, zq, zv) >= 0.5 * (zq - s).norm().min((zv - s).norm())
            });
            if !ok {
                continue;
            }
            if let Ok(w) = segment_integral(density, q, vp, ctx.r_cut, EDGE_QUAD) {
                out.push((v as usize, w * ctx.scale));
            }
        }
        if out.is_empty() {
            return Err(Error::Disconnected(format!("no admissible neighbor for {:?}", q)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
