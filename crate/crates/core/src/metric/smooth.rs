//! Shortening graph paths by coordinate descent on polyline vertices.

use num_complex::Complex64;

use super::density::{ChartPoint, Density, Domain};
use super::segment::{common_chart, point_segment_distance, segment_integral, Quad, PATH_QUAD, SEARCH_QUAD};
use crate::error::{Error, Result};

const INITIAL_SEGMENTS: usize = 8;
const SUBDIVISIONS: usize = 2;
const MAX_SWEEPS: usize = 120;
/// Initial step as a fraction of the shorter adjacent chord, and the final
/// step relative to it, for the first and the later rounds.
const FIRST_ROUND: (f64, f64) = (0.25, 1e-3);
const LATER_ROUNDS: (f64, f64) = (0.0625, 1e-2);

pub(crate) struct Smoother<'a> {
    pub density: &'a Density,
    pub r_cut: f64,
    /// `√(2c)`.
    pub scale: f64,
}

impl Smoother<'_> {
    fn seg(&self, a: ChartPoint, b: ChartPoint, quad: Quad) -> Option<f64> {
        segment_integral(self.density, a, b, self.r_cut, quad)
            .ok()
            .map(|x| x * self.scale)
    }

    fn domain(&self) -> Domain {
        self.density.domain()
    }

    /// Whether the chord `path[i] → path[j]` keeps roughly the clearance the
    /// graph path had from every puncture.
    fn admissible(&self, path: &[ChartPoint], i: usize, j: usize) -> bool {
        let (chart, zi, zj) = common_chart(self.domain(), path[i], path[j]);
        let tol = 1e-3 * self.r_cut;
        self.density.singular_points(chart).iter().all(|&(_, s)| {
            if (zi - s).norm() <= tol || (zj - s).norm() <= tol {
                return true;
            }
            let dmin = path[i..=j]
                .iter()
                .filter_map(|p| p.coords_in(chart))
                .map(|z| (z - s).norm())
                .fold(f64::INFINITY, f64::min);
            point_segment_distance(s, zi, zj) >= 0.5 * dmin
        })
    }

    /// Whether `p` is one of the punctures, which paths may pass through
    /// but never cut across.
    fn at_puncture(&self, p: ChartPoint) -> bool {
        let tol = 1e-3 * self.r_cut;
        self.density
            .singular_points(p.chart)
            .iter()
            .any(|&(_, s)| (p.z - s).norm() <= tol)
    }

    fn decimate(&self, path: &[ChartPoint], labels: &[f64]) -> Vec<ChartPoint> {
        let last = path.len() - 1;
        let total = labels[last];
        let mut idx = vec![0usize];
        for k in 1..INITIAL_SEGMENTS {
            let target = total * k as f64 / INITIAL_SEGMENTS as f64;
            let i = labels.partition_point(|&l| l < target).min(last);
            if i > *idx.last().expect("nonempty") && i < last {
                idx.push(i);
            }
        }
        idx.extend((1..last).filter(|&i| self.at_puncture(path[i])));
        idx.sort_unstable();
        idx.dedup();
        idx.push(last);
        let mut out = vec![0usize];
        let mut pending: Vec<usize> = idx[1..].iter().rev().copied().collect();
        while let Some(j) = pending.pop() {
            let i = *out.last().expect("nonempty");
            if j > i + 1 && !self.admissible(path, i, j) {
                pending.push(j);
                pending.push((i + j) / 2);
            } else {
                out.push(j);
            }
        }
        out.into_iter().map(|i| path[i]).collect()
    }

    fn midpoint(&self, a: ChartPoint, b: ChartPoint) -> ChartPoint {
        let (chart, za, zb) = common_chart(self.domain(), a, b);
        ChartPoint::new(chart, 0.5 * (za + zb)).normalized(self.domain())
    }

    fn optimize(&self, nodes: &mut [ChartPoint], (start, stop): (f64, f64)) -> Result<()> {
        let n = nodes.len();
        if n < 3 {
            return Ok(());
        }
        let mut len: Vec<f64> = Vec::with_capacity(n - 1);
        for w in nodes.windows(2) {
            len.push(
                self.seg(w[0], w[1], SEARCH_QUAD)
                    .ok_or_else(|| Error::ExcludedZone(w[0].z))?,
            );
        }
        let chord = |a: ChartPoint, b: ChartPoint| {
            let (_, za, zb) = common_chart(self.domain(), a, b);
            (za - zb).norm()
        };
        let mut step: Vec<f64> = (0..n)
            .map(|k| {
                if k == 0 || k == n - 1 || self.at_puncture(nodes[k]) {
                    0.0
                } else {
                    start * chord(nodes[k - 1], nodes[k]).min(chord(nodes[k], nodes[k + 1]))
                }
            })
            .collect();
        let tol: Vec<f64> = step.iter().map(|s| s * stop).collect();
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let dirs = [
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
        ];
        let diagonals = [
            Complex64::new(s2, s2),
            Complex64::new(-s2, -s2),
            Complex64::new(s2, -s2),
            Complex64::new(-s2, s2),
        ];
        let rd = self.domain().chart_radius();
        for _ in 0..MAX_SWEEPS {
            let mut active = false;
            for k in 1..n - 1 {
                if step[k] <= tol[k] || step[k] == 0.0 {
                    continue;
                }
                active = true;
                let base = len[k - 1] + len[k];
                let mut best: Option<(f64, ChartPoint, f64, f64)> = None;
                for set in [&dirs, &diagonals] {
                    for &d in set {
                        let z = nodes[k].z + d * step[k];
                        if self.domain().charts() == 1 && z.norm() > rd {
                            continue;
                        }
                        let p = ChartPoint::new(nodes[k].chart, z).normalized(self.domain());
                        let (Some(l1), Some(l2)) =
                            (self.seg(nodes[k - 1], p, SEARCH_QUAD), self.seg(p, nodes[k + 1], SEARCH_QUAD))
                        else {
                            continue;
                        };
                        let cand = l1 + l2;
                        if cand < base * (1.0 - 1e-15) && best.map_or(true, |b| cand < b.0) {
                            best = Some((cand, p, l1, l2));
                        }
                    }
                    if best.is_some() {
                        break;
                    }
                }
                match best {
                    Some((_, p, l1, l2)) => {
                        nodes[k] = p;
                        len[k - 1] = l1;
                        len[k] = l2;
                    }
                    None => step[k] *= 0.5,
                }
            }
            if !active {
                break;
            }
        }
        Ok(())
    }

    /// Shortened polyline and its length. `labels` are the graph distances
    /// along `path`; the endpoints stay fixed.
    pub fn smooth(&self, path: &[ChartPoint], labels: &[f64]) -> Result<(f64, Vec<ChartPoint>)> {
        if path.len() < 2 {
            return Ok((0.0, path.to_vec()));
        }
        let reversed = path[path.len() - 1].key() < path[0].key();
        let (path, labels): (Vec<ChartPoint>, Vec<f64>) = if reversed {
            let total = labels[labels.len() - 1];
            (
                path.iter().rev().copied().collect(),
                labels.iter().rev().map(|l| total - l).collect(),
            )
        } else {
            (path.to_vec(), labels.to_vec())
        };
        let mut nodes = self.decimate(&path, &labels);
        for round in 0..=SUBDIVISIONS {
            self.optimize(&mut nodes, if round == 0 { FIRST_ROUND } else { LATER_ROUNDS })?;
            if round < SUBDIVISIONS {
                let mut finer = Vec::with_capacity(2 * nodes.len());
                for w in nodes.windows(2) {
                    finer.push(w[0]);
                    finer.push(self.midpoint(w[0], w[1]));
                }
                finer.push(nodes[nodes.len() - 1]);
                nodes = finer;
            }
        }
        let mut total = 0.0;
        for w in nodes.windows(2) {
            total += self.seg(w[0], w[1], PATH_QUAD).ok_or_else(|| Error::ExcludedZone(w[0].z))?;
        }
        if reversed {
            nodes.reverse();
        }
        Ok((total, nodes))
    }
}
