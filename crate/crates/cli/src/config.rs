//! Job configuration, read from JSON. Every field has a default.

use std::fs;
use std::path::{Path, PathBuf};

use k3limit::fibration::models::default_generic_k3;
use k3limit::fibration::FibrationJson;
use k3limit::metric::MeshParams;
use k3limit::semiflat::PolynomialSection;
use k3limit::special_kahler::{Monomial, SeriesPrepotential, SpecialKahlerChart};
use k3limit::WeierstrassFibration;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    /// Fibration JSON; relative paths resolve against the config file.
    pub fibration: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// A JSON-lines path, or `"off"`.
    pub cache: Option<String>,
    pub seed: u64,
    pub periods: PeriodsConfig,
    pub volume: VolumeConfig,
    pub metric: MetricConfig,
    pub sk: SkConfig,
    pub semiflat: SemiflatConfig,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            fibration: None,
            out: None,
            cache: None,
            seed: DEFAULT_SEED,
            periods: PeriodsConfig::default(),
            volume: VolumeConfig::default(),
            metric: MetricConfig::default(),
            sk: SkConfig::default(),
            semiflat: SemiflatConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodsConfig {
    /// Random regular fibers drawn by `periods sample`.
    pub samples: usize,
    /// Sampling disc `|t| ≤ sample_radius`.
    pub sample_radius: f64,
    /// Minimum distance of a sample from the discriminant.
    pub clearance: f64,
    pub j_tolerance: f64,
    pub monodromy_tolerance: f64,
    /// Radii `ρ` of the untwisting check; the base-change sample is `|w| = ρ^{1/β}`.
    pub untwist_radii: Vec<f64>,
    pub untwist_tolerance: f64,
}

impl Default for PeriodsConfig {
    fn default() -> Self {
        PeriodsConfig {
            samples: 1000,
            sample_radius: 2.0,
            clearance: 1e-3,
            j_tolerance: 1e-8,
            monodromy_tolerance: 1e-6,
            untwist_radii: vec![1e-2, 1e-3, 1e-4],
            untwist_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    pub rho0: f64,
    pub levels: usize,
    pub angles: usize,
    /// Every fitted exponent must exceed this.
    pub alpha_floor: f64,
    pub alpha_tolerance: f64,
    pub svg: bool,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig {
            rho0: 1e-2,
            levels: 19,
            angles: 16,
            alpha_floor: -1.99,
            alpha_tolerance: 0.05,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub mesh: MeshParams,
    /// Base points `t` for `metric distance`.
    pub points: Vec<Complex64>,
    /// Base point of the distance-to-singular sequences.
    pub base_point: Complex64,
    pub area_tolerance: f64,
    pub diameter_tolerance: f64,
    /// Completion distances must exceed this multiple of the refinement gap.
    pub gap_factor: f64,
    pub bound_levels: usize,
    pub proportionality_samples: usize,
    pub proportionality_tolerance: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            mesh: MeshParams::default(),
            points: vec![c(0.3, -0.2), c(-1.1, 0.7), c(2.5, 1.5)],
            base_point: c(0.3, -0.2),
            area_tolerance: 1e-3,
            diameter_tolerance: 0.02,
            gap_factor: 10.0,
            bound_levels: 12,
            proportionality_samples: 10_000,
            proportionality_tolerance: 1e-6,
        }
    }
}

/// A polynomial prepotential given by global monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub center: Vec<Complex64>,
    pub radii: Vec<f64>,
    pub polarization: Vec<u32>,
    pub terms: Vec<Monomial>,
}

impl SeriesSpec {
    pub fn chart(&self) -> k3limit::Result<SpecialKahlerChart> {
        let f = SeriesPrepotential::from_global(self.terms.clone(), self.center.clone(), self.radii.clone())?;
        SpecialKahlerChart::series(f, self.polarization.clone())
    }
}

fn monomial(e: &[u32], coeff: Complex64) -> Monomial {
    Monomial {
        exponents: e.to_vec(),
        coeff,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkConfig {
    /// Grid points per real direction.
    pub grid: usize,
    pub shrink: f64,
    /// Center of the fibration-backed chart.
    pub fibration_center: Complex64,
    /// Chart radius as a fraction of the distance to the discriminant.
    pub radius_fraction: f64,
    /// The one-dimensional chart with `Z = y`.
    pub linear: SeriesSpec,
    pub series: SeriesSpec,
    /// Centers of charts rebased from `series`, for the cocycle check.
    pub rebased_centers: Vec<Vec<Complex64>>,
    pub hessian_tolerance: f64,
    pub monge_ampere_tolerance: f64,
    pub transition_tolerance: f64,
}

impl Default for SkConfig {
    fn default() -> Self {
        SkConfig {
            grid: 3,
            shrink: 0.9,
            fibration_center: c(0.3, -0.2),
            radius_fraction: 0.2,
            linear: SeriesSpec {
                center: vec![c(0.3, 1.0)],
                radii: vec![0.5],
                polarization: vec![1],
                terms: vec![monomial(&[3], c(1.0 / 6.0, 0.0))],
            },
            series: SeriesSpec {
                center: vec![c(0.1, 0.0), c(0.0, 0.1)],
                radii: vec![0.3, 0.3],
                polarization: vec![1, 3],
                terms: vec![
                    monomial(&[2, 0], c(0.1, 1.0)),
                    monomial(&[1, 1], c(0.3, 0.2)),
                    monomial(&[0, 2], c(-0.2, 0.75)),
                    monomial(&[3, 0], c(0.05, 0.02)),
                    monomial(&[1, 2], c(0.0, 0.04)),
                    monomial(&[2, 2], c(0.01, 0.0)),
                ],
            },
            rebased_centers: vec![vec![c(0.15, 0.05), c(0.02, 0.08)], vec![c(0.12, -0.03), c(-0.04, 0.1)]],
            hessian_tolerance: 1e-5,
            monge_ampere_tolerance: 1e-4,
            transition_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemiflatConfig {
    pub samples: usize,
    pub shrink: f64,
    pub fibration_center: Complex64,
    pub radius_fraction: f64,
    pub series: SeriesSpec,
    pub section: PolynomialSection,
    /// `t = 4^{-1}, …, 4^{-k}`.
    pub scaling_steps: u32,
    pub scaling_grid: usize,
    pub block_tolerance: f64,
    pub square_tolerance: f64,
    pub volume_tolerance: f64,
    pub quaternion_tolerance: f64,
    pub expected_slope: f64,
    pub slope_tolerance: f64,
}

impl Default for SemiflatConfig {
    fn default() -> Self {
        let one = c(1.0, 0.0);
        SemiflatConfig {
            samples: 1000,
            shrink: 0.95,
            fibration_center: c(0.3, -0.2),
            radius_fraction: 0.2,
            series: SeriesSpec {
                center: vec![c(0.0, 1.0), c(0.0, 1.0)],
                radii: vec![0.5, 0.5],
                polarization: vec![1, 1],
                terms: vec![
                    monomial(&[3, 0], one / 6.0),
                    monomial(&[0, 3], one / 6.0),
                    monomial(&[1, 1], one),
                ],
            },
            section: PolynomialSection {
                components: vec![vec![monomial(&[0, 2], one)], vec![]],
            },
            scaling_steps: 10,
            scaling_grid: 2,
            block_tolerance: 1e-10,
            square_tolerance: 1e-12,
            volume_tolerance: 1e-8,
            quaternion_tolerance: 1e-8,
            expected_slope: 0.5,
            slope_tolerance: 0.02,
        }
    }
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<JobConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: JobConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(f) = &cfg.fibration {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.fibration = Some(dir.join(f));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.periods;
        let v = &self.volume;
        let m = &self.metric;
        let s = &self.sk;
        let f = &self.semiflat;
        let tolerances = [
            ("periods.clearance", p.clearance),
            ("periods.j_tolerance", p.j_tolerance),
            ("periods.monodromy_tolerance", p.monodromy_tolerance),
            ("periods.untwist_tolerance", p.untwist_tolerance),
            ("volume.alpha_tolerance", v.alpha_tolerance),
            ("metric.area_tolerance", m.area_tolerance),
            ("metric.diameter_tolerance", m.diameter_tolerance),
            ("metric.gap_factor", m.gap_factor),
            ("metric.proportionality_tolerance", m.proportionality_tolerance),
            ("sk.hessian_tolerance", s.hessian_tolerance),
            ("sk.monge_ampere_tolerance", s.monge_ampere_tolerance),
            ("sk.transition_tolerance", s.transition_tolerance),
            ("semiflat.block_tolerance", f.block_tolerance),
            ("semiflat.square_tolerance", f.square_tolerance),
            ("semiflat.volume_tolerance", f.volume_tolerance),
            ("semiflat.quaternion_tolerance", f.quaternion_tolerance),
            ("semiflat.slope_tolerance", f.slope_tolerance),
        ];
        for (name, x) in tolerances {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {x}")));
            }
        }
        let positive = [
            ("periods.sample_radius", p.sample_radius),
            ("volume.rho0", v.rho0),
            ("sk.shrink", s.shrink),
            ("sk.radius_fraction", s.radius_fraction),
            ("semiflat.shrink", f.shrink),
            ("semiflat.radius_fraction", f.radius_fraction),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if p.untwist_radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(CliError::Config("periods.untwist_radii must lie in (0, 1)".into()));
        }
        if s.shrink > 1.0 || f.shrink > 1.0 || s.radius_fraction >= 1.0 || f.radius_fraction >= 1.0 {
            return Err(CliError::Config("shrink factors and radius fractions must be at most 1".into()));
        }
        if s.grid == 0 || f.scaling_grid == 0 || f.scaling_steps < 2 || v.angles == 0 {
            return Err(CliError::Config("grids, angle counts and scaling steps must be positive".into()));
        }
        Ok(())
    }

    pub fn fibration(&self) -> Result<WeierstrassFibration, CliError> {
        let Some(path) = &self.fibration else {
            return Ok(default_generic_k3());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let json: FibrationJson =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        WeierstrassFibration::from_json(&json).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = JobConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<JobConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_configs_fill_in_defaults() {
        let cfg: JobConfig = serde_json::from_str(r#"{"seed": 3, "periods": {"samples": 10}}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.periods.samples, 10);
        assert_eq!(cfg.periods.j_tolerance, 1e-8);
        assert_eq!(cfg.metric, MetricConfig::default());
    }

    #[test]
    fn nonpositive_tolerances_are_rejected() {
        let mut cfg = JobConfig::default();
        cfg.sk.hessian_tolerance = 0.0;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = JobConfig::default();
        cfg.semiflat.slope_tolerance = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_configuration_errors() {
        assert!(serde_json::from_str::<JobConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn default_charts_build() {
        let s = SkConfig::default();
        assert_eq!(s.linear.chart().unwrap().dim(), 1);
        assert_eq!(s.series.chart().unwrap().dim(), 2);
        assert_eq!(SemiflatConfig::default().series.chart().unwrap().dim(), 2);
    }
}
