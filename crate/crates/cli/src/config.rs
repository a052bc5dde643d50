//! Run configuration: a TOML file with `[model]`, `[box]`, `[run]` and
//! `[output]` sections. Every field has a desk-scale default and unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rcm_oze::expansion::{DiscretePhi, IntegrationMethod};
use rcm_oze::model::{Boundary, BoxGeometry, ConnectionFunction};
use rcm_oze::oze::GridGeometry;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKindConfig {
    Gilbert,
    Exponential,
    RadialTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: PhiKindConfig,
    pub dimension: usize,
    /// Gilbert radius.
    pub radius: Option<f64>,
    /// Exponential decay rate.
    pub rate: Option<f64>,
    /// Radial-table knots.
    pub radii: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: PhiKindConfig::Gilbert,
            dimension: 1,
            radius: Some(1.0),
            rate: None,
            radii: None,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxConfig {
    pub side_length: f64,
    pub boundary: Boundary,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            side_length: 40.0,
            boundary: Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationConfig {
    Elimination,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Intensity for the estimators and the OZE solve.
    pub t: f64,
    pub seed: u64,
    /// Replicates per probe or per estimator.
    pub replicates: u64,
    /// Replicates per bin of the radial pair-connectedness profile.
    pub profile_replicates: u64,
    /// Probe radii along the first axis; empty means bin centres of the
    /// radial profile.
    pub probes: Vec<f64>,
    /// Radial profile bin width; defaults to truncation radius / 20.
    pub bin_width: Option<f64>,
    /// Radial profile extent; defaults to 12 truncation radii, capped by the
    /// half box.
    pub r_max: Option<f64>,
    /// Largest tabulated cluster size.
    pub max_size: usize,
    /// Cells per axis of the OZE grid (power of two).
    pub grid_cells: Option<usize>,
    pub grid_spacing: Option<f64>,
    pub expansion_order: usize,
    pub expansion_cells: Option<usize>,
    pub expansion_spacing: Option<f64>,
    pub integration: IntegrationConfig,
    /// Monte Carlo draws per output cell when `integration = "monte-carlo"`.
    pub integration_samples: u64,
    /// Intensity of the series-versus-simulation comparison.
    pub series_t: f64,
    /// Intensity of the Neumann-versus-spectral comparison.
    pub neumann_t: f64,
    /// Subcritical bound for the mean-size estimators; defaults to 1 / m_phi.
    pub subcritical_bound: Option<f64>,
    pub sigma_tolerance: f64,
    pub residual_tolerance: f64,
    pub neumann_tolerance: f64,
    pub recursion_tolerance: f64,
    pub neumann_max_terms: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t: 0.2,
            seed: 1,
            replicates: 100_000,
            profile_replicates: 20_000,
            probes: vec![],
            bin_width: None,
            r_max: None,
            max_size: 10,
            grid_cells: None,
            grid_spacing: None,
            expansion_order: 3,
            expansion_cells: None,
            expansion_spacing: None,
            integration: IntegrationConfig::Elimination,
            integration_samples: 4000,
            series_t: 0.05,
            neumann_t: 0.1,
            subcritical_bound: None,
            sigma_tolerance: 3.0,
            residual_tolerance: 1e-10,
            neumann_tolerance: 1e-8,
            recursion_tolerance: 1e-6,
            neumann_max_terms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(rename = "box")]
    pub geometry: BoxConfig,
    pub run: RunSection,
    pub output: OutputConfig,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let r = &self.run;
        if !(r.t >= 0.0 && r.t.is_finite()) {
            return Err(CliError::Config(format!("run.t must be non-negative, got {}", r.t)));
        }
        for (name, v) in [
            ("run.series_t", r.series_t),
            ("run.neumann_t", r.neumann_t),
            ("run.sigma_tolerance", r.sigma_tolerance),
            ("run.residual_tolerance", r.residual_tolerance),
            ("run.neumann_tolerance", r.neumann_tolerance),
            ("run.recursion_tolerance", r.recursion_tolerance),
            ("box.side_length", self.geometry.side_length),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("run.bin_width", r.bin_width),
            ("run.r_max", r.r_max),
            ("run.grid_spacing", r.grid_spacing),
            ("run.expansion_spacing", r.expansion_spacing),
            ("run.subcritical_bound", r.subcritical_bound),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if r.replicates == 0 || r.profile_replicates == 0 || r.max_size == 0 || r.neumann_max_terms == 0 {
            return Err(CliError::Config(
                "run.replicates, run.profile_replicates, run.max_size and run.neumann_max_terms must be positive".into(),
            ));
        }
        if r.integration == IntegrationConfig::MonteCarlo && r.integration_samples < 2 {
            return Err(CliError::Config("run.integration_samples must be at least 2".into()));
        }
        if r.probes.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Config("run.probes must be finite".into()));
        }
        let phi = self.connection()?;
        self.box_geometry()?.check_compatible(&phi).map_err(|e| CliError::Config(e.to_string()))?;
        self.grid_geometry()?;
        self.expansion_geometry()?;
        Ok(())
    }

    pub fn connection(&self) -> Result<ConnectionFunction, CliError> {
        let m = &self.model;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Config(format!("model.{name} is required for this kind")))
        };
        let phi = match m.kind {
            PhiKindConfig::Gilbert => ConnectionFunction::gilbert(m.dimension, need(m.radius, "radius")?),
            PhiKindConfig::Exponential => ConnectionFunction::exponential(m.dimension, need(m.rate, "rate")?),
            PhiKindConfig::RadialTable => {
                let radii = m.radii.clone().ok_or_else(|| CliError::Config("model.radii is required".into()))?;
                let values = m.values.clone().ok_or_else(|| CliError::Config("model.values is required".into()))?;
                ConnectionFunction::radial_table(m.dimension, radii, values)
            }
        };
        phi.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn box_geometry(&self) -> Result<BoxGeometry, CliError> {
        BoxGeometry::new(self.model.dimension, self.geometry.side_length, self.geometry.boundary)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    fn scale(&self) -> f64 {
        self.connection().map(|p| p.truncation_radius()).unwrap_or(1.0)
    }

    /// Grid for the OZE solve: d = 1 uses N = 4096, h = R/64; higher
    /// dimensions N = 512, h = R/16.
    pub fn grid_geometry(&self) -> Result<GridGeometry, CliError> {
        let d = self.model.dimension;
        let (cells, div) = if d == 1 { (4096, 64.0) } else { (512, 16.0) };
        GridGeometry::new(
            d,
            self.run.grid_cells.unwrap_or(cells),
            self.run.grid_spacing.unwrap_or(self.scale() / div),
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Coarser grid for the graph integrals: N = 256, h = R/16.
    pub fn expansion_geometry(&self) -> Result<GridGeometry, CliError> {
        GridGeometry::new(
            self.model.dimension,
            self.run.expansion_cells.unwrap_or(256),
            self.run.expansion_spacing.unwrap_or(self.scale() / 16.0),
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn discrete_phi(&self) -> Result<DiscretePhi, CliError> {
        Ok(DiscretePhi::new(&self.connection()?, self.expansion_geometry()?)?)
    }

    pub fn integration(&self) -> IntegrationMethod {
        match self.run.integration {
            IntegrationConfig::Elimination => IntegrationMethod::Elimination,
            IntegrationConfig::MonteCarlo => IntegrationMethod::MonteCarlo {
                samples: self.run.integration_samples,
                seed: self.run.seed,
            },
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.run.bin_width.unwrap_or(self.scale() / 20.0)
    }

    pub fn r_max(&self) -> f64 {
        let cap = 0.5 * self.geometry.side_length - self.bin_width();
        self.run.r_max.unwrap_or(12.0 * self.scale()).min(cap)
    }

    pub fn probe_points(&self) -> Vec<Vec<f64>> {
        let d = self.model.dimension;
        self.run
            .probes
            .iter()
            .map(|&r| {
                let mut x = vec![0.0; d];
                x[0] = r;
                x
            })
            .collect()
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
