//! Subcommand bodies. Each writes its files under the output directory and
//! returns the paths it wrote.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use rcm_oze::expansion::{
    assemble_up_to, coefficient_bound, enum_connected_graphs, recursion_check, series_p, series_q,
    write_graph_list, CoefficientGrid,
};
use rcm_oze::mc::{estimate_cluster_size_dist, estimate_pairconn, radial_probes, EstimateTable, RadialProfile, TABLE_HEADER};
use rcm_oze::model::sample_rcm;
use rcm_oze::oze::{grid_from_radial, mean_cluster_from_q, oze_residual, solve_oze_fourier, GridFunction, Sampling};
use rcm_oze::RngSpec;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Output directory writer.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: vec![],
        })
    }

    pub fn write<F>(&mut self, name: &str, f: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Config(e.to_string()))?;
            writeln!(w).map_err(|e| CliError::io(Path::new(name), e))
        })
    }

    pub fn write_grid(&mut self, stem: &str, grid: &GridFunction, formats: &[Format]) -> Result<(), CliError> {
        if formats.contains(&Format::Csv) {
            self.write(&format!("{stem}.csv"), |w| Ok(grid.write_csv(w)?))?;
        }
        if formats.contains(&Format::Binary) {
            self.write(&format!("{stem}.bin"), |w| Ok(grid.write_binary(w)?))?;
        }
        Ok(())
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}

fn grid_formats(cfg: &RunConfig) -> Vec<Format> {
    let f: Vec<Format> = cfg.output.formats.iter().copied().filter(|f| *f != Format::Json).collect();
    if f.is_empty() {
        vec![Format::Csv]
    } else {
        f
    }
}

fn write_table(out: &mut Outputs, stem: &str, table: &EstimateTable) -> Result<(), CliError> {
    out.write(&format!("{stem}.csv"), |w| Ok(table.write_csv(w)?))?;
    out.write(&format!("{stem}.json"), |w| Ok(table.write_metadata_json(w)?))?;
    Ok(())
}

/// Pair-connectedness at the configured probes, or on the radial profile
/// bins when no probes are given.
pub fn pairconn(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let phi = cfg.connection()?;
    let geom = cfg.box_geometry()?;
    let (probes, reps) = if cfg.run.probes.is_empty() {
        (radial_probes(geom.dimension, cfg.bin_width(), cfg.r_max()), cfg.run.profile_replicates)
    } else {
        (cfg.probe_points(), cfg.run.replicates)
    };
    let table = estimate_pairconn(cfg.run.t, &phi, &geom, &probes, reps, cfg.run.seed)?;
    let mut out = Outputs::new(dir)?;
    write_table(&mut out, "pairconn", &table)?;
    Ok(out.into_written())
}

pub fn cluster_dist(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let phi = cfg.connection()?;
    let geom = cfg.box_geometry()?;
    let table = estimate_cluster_size_dist(cfg.run.t, &phi, &geom, cfg.run.max_size, cfg.run.replicates, cfg.run.seed)?;
    let mut out = Outputs::new(dir)?;
    write_table(&mut out, "cluster_dist", &table)?;
    Ok(out.into_written())
}

/// Format of a `P` input file for [`oze`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PInput {
    /// Pair-connectedness table on radial bin centres.
    EstimateTable,
    GridCsv,
    GridBinary,
}

/// Reads `P` from an estimate table, a grid CSV or a binary grid.
pub fn read_p(cfg: &RunConfig, path: &Path) -> Result<(GridFunction, PInput), CliError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or(&[]);
    let first = String::from_utf8_lossy(first);
    if first.trim() == TABLE_HEADER {
        let rows = EstimateTable::read_csv_rows(BufReader::new(bytes.as_slice()))?;
        let profile = RadialProfile::from_rows(cfg.model.dimension, &rows)?;
        let grid = grid_from_radial(&profile, cfg.grid_geometry()?, Sampling::CellAverage)?;
        Ok((grid, PInput::EstimateTable))
    } else if first.trim() == "index,coordinate,value" {
        Ok((GridFunction::read_csv(BufReader::new(bytes.as_slice()))?, PInput::GridCsv))
    } else {
        Ok((GridFunction::read_binary(bytes.as_slice())?, PInput::GridBinary))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OzeReport {
    pub input: PInput,
    pub t: f64,
    pub cells: usize,
    pub spacing: f64,
    pub residual: f64,
    pub min_denominator: f64,
    pub integral_p: f64,
    pub integral_q: f64,
    pub mean_cluster_size: f64,
}

/// Solves the OZE for `Q` given `P` in `input`. With `zero_intensity` the
/// solve runs at `t = 0`, so `Q = P`.
pub fn oze(cfg: &RunConfig, input: &Path, zero_intensity: bool, dir: &Path) -> Result<(Vec<PathBuf>, OzeReport), CliError> {
    let (p, kind) = read_p(cfg, input)?;
    let t = if zero_intensity { 0.0 } else { cfg.run.t };
    let sol = solve_oze_fourier(&p, t)?;
    let residual = oze_residual(&p, &sol.q, t)?;
    let mean = mean_cluster_from_q(&sol.q, t)?;
    let report = OzeReport {
        input: kind,
        t,
        cells: p.geometry().cells,
        spacing: p.geometry().spacing,
        residual,
        min_denominator: sol.min_denominator,
        integral_p: p.integral(),
        integral_q: mean.integral_q,
        mean_cluster_size: mean.mean_size,
    };
    let mut out = Outputs::new(dir)?;
    match kind {
        PInput::GridBinary => {
            out.write("q.bin", |w| Ok(sol.q.write_binary(w)?))?;
        }
        PInput::GridCsv => {
            out.write("q.csv", |w| Ok(sol.q.write_csv(w)?))?;
        }
        PInput::EstimateTable => {
            out.write_grid("p", &p, &grid_formats(cfg))?;
            out.write_grid("q", &sol.q, &grid_formats(cfg))?;
        }
    }
    out.write_json("oze.json", &report)?;
    Ok((out.into_written(), report))
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderSummary {
    pub order: usize,
    pub graph_count: usize,
    pub graphs_used_p: usize,
    pub graphs_used_q: usize,
    pub method: String,
    pub sup_p: f64,
    pub sup_q: f64,
    pub bound_p: f64,
    /// Sup distance between the kappa/J and pi/I forms of `p_n`, or the
    /// largest Monte Carlo standard error.
    pub p_error_estimate: f64,
    pub q_error_estimate: f64,
    pub recursion_residual: f64,
    pub recursion_relative: f64,
    pub recursion_max_z: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSummary {
    pub t: f64,
    pub order: usize,
    pub tail_bound_p: f64,
    pub tail_bound_q: f64,
    pub c1_p: f64,
    pub c2_p: f64,
    pub c1_q: f64,
    pub c2_q: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandReport {
    pub cells: usize,
    pub spacing: f64,
    pub discrete_mass: f64,
    pub orders: Vec<OrderSummary>,
    pub series: SeriesSummary,
}

fn write_coefficient(out: &mut Outputs, c: &CoefficientGrid, stem: &str, formats: &[Format]) -> Result<(), CliError> {
    out.write_grid(stem, &c.values, formats)
}

/// Coefficients `p_n`, `q_n` for `n <= expansion_order`, with the graph lists,
/// recursion residuals and the series at `run.t`.
pub fn expand(cfg: &RunConfig, dir: &Path) -> Result<(Vec<PathBuf>, ExpandReport), CliError> {
    let phi = cfg.discrete_phi()?;
    let order = cfg.run.expansion_order;
    let coeffs = assemble_up_to(order, &phi, cfg.integration())?;
    let formats = grid_formats(cfg);
    let mut out = Outputs::new(dir)?;
    out.write_grid("phi", phi.grid(), &formats)?;
    let mut orders = Vec::new();
    let mut summary = String::new();
    for (n, c) in coeffs.iter().enumerate() {
        write_coefficient(&mut out, &c.p, &format!("p_{n}"), &formats)?;
        write_coefficient(&mut out, &c.q, &format!("q_{n}"), &formats)?;
        let graphs = enum_connected_graphs(n)?;
        out.write(&format!("graphs_{n}.txt"), |w| Ok(write_graph_list(&graphs, w)?))?;
        let rec = recursion_check(&coeffs, n)?;
        summary.push_str(&format!("graphs n={n}: {}\n", c.graph_count));
        summary.push_str(&format!(
            "recursion n={n}: residual {:e} relative {:e}\n",
            rec.residual, rec.relative
        ));
        summary.push_str(&format!("cross-check n={n}: {:e}\n", c.p.error_estimate));
        orders.push(OrderSummary {
            order: n,
            graph_count: c.graph_count,
            graphs_used_p: c.p.graphs_used,
            graphs_used_q: c.q.graphs_used,
            method: c.p.method.tag().into(),
            sup_p: c.p.values.sup_norm(),
            sup_q: c.q.values.sup_norm(),
            bound_p: coefficient_bound(n, phi.mass()),
            p_error_estimate: c.p.error_estimate,
            q_error_estimate: c.q.error_estimate,
            recursion_residual: rec.residual,
            recursion_relative: rec.relative,
            recursion_max_z: rec.max_z,
        });
    }
    let sp = series_p(cfg.run.t, &coeffs, phi.mass())?;
    let sq = series_q(cfg.run.t, &coeffs, phi.mass())?;
    out.write_grid("series_p", &sp.values, &formats)?;
    out.write_grid("series_q", &sq.values, &formats)?;
    let mut warnings = sp.warnings.clone();
    warnings.extend(sq.warnings.iter().cloned());
    let report = ExpandReport {
        cells: phi.geometry().cells,
        spacing: phi.geometry().spacing,
        discrete_mass: phi.mass(),
        orders,
        series: SeriesSummary {
            t: cfg.run.t,
            order,
            tail_bound_p: sp.tail_bound,
            tail_bound_q: sq.tail_bound,
            c1_p: sp.c1,
            c2_p: sp.c2,
            c1_q: sq.c1,
            c2_q: sq.c2,
            warnings,
        },
    };
    out.write("summary.txt", |w| w.write_all(summary.as_bytes()).map_err(|e| CliError::io(Path::new("summary.txt"), e)))?;
    out.write_json("expand.json", &report)?;
    Ok((out.into_written(), report))
}

/// One realisation, pinned at the configured probes: `points.csv` and
/// `edges.csv`.
pub fn sample(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let phi = cfg.connection()?;
    let geom = cfg.box_geometry()?;
    let pins = cfg.probe_points();
    let s = sample_rcm(cfg.run.t, &phi, &geom, &pins, RngSpec::new(cfg.run.seed, 0))?;
    let mut out = Outputs::new(dir)?;
    out.write("points.csv", |w| Ok(s.write_points_csv(w)?))?;
    out.write("edges.csv", |w| Ok(s.write_edges_csv(w)?))?;
    Ok(out.into_written())
}
