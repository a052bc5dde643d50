use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConnectionFunction;
use crate::quad::{integrate_with_breaks, QuadOptions};

/// Periodic lattice with `cells` points per axis and spacing `spacing`.
///
/// Index `i` along an axis represents the coordinate `i * h` for `i < N/2` and
/// `(i - N) * h` otherwise, so the origin is index 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dimension: usize,
    pub cells: usize,
    pub spacing: f64,
}

impl GridGeometry {
    pub fn new(dimension: usize, cells: usize, spacing: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("grid dimension must be at least 1".into()));
        }
        if cells < 2 || !cells.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("cells per axis must be a power of two, got {cells}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(Self {
            dimension,
            cells,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Side length `N * h` of the periodic cell.
    pub fn length(&self) -> f64 {
        self.cells as f64 * self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    /// Signed lattice offset of axis index `i`.
    #[inline]
    pub fn signed(&self, i: usize) -> isize {
        if i < self.cells / 2 {
            i as isize
        } else {
            i as isize - self.cells as isize
        }
    }

    /// Per-axis indices of a flat (row-major) index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dimension];
        for a in (0..self.dimension).rev() {
            idx[a] = flat % self.cells;
            flat /= self.cells;
        }
        idx
    }

    pub fn offsets(&self, flat: usize) -> Vec<isize> {
        self.unflatten(flat).into_iter().map(|i| self.signed(i)).collect()
    }

    /// Flat index of an integer lattice offset, wrapped periodically.
    #[inline]
    pub fn flat_of_offsets(&self, offsets: &[isize]) -> usize {
        let n = self.cells as isize;
        offsets.iter().fold(0usize, |acc, &o| acc * self.cells + o.rem_euclid(n) as usize)
    }

    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        self.offsets(flat).into_iter().map(|o| o as f64 * self.spacing).collect()
    }

    /// Flat index of the cell whose offset is `-offset` of `flat`.
    pub fn mirror(&self, flat: usize) -> usize {
        let neg: Vec<isize> = self.offsets(flat).into_iter().map(|o| -o).collect();
        self.flat_of_offsets(&neg)
    }

    pub fn check_support(&self, support: f64) -> Result<()> {
        if self.length() < 2.0 * support {
            return Err(Error::WraparoundGuard {
                grid_length: self.length(),
                support,
            });
        }
        Ok(())
    }
}

/// Real function on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            values: vec![0.0; geometry.len()],
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Parse(format!("expected {} grid values, got {}", geometry.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("grid values must be finite".into()));
        }
        Ok(Self { geometry, values })
    }

    pub fn from_fn<F: FnMut(&[f64]) -> f64>(geometry: GridGeometry, mut f: F) -> Self {
        let values = (0..geometry.len()).map(|i| f(&geometry.coordinates(i))).collect();
        Self { geometry, values }
    }

    /// Grid with `1 / h^d` at the origin: the discrete identity for [`super::convolve`].
    pub fn delta(geometry: GridGeometry) -> Self {
        let mut g = Self::zeros(geometry);
        g.values[0] = 1.0 / geometry.cell_volume();
        g
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at_offsets(&self, offsets: &[isize]) -> f64 {
        self.values[self.geometry.flat_of_offsets(offsets)]
    }

    /// Value at the grid point nearest to `x`.
    pub fn at_point(&self, x: &[f64]) -> f64 {
        let off: Vec<isize> = x.iter().map(|c| (c / self.geometry.spacing).round() as isize).collect();
        self.at_offsets(&off)
    }

    /// Riemann sum `sum(values) * h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.geometry.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_same_geometry(&self, other: &GridFunction) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch);
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_geometry(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &GridFunction, scale: f64) -> Result<GridFunction> {
        self.check_same_geometry(other)?;
        Ok(Self {
            geometry: self.geometry,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + scale * b).collect(),
        })
    }

    pub fn add_scaled_in_place(&mut self, other: &GridFunction, scale: f64) -> Result<()> {
        self.check_same_geometry(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scaled(&self, scale: f64) -> GridFunction {
        Self {
            geometry: self.geometry,
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }

    /// Largest `|f(x) - f(-x)|`.
    pub fn evenness_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[i] - self.values[self.geometry.mirror(i)]).abs())
            .fold(0.0, f64::max)
    }

    /// Share of `|f|` mass on cells farther than `radius` from the origin
    /// (in sup-norm of the lattice offsets).
    pub fn mass_beyond(&self, radius: f64) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = (0..self.values.len())
            .filter(|&i| {
                self.geometry
                    .offsets(i)
                    .iter()
                    .any(|&o| (o.unsigned_abs() as f64) * self.geometry.spacing > radius)
            })
            .map(|i| self.values[i].abs())
            .sum();
        outside / total
    }

    /// CSV with header `index,coordinate,value`. For `d > 1` the coordinate
    /// components are joined with `;`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,coordinate,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let c: Vec<String> = self.geometry.coordinates(i).iter().map(|c| c.to_string()).collect();
            writeln!(w, "{i},{},{v}", c.join(";"))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid CSV".into()))??;
        if header.trim() != "index,coordinate,value" {
            return Err(Error::Parse(format!("unexpected grid CSV header {header:?}")));
        }
        let mut values = Vec::new();
        let mut dimension = None;
        let mut spacing = None;
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("grid CSV row {row}: expected 3 fields")));
            }
            let index: usize = fields[0].parse().map_err(|_| Error::Parse(format!("bad index on row {row}")))?;
            if index != row {
                return Err(Error::Parse(format!("grid CSV rows out of order at row {row}")));
            }
            let coords: Vec<f64> = fields[1]
                .split(';')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad coordinate on row {row}")))?;
            dimension.get_or_insert(coords.len());
            if row == 1 {
                spacing = coords.last().copied();
            }
            values.push(
                fields[2]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value on row {row}")))?,
            );
        }
        let d = dimension.ok_or_else(|| Error::Parse("grid CSV has no rows".into()))?;
        let n = (values.len() as f64).powf(1.0 / d as f64).round() as usize;
        let h = spacing.ok_or_else(|| Error::Parse("grid CSV needs at least two rows".into()))?;
        let geometry = GridGeometry::new(d, n, h)?;
        Self::from_values(geometry, values)
    }

    /// Raw layout: `d: u64`, `N: u64`, `h: f64`, then `N^d` values as `f64`,
    /// all little-endian, row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.geometry.dimension as u64).to_le_bytes())?;
        w.write_all(&(self.geometry.cells as u64).to_le_bytes())?;
        w.write_all(&self.geometry.spacing.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let d = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let h = f64::from_le_bytes(word);
        if d == 0 || d > 8 || n > (1 << 24) {
            return Err(Error::Parse(format!("implausible grid header d={d} N={n}")));
        }
        let geometry = GridGeometry::new(d, n, h)?;
        let mut values = Vec::with_capacity(geometry.len());
        for _ in 0..geometry.len() {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Self::from_values(geometry, values)
    }
}

/// A function of `|x|` that can be laid onto a grid.
pub trait RadialFunction {
    fn radial_value(&self, r: f64) -> f64;
    /// Radius beyond which the function vanishes.
    fn support_radius(&self) -> f64;
    /// Radii where the function is not smooth.
    fn radial_breakpoints(&self) -> Vec<f64>;
}

impl RadialFunction for ConnectionFunction {
    fn radial_value(&self, r: f64) -> f64 {
        self.eval_radial(r)
    }

    fn support_radius(&self) -> f64 {
        self.truncation_radius()
    }

    fn radial_breakpoints(&self) -> Vec<f64> {
        ConnectionFunction::radial_breakpoints(self)
    }
}

/// How a radial function is turned into cell values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Value at the cell's lattice point.
    #[default]
    CellCenter,
    /// Mean over the cell `[x - h/2, x + h/2]^d`. Exact for piecewise linear
    /// profiles in d = 1; sub-sampled (8 points per axis) otherwise.
    CellAverage,
}

pub fn grid_from_radial<F: RadialFunction + ?Sized>(
    f: &F,
    geometry: GridGeometry,
    sampling: Sampling,
) -> Result<GridFunction> {
    geometry.check_support(f.support_radius())?;
    let h = geometry.spacing;
    let values = match sampling {
        Sampling::CellCenter => (0..geometry.len())
            .map(|i| {
                let x = geometry.coordinates(i);
                f.radial_value(x.iter().map(|c| c * c).sum::<f64>().sqrt())
            })
            .collect(),
        Sampling::CellAverage if geometry.dimension == 1 => {
            let breaks = f.radial_breakpoints();
            let opts = QuadOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-13,
                max_depth: 30,
            };
            (0..geometry.len())
                .map(|i| {
                    let c = geometry.signed(i) as f64 * h;
                    let (a, b) = (c - 0.5 * h, c + 0.5 * h);
                    if a.abs().min(b.abs()) > f.support_radius() && a * b > 0.0 {
                        return 0.0;
                    }
                    let mut pts = vec![a, b];
                    for &r in breaks.iter().chain(std::iter::once(&0.0)) {
                        for s in [r, -r] {
                            if s > a && s < b {
                                pts.push(s);
                            }
                        }
                    }
                    integrate_with_breaks(|y| f.radial_value(y.abs()), &pts, &opts).value / h
                })
                .collect()
        }
        Sampling::CellAverage => {
            let m = 8usize;
            let d = geometry.dimension;
            let sub = m.pow(d as u32);
            (0..geometry.len())
                .map(|i| {
                    let c = geometry.coordinates(i);
                    let mut acc = 0.0;
                    for s in 0..sub {
                        let mut code = s;
                        let mut r2 = 0.0;
                        for a in 0..d {
                            let k = code % m;
                            code /= m;
                            let y = c[a] + h * ((k as f64 + 0.5) / m as f64 - 0.5);
                            r2 += y * y;
                        }
                        acc += f.radial_value(r2.sqrt());
                    }
                    acc / sub as f64
                })
                .collect()
        }
    };
    Ok(GridFunction { geometry, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gilbert_grid_cell_center() {
        let g = GridGeometry::new(1, 256, 0.05).unwrap();
        let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
        let f = grid_from_radial(&phi, g, Sampling::CellCenter).unwrap();
        for i in 0..g.len() {
            let x = g.coordinates(i)[0];
            let expected = if x.abs() <= 1.0 + 1e-12 { 1.0 } else { 0.0 };
            assert_eq!(f.values()[i], expected, "x = {x}");
        }
        assert!((f.integral() - 2.0).abs() <= 0.05 * (1.0 + 1e-9));
    }

    #[test]
    fn cell_average_integrates_exactly_in_1d() {
        let g = GridGeometry::new(1, 256, 0.03).unwrap();
        let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
        let f = grid_from_radial(&phi, g, Sampling::CellAverage).unwrap();
        assert!((f.integral() - 2.0).abs() < 1e-12);
        let e = ConnectionFunction::exponential(1, 4.0).unwrap();
        let g = GridGeometry::new(1, 1024, 0.02).unwrap();
        let f = grid_from_radial(&e, g, Sampling::CellAverage).unwrap();
        assert!((f.integral() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn zero_profile_and_guard() {
        struct Zero;
        impl RadialFunction for Zero {
            fn radial_value(&self, _: f64) -> f64 {
                0.0
            }
            fn support_radius(&self) -> f64 {
                1.0
            }
            fn radial_breakpoints(&self) -> Vec<f64> {
                vec![]
            }
        }
        let g = GridGeometry::new(2, 16, 0.25).unwrap();
        let f = grid_from_radial(&Zero, g, Sampling::CellCenter).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        let small = GridGeometry::new(1, 8, 0.2).unwrap();
        assert!(matches!(
            grid_from_radial(&ConnectionFunction::gilbert(1, 1.0).unwrap(), small, Sampling::CellCenter),
            Err(Error::WraparoundGuard { .. })
        ));
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let g = GridGeometry::new(2, 8, 0.3).unwrap();
        let f = GridFunction::from_fn(g, |x| (x[0] - 0.1 * x[1]).sin() / 3.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        let mut bin = Vec::new();
        f.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 24 + 8 * 64);
        assert_eq!(&bin[0..8], &2u64.to_le_bytes());
        assert_eq!(&bin[8..16], &8u64.to_le_bytes());
        assert_eq!(GridFunction::read_binary(bin.as_slice()).unwrap(), f);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridGeometry::new(1, 100, 0.1).is_err());
        assert!(GridGeometry::new(1, 128, 0.0).is_err());
        let g = GridGeometry::new(1, 8, 1.0).unwrap();
        assert!(GridFunction::from_values(g, vec![0.0; 7]).is_err());
        assert!(GridFunction::read_csv("index,value\n".as_bytes()).is_err());
    }

    #[test]
    fn signed_offsets_wrap() {
        let g = GridGeometry::new(1, 8, 0.5).unwrap();
        assert_eq!(g.coordinates(3), vec![1.5]);
        assert_eq!(g.coordinates(4), vec![-2.0]);
        assert_eq!(g.coordinates(7), vec![-0.5]);
        assert_eq!(g.mirror(1), 7);
        assert_eq!(g.flat_of_offsets(&[-1]), 7);
    }
}
