//! Piecewise-trapezoidal discretization of a channel.
//!
//! The width `σ(x, z)` and bottom `B(x)` are sampled once at the cell
//! interfaces `x_{j+1/2}` and on a uniform vertical grid `z_l`. Cell data are
//! arithmetic means of the two bounding interface samples. Between two
//! vertical levels the width is linear, so every cross-section is a stack of
//! trapezoidal slabs and all area, perimeter and moment integrals below are
//! evaluated exactly on that representation.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-positive width {value} at (x = {x}, z = {z})")]
    NonPositiveWidth { x: f64, z: f64, value: f64 },
    #[error("inverted bounds: base {base} above top {top}")]
    InvertedBounds { base: f64, top: f64 },
    #[error("elevation {z} outside vertical grid [{lo}, {hi}]")]
    OutOfRange { z: f64, lo: f64, hi: f64 },
    #[error("area {target} exceeds column capacity {capacity} (vertical grid overflow)")]
    Overflow { target: f64, capacity: f64 },
    #[error("negative target area {0}")]
    NegativeArea(f64),
    #[error("non-positive perimeter {0}")]
    NonPositivePerimeter(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("geometry table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Relative slack used when an elevation sits on the edge of the vertical grid.
const EDGE_SLACK: f64 = 1e-12;

/// Owned trapezoidal column, mostly useful for standalone computations and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnData {
    z0: f64,
    dz: f64,
    widths: Vec<f64>,
    cum_area: Vec<f64>,
    cum_perimeter: Vec<f64>,
}

impl ColumnData {
    /// Column starting at `z0` with widths sampled every `dz`.
    pub fn new(z0: f64, dz: f64, widths: Vec<f64>) -> Result<Self> {
        if !(dz > 0.0) {
            return Err(GeometryError::InvalidGrid(format!("dz must be positive, got {dz}")));
        }
        if widths.len() < 2 {
            return Err(GeometryError::InvalidGrid("a column needs at least two levels".into()));
        }
        for (l, &w) in widths.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(GeometryError::NonPositiveWidth { x: f64::NAN, z: z0 + l as f64 * dz, value: w });
            }
        }
        let (cum_area, cum_perimeter) = cumulative_tables(&widths, dz);
        Ok(Self { z0, dz, widths, cum_area, cum_perimeter })
    }

    /// Samples `f` on `levels` points starting at `z0`.
    pub fn from_fn(z0: f64, dz: f64, levels: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let widths = (0..levels).map(|l| f(z0 + l as f64 * dz)).collect();
        Self::new(z0, dz, widths)
    }

    pub fn view(&self) -> Column<'_> {
        Column {
            z0: self.z0,
            dz: self.dz,
            widths: &self.widths,
            cum_area: &self.cum_area,
            cum_perimeter: &self.cum_perimeter,
        }
    }
}

fn cumulative_tables(widths: &[f64], dz: f64) -> (Vec<f64>, Vec<f64>) {
    let mut area = Vec::with_capacity(widths.len());
    let mut perim = Vec::with_capacity(widths.len());
    area.push(0.0);
    perim.push(0.0);
    for l in 0..widths.len() - 1 {
        let slope = (widths[l + 1] - widths[l]) / dz;
        area.push(area[l] + 0.5 * dz * (widths[l] + widths[l + 1]));
        perim.push(perim[l] + dz * (4.0 + slope * slope).sqrt());
    }
    (area, perim)
}

/// Borrowed view of one trapezoidal column: widths at `z0 + l·dz`, linear in between.
#[derive(Debug, Clone, Copy)]
pub struct Column<'a> {
    z0: f64,
    dz: f64,
    widths: &'a [f64],
    cum_area: &'a [f64],
    cum_perimeter: &'a [f64],
}

impl<'a> Column<'a> {
    pub fn bottom(&self) -> f64 {
        self.z0
    }

    pub fn top(&self) -> f64 {
        self.z0 + (self.widths.len() - 1) as f64 * self.dz
    }

    pub fn widths(&self) -> &'a [f64] {
        self.widths
    }

    /// Slab index and offset inside the slab for elevation `z`.
    fn locate(&self, z: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.z0, self.top());
        let slack = EDGE_SLACK * (1.0 + lo.abs().max(hi.abs()));
        if !(z >= lo - slack && z <= hi + slack) {
            return Err(GeometryError::OutOfRange { z, lo, hi });
        }
        let last = self.widths.len() - 2;
        let pos = (z - lo) / self.dz;
        // truncation is floor here since negative positions map to slab 0
        let l = if pos <= 0.0 { 0 } else { (pos as usize).min(last) };
        let t = (z - (lo + l as f64 * self.dz)).clamp(0.0, self.dz);
        Ok((l, t))
    }

    fn slope(&self, l: usize) -> f64 {
        (self.widths[l + 1] - self.widths[l]) / self.dz
    }

    /// Width at elevation `z` (linear interpolation inside the slab).
    pub fn width_at(&self, z: f64) -> Result<f64> {
        let (l, t) = self.locate(z)?;
        Ok(self.widths[l] + self.slope(l) * t)
    }

    /// Area between the bottom of the vertical grid and `z`.
    pub fn area_below(&self, z: f64) -> Result<f64> {
        let (l, t) = self.locate(z)?;
        Ok(self.cum_area[l] + t * (self.widths[l] + 0.5 * self.slope(l) * t))
    }

    /// `(area_below(z), width_at(z))` with a single slab lookup.
    pub fn area_and_width(&self, z: f64) -> Result<(f64, f64)> {
        let (l, t) = self.locate(z)?;
        let s = self.slope(l);
        Ok((self.cum_area[l] + t * (self.widths[l] + 0.5 * s * t), self.widths[l] + s * t))
    }

    fn perimeter_below(&self, z: f64) -> Result<f64> {
        let (l, t) = self.locate(z)?;
        let s = self.slope(l);
        Ok(self.cum_perimeter[l] + t * (4.0 + s * s).sqrt())
    }

    /// Exact integral of the width between `base` and `top`.
    pub fn wetted_area(&self, base: f64, top: f64) -> Result<f64> {
        if base > top {
            return Err(GeometryError::InvertedBounds { base, top });
        }
        Ok((self.area_below(top)? - self.area_below(base)?).max(0.0))
    }

    /// Elevation `w ≥ base` whose wetted area above `base` equals `target`.
    pub fn area_to_elevation(&self, base: f64, target: f64) -> Result<f64> {
        if !(target >= 0.0) {
            return Err(GeometryError::NegativeArea(target));
        }
        let below = self.area_below(base)?;
        if target == 0.0 {
            return Ok(base);
        }
        let goal = below + target;
        let capacity = self.cum_area[self.cum_area.len() - 1];
        if goal > capacity {
            return Err(GeometryError::Overflow { target, capacity: capacity - below });
        }
        let last = self.widths.len() - 2;
        let l = self.cum_area.partition_point(|&a| a <= goal).saturating_sub(1).min(last);
        let rem = goal - self.cum_area[l];
        let sigma = self.widths[l];
        let s = self.slope(l);
        let disc = sigma * sigma + 2.0 * s * rem;
        let z_l = self.z0 + l as f64 * self.dz;
        let t = if disc >= 0.0 {
            2.0 * rem / (sigma + disc.sqrt())
        } else {
            f64::NAN
        };
        let t = if t.is_finite() && t >= -1e-14 * self.dz && t <= self.dz * (1.0 + 1e-9) {
            t.clamp(0.0, self.dz)
        } else {
            self.bisect_slab(l, rem)
        };
        Ok((z_l + t).max(base))
    }

    fn bisect_slab(&self, l: usize, rem: f64) -> f64 {
        let sigma = self.widths[l];
        let s = self.slope(l);
        let (mut lo, mut hi) = (0.0, self.dz);
        for _ in 0..100 {
            if hi - lo <= 1e-14 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid * (sigma + 0.5 * s * mid) < rem {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `sigma_b + ∫ sqrt(4 + σ_z²) dz` between `base` and `top`.
    pub fn wetted_perimeter(&self, sigma_b: f64, base: f64, top: f64) -> Result<f64> {
        if base > top {
            return Err(GeometryError::InvertedBounds { base, top });
        }
        Ok(sigma_b + (self.perimeter_below(top)? - self.perimeter_below(base)?).max(0.0))
    }

    /// `∫_{base}^{top} (level - z) σ(z) dz`, exact on the trapezoidal column.
    pub fn moment(&self, base: f64, top: f64, level: f64) -> Result<f64> {
        integrate_weighted(self.z0, self.dz, self.widths.len(), base, top, level, |z| self.width_at(z))
    }

    #[cfg(test)]
    /// Plain `∫_{base}^{top} σ(z) dz` via the moment machinery (no cumulative tables).
    fn direct_area(&self, base: f64, top: f64) -> Result<f64> {
        integrate_weighted(self.z0, self.dz, self.widths.len(), base, top, f64::NAN, |z| self.width_at(z))
    }
}

/// Integrates `f` (piecewise linear on the grid) against `(level - z)`, or plainly
/// when `level` is NaN. Simpson's rule per aligned segment is exact for these integrands.
fn integrate_weighted(
    z0: f64,
    dz: f64,
    levels: usize,
    base: f64,
    top: f64,
    level: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if base > top {
        return Err(GeometryError::InvertedBounds { base, top });
    }
    let hi = z0 + (levels - 1) as f64 * dz;
    for z in [base, top] {
        let slack = EDGE_SLACK * (1.0 + z0.abs().max(hi.abs()));
        if !(z >= z0 - slack && z <= hi + slack) {
            return Err(GeometryError::OutOfRange { z, lo: z0, hi });
        }
    }
    if base == top {
        return Ok(0.0);
    }
    let weight = |z: f64| if level.is_nan() { 1.0 } else { level - z };
    let first = (((base - z0) / dz).floor().max(0.0) as usize).min(levels - 2);
    let mut total = 0.0;
    let mut a = base;
    let mut l = first;
    while a < top {
        let slab_top = (z0 + (l + 1) as f64 * dz).min(hi);
        let b = if l + 2 >= levels { top } else { slab_top.min(top) };
        if b > a {
            let m = 0.5 * (a + b);
            // Evaluate strictly inside the slab so the linear piece is unambiguous.
            let fa = f(a)?;
            let fb = f(b)?;
            let fm = f(m)?;
            total += (b - a) / 6.0 * (weight(a) * fa + 4.0 * weight(m) * fm + weight(b) * fb);
        }
        a = b;
        l += 1;
        if l + 1 >= levels {
            break;
        }
    }
    Ok(total)
}

/// Sampled channel: bottom and width tables plus derived cell averages.
#[derive(Clone, PartialEq)]
pub struct ChannelGeometry {
    n_cells: usize,
    dx: f64,
    dz: f64,
    x_interfaces: Vec<f64>,
    bottom_interface: Vec<f64>,
    bottom_cell: Vec<f64>,
    z_levels: Vec<f64>,
    width_interface: Vec<f64>,
    width_cell: Vec<f64>,
    area_interface: Vec<f64>,
    area_cell: Vec<f64>,
    perim_interface: Vec<f64>,
    perim_cell: Vec<f64>,
}

impl fmt::Debug for ChannelGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelGeometry")
            .field("n_cells", &self.n_cells)
            .field("dx", &self.dx)
            .field("dz", &self.dz)
            .field("levels", &self.z_levels.len())
            .finish_non_exhaustive()
    }
}

/// Samples `width_fn` and `bottom_fn` on `n_cells` cells over `domain` with
/// vertical spacing `dz` up to at least `z_top`.
pub fn build_channel(
    width_fn: impl Fn(f64, f64) -> f64,
    bottom_fn: impl Fn(f64) -> f64,
    domain: (f64, f64),
    n_cells: usize,
    dz: f64,
    z_top: f64,
) -> Result<ChannelGeometry> {
    let (a, b) = domain;
    if n_cells < 4 {
        return Err(GeometryError::InvalidGrid(format!("need at least 4 cells, got {n_cells}")));
    }
    if !(b > a) {
        return Err(GeometryError::InvalidGrid(format!("empty domain [{a}, {b}]")));
    }
    let dx = (b - a) / n_cells as f64;
    let x_interfaces: Vec<f64> = (0..=n_cells).map(|i| a + (b - a) * i as f64 / n_cells as f64).collect();
    let bottom_interface: Vec<f64> = x_interfaces.iter().map(|&x| bottom_fn(x)).collect();
    let z0 = bottom_interface.iter().copied().fold(f64::INFINITY, f64::min);
    let widths = |x: f64, z: f64| width_fn(x, z);
    ChannelGeometry::from_samples(x_interfaces, bottom_interface, z0, dz, z_top, dx, widths)
}

impl ChannelGeometry {
    fn from_samples(
        x_interfaces: Vec<f64>,
        bottom_interface: Vec<f64>,
        z0: f64,
        dz: f64,
        z_top: f64,
        dx: f64,
        width_fn: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if !(dz > 0.0) {
            return Err(GeometryError::InvalidGrid(format!("dz must be positive, got {dz}")));
        }
        let z_max_bottom = bottom_interface.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(z_top > z_max_bottom) {
            return Err(GeometryError::InvalidGrid(format!(
                "z_top {z_top} must exceed the highest bottom sample {z_max_bottom}"
            )));
        }
        let levels = ((z_top - z0) / dz - 1e-9).ceil() as usize + 1;
        let levels = levels.max(2);
        let z_levels: Vec<f64> = (0..levels).map(|l| z0 + l as f64 * dz).collect();
        let mut width_interface = Vec::with_capacity(x_interfaces.len() * levels);
        for &x in &x_interfaces {
            for &z in &z_levels {
                let w = width_fn(x, z);
                if !(w > 0.0) || !w.is_finite() {
                    return Err(GeometryError::NonPositiveWidth { x, z, value: w });
                }
                width_interface.push(w);
            }
        }
        Self::assemble(x_interfaces, bottom_interface, z_levels, dz, dx, width_interface)
    }

    fn assemble(
        x_interfaces: Vec<f64>,
        bottom_interface: Vec<f64>,
        z_levels: Vec<f64>,
        dz: f64,
        dx: f64,
        width_interface: Vec<f64>,
    ) -> Result<Self> {
        let n_cells = x_interfaces.len() - 1;
        let levels = z_levels.len();
        let bottom_cell = bottom_interface.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let mut width_cell = Vec::with_capacity(n_cells * levels);
        for j in 0..n_cells {
            let left = &width_interface[j * levels..(j + 1) * levels];
            let right = &width_interface[(j + 1) * levels..(j + 2) * levels];
            width_cell.extend(left.iter().zip(right).map(|(l, r)| 0.5 * (l + r)));
        }
        let tables = |table: &[f64]| {
            let mut area = Vec::with_capacity(table.len());
            let mut perim = Vec::with_capacity(table.len());
            for col in table.chunks(levels) {
                let (a, p) = cumulative_tables(col, dz);
                area.extend(a);
                perim.extend(p);
            }
            (area, perim)
        };
        let (area_interface, perim_interface) = tables(&width_interface);
        let (area_cell, perim_cell) = tables(&width_cell);
        Ok(Self {
            n_cells,
            dx,
            dz,
            x_interfaces,
            bottom_interface,
            bottom_cell,
            z_levels,
            width_interface,
            width_cell,
            area_interface,
            area_cell,
            perim_interface,
            perim_cell,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn n_levels(&self) -> usize {
        self.z_levels.len()
    }

    pub fn x_interfaces(&self) -> &[f64] {
        &self.x_interfaces
    }

    pub fn cell_center(&self, j: usize) -> f64 {
        0.5 * (self.x_interfaces[j] + self.x_interfaces[j + 1])
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| self.cell_center(j)).collect()
    }

    pub fn bottom_interface(&self) -> &[f64] {
        &self.bottom_interface
    }

    pub fn bottom_cell(&self) -> &[f64] {
        &self.bottom_cell
    }

    pub fn z_levels(&self) -> &[f64] {
        &self.z_levels
    }

    pub fn z_top(&self) -> f64 {
        self.z_levels[self.z_levels.len() - 1]
    }

    /// Row `i` of the interface width table, one value per vertical level.
    pub fn width_interface_row(&self, i: usize) -> &[f64] {
        let l = self.z_levels.len();
        &self.width_interface[i * l..(i + 1) * l]
    }

    pub fn width_cell_row(&self, j: usize) -> &[f64] {
        let l = self.z_levels.len();
        &self.width_cell[j * l..(j + 1) * l]
    }

    /// Trapezoidal column averaged over cell `j`.
    pub fn cell_column(&self, j: usize) -> Column<'_> {
        let l = self.z_levels.len();
        let r = j * l..(j + 1) * l;
        Column {
            z0: self.z_levels[0],
            dz: self.dz,
            widths: &self.width_cell[r.clone()],
            cum_area: &self.area_cell[r.clone()],
            cum_perimeter: &self.perim_cell[r],
        }
    }

    /// Raw sampled column at interface `i` (x_interfaces[i]).
    pub fn interface_column(&self, i: usize) -> Column<'_> {
        let l = self.z_levels.len();
        let r = i * l..(i + 1) * l;
        Column {
            z0: self.z_levels[0],
            dz: self.dz,
            widths: &self.width_interface[r.clone()],
            cum_area: &self.area_interface[r.clone()],
            cum_perimeter: &self.perim_interface[r],
        }
    }

    /// The four width-variation integrals of cell `j`:
    /// `I1 = ∫_B^{w1} (w1 - z)σ_x`, `I2 = ∫_{w1}^{w2} (w2 - z)σ_x`,
    /// `I3 = ∫_B^{w1} σ_x`, `I4 = ∫_B^{w2} σ_x`, with `σ_x` the centered
    /// divided difference of the two interface columns.
    pub fn width_x_integrals(&self, j: usize, w1: f64, w2: f64) -> Result<[f64; 4]> {
        let base = self.bottom_cell[j];
        if base > w1 {
            return Err(GeometryError::InvertedBounds { base, top: w1 });
        }
        if w1 > w2 {
            return Err(GeometryError::InvertedBounds { base: w1, top: w2 });
        }
        let left = self.interface_column(j);
        let right = self.interface_column(j + 1);
        let dx = self.dx;
        let sigma_x = |z: f64| -> Result<f64> { Ok((right.width_at(z)? - left.width_at(z)?) / dx) };
        let (z0, dz, n) = (self.z_levels[0], self.dz, self.z_levels.len());
        let i1 = integrate_weighted(z0, dz, n, base, w1, w1, sigma_x)?;
        let i2 = integrate_weighted(z0, dz, n, w1, w2, w2, sigma_x)?;
        let i3 = integrate_weighted(z0, dz, n, base, w1, f64::NAN, sigma_x)?;
        let i4 = integrate_weighted(z0, dz, n, base, w2, f64::NAN, sigma_x)?;
        Ok([i1, i2, i3, i4])
    }

    /// Reads a tabulated geometry: header `nx nz dx dz`, then `nx + 1` bottom
    /// values, then an `(nx + 1) × nz` width matrix. The first interface is at
    /// `x = 0` and the vertical grid starts at the lowest bottom sample.
    pub fn from_table_str(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| -> Result<&str> {
            tokens.next().ok_or_else(|| GeometryError::Table(format!("unexpected end of input reading {what}")))
        };
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| GeometryError::Table(format!("bad {what} `{s}`")))
        };
        let parse_f64 = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| GeometryError::Table(format!("bad {what} `{s}`")))
        };
        let nx = parse_usize(next("nx")?, "nx")?;
        let nz = parse_usize(next("nz")?, "nz")?;
        let dx = parse_f64(next("dx")?, "dx")?;
        let dz = parse_f64(next("dz")?, "dz")?;
        if nx < 4 || nz < 2 || !(dx > 0.0) || !(dz > 0.0) {
            return Err(GeometryError::Table(format!("invalid header {nx} {nz} {dx} {dz}")));
        }
        let mut bottom = Vec::with_capacity(nx + 1);
        for i in 0..=nx {
            bottom.push(parse_f64(next("bottom value")?, &format!("bottom value {i}"))?);
        }
        let mut widths = Vec::with_capacity((nx + 1) * nz);
        for k in 0..(nx + 1) * nz {
            widths.push(parse_f64(next("width value")?, &format!("width value {k}"))?);
        }
        let z0 = bottom.iter().copied().fold(f64::INFINITY, f64::min);
        let x_interfaces: Vec<f64> = (0..=nx).map(|i| i as f64 * dx).collect();
        let z_levels: Vec<f64> = (0..nz).map(|l| z0 + l as f64 * dz).collect();
        for (k, &w) in widths.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(GeometryError::NonPositiveWidth { x: x_interfaces[k / nz], z: z_levels[k % nz], value: w });
            }
        }
        if z_levels[nz - 1] <= bottom.iter().copied().fold(f64::NEG_INFINITY, f64::max) {
            return Err(GeometryError::Table("vertical grid does not reach above the bottom".into()));
        }
        Self::assemble(x_interfaces, bottom, z_levels, dz, dx, widths)
    }

    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GeometryError::Table(format!("{}: {e}", path.display())))?;
        Self::from_table_str(&text)
    }

    /// Writes the interface samples in the tabulated format read by [`Self::from_table_str`].
    pub fn write_table(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "{} {} {:.17e} {:.17e}", self.n_cells, self.z_levels.len(), self.dx, self.dz)?;
        let line: Vec<String> = self.bottom_interface.iter().map(|b| format!("{b:.17e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
        for i in 0..=self.n_cells {
            let row: Vec<String> = self.width_interface_row(i).iter().map(|w| format!("{w:.17e}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn write_table_file(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_table(&mut file)?;
        file.flush()
    }
}

/// `R = A / P`.
pub fn hydraulic_radius(total_area: f64, perimeter: f64) -> Result<f64> {
    if !(perimeter > 0.0) {
        return Err(GeometryError::NonPositivePerimeter(perimeter));
    }
    Ok(total_area / perimeter)
}
