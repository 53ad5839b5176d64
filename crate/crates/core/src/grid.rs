//! Padded vector grids for fields and current density.
//!
//! Every grid stores three scalar components (x, y, z) over the interior
//! cells plus fixed guard cells: one below and two above per axis. Linear
//! interpolation, the staggered field layout, and the current deposit reach
//! one cell below and up to two cells above a particle's owner cell, so this
//! padding lets every kernel run without bounds branches. Interior cell
//! (0,0) always maps to the same padded offset regardless of grid size.

use crate::particle::Particle;

/// Guard cells below / above the interior, per axis.
pub const G_LO: usize = 1;
pub const G_HI: usize = 2;

/// A three-component grid over interior cells with fixed guard padding.
#[derive(Debug, Clone, PartialEq)]
pub struct VecGrid {
    nx: usize,
    ny: usize,
    row: usize,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub z: Vec<f32>,
}

/// One or more full padded rows captured from a grid, used to hand boundary
/// data between regions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowBand {
    pub n_rows: usize,
    pub width: usize,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub z: Vec<f32>,
}

impl VecGrid {
    pub fn new(nx: usize, ny: usize) -> Self {
        let row = G_LO + nx + G_HI;
        let len = row * (G_LO + ny + G_HI);
        VecGrid {
            nx,
            ny,
            row,
            x: vec![0.0; len],
            y: vec![0.0; len],
            z: vec![0.0; len],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Padded row stride.
    pub fn row_stride(&self) -> usize {
        self.row
    }

    /// Padded width (guard + interior + guard).
    pub fn padded_width(&self) -> usize {
        self.row
    }

    /// Flat index of cell (ix, iy); guard cells are reached with ix ∈
    /// [-1, nx+2) and iy ∈ [-1, ny+2).
    #[inline(always)]
    pub fn idx(&self, ix: i32, iy: i32) -> usize {
        debug_assert!(ix >= -(G_LO as i32) && ix < (self.nx + G_HI) as i32);
        debug_assert!(iy >= -(G_LO as i32) && iy < (self.ny + G_HI) as i32);
        (iy + G_LO as i32) as usize * self.row + (ix + G_LO as i32) as usize
    }

    pub fn zero(&mut self) {
        self.x.fill(0.0);
        self.y.fill(0.0);
        self.z.fill(0.0);
    }

    /// Start of the padded row containing interior row `iy`.
    #[inline]
    pub fn row_start(&self, iy: i32) -> usize {
        (iy + G_LO as i32) as usize * self.row
    }

    /// Copy `n` full padded rows starting at interior row `iy0` out of the grid.
    pub fn copy_rows_out(&self, iy0: i32, n: usize, band: &mut RowBand) {
        let w = self.row;
        band.n_rows = n;
        band.width = w;
        band.x.resize(n * w, 0.0);
        band.y.resize(n * w, 0.0);
        band.z.resize(n * w, 0.0);
        let s = self.row_start(iy0);
        band.x.copy_from_slice(&self.x[s..s + n * w]);
        band.y.copy_from_slice(&self.y[s..s + n * w]);
        band.z.copy_from_slice(&self.z[s..s + n * w]);
    }

    /// Accumulate a band into the rows starting at interior row `iy0`.
    pub fn add_rows_in(&mut self, iy0: i32, band: &RowBand) {
        assert_eq!(band.width, self.row);
        let s = self.row_start(iy0);
        for (dst, src) in self.x[s..s + band.n_rows * self.row].iter_mut().zip(&band.x) {
            *dst += *src;
        }
        for (dst, src) in self.y[s..s + band.n_rows * self.row].iter_mut().zip(&band.y) {
            *dst += *src;
        }
        for (dst, src) in self.z[s..s + band.n_rows * self.row].iter_mut().zip(&band.z) {
            *dst += *src;
        }
    }

    /// Overwrite the rows starting at interior row `iy0` with a band.
    pub fn copy_rows_in(&mut self, iy0: i32, band: &RowBand) {
        assert_eq!(band.width, self.row);
        let s = self.row_start(iy0);
        let n = band.n_rows * self.row;
        self.x[s..s + n].copy_from_slice(&band.x);
        self.y[s..s + n].copy_from_slice(&band.y);
        self.z[s..s + n].copy_from_slice(&band.z);
    }

    /// Fold x-guard deposits into the periodic interior, for interior rows
    /// `rows` (also folds the guard rows of those columns when given guard
    /// row indices).
    pub fn fold_x_periodic(&mut self, rows: std::ops::Range<i32>) {
        let nx = self.nx as i32;
        for iy in rows.clone() {
            for comp in [&mut self.x, &mut self.y, &mut self.z] {
                let s = (iy + G_LO as i32) as usize * self.row;
                let r = &mut comp[s..s + self.row];
                // guard col -1 -> interior col nx-1; cols nx, nx+1 -> 0, 1
                r[(G_LO as i32 + nx - 1) as usize] += r[0];
                r[G_LO] += r[(G_LO as i32 + nx) as usize];
                r[G_LO + 1] += r[(G_LO as i32 + nx + 1) as usize];
            }
        }
        self.copy_guard_x(rows);
    }

    /// Refresh x guard cells with periodic copies, for interior rows `rows`.
    pub fn copy_guard_x(&mut self, rows: std::ops::Range<i32>) {
        let nx = self.nx;
        for iy in rows {
            for comp in [&mut self.x, &mut self.y, &mut self.z] {
                let s = (iy + G_LO as i32) as usize * self.row;
                let r = &mut comp[s..s + self.row];
                r[0] = r[G_LO + nx - 1];
                r[G_LO + nx] = r[G_LO];
                r[G_LO + nx + 1] = r[G_LO + 1];
            }
        }
    }

    /// Fold y-guard deposits into the periodic interior (whole rows,
    /// modular targets).
    pub fn fold_y_periodic(&mut self) {
        let ny = self.ny;
        let w = self.row;
        for comp in [&mut self.x, &mut self.y, &mut self.z] {
            let (lo, rest) = comp.split_at_mut(w);
            // guard row -1 -> interior row ny-1
            let dst = ((ny - 1) % ny) * w;
            for i in 0..w {
                rest[dst + i] += lo[i];
            }
            // guard rows ny+k -> interior rows k mod ny
            let (interior, hi) = rest.split_at_mut(ny * w);
            for k in 0..G_HI {
                let dst = (k % ny) * w;
                for i in 0..w {
                    interior[dst + i] += hi[k * w + i];
                }
            }
        }
        self.copy_guard_y();
    }

    /// Refresh y guard rows with periodic copies of the interior (modular,
    /// so degenerate one- and two-row grids wrap correctly).
    pub fn copy_guard_y(&mut self) {
        let ny = self.ny;
        let w = self.row;
        for comp in [&mut self.x, &mut self.y, &mut self.z] {
            let src = (((ny - 1) % ny) + G_LO) * w;
            comp.copy_within(src..src + w, 0);
            for k in 0..G_HI {
                let src = ((k % ny) + G_LO) * w;
                comp.copy_within(src..src + w, (ny + G_LO + k) * w);
            }
        }
    }

    /// Sum of squares over the interior cells of all three components.
    pub fn interior_sq_sum(&self) -> f64 {
        let mut acc = 0.0f64;
        for comp in [&self.x, &self.y, &self.z] {
            for iy in 0..self.ny {
                let s = (iy + G_LO) * self.row + G_LO;
                for v in &comp[s..s + self.nx] {
                    acc += (*v as f64) * (*v as f64);
                }
            }
        }
        acc
    }

    /// Copy one interior row (interior columns only) of one component into `out`.
    pub fn interior_row(&self, comp: usize, iy: usize, out: &mut [f32]) {
        let src = match comp {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        };
        let s = (iy + G_LO) * self.row + G_LO;
        out.copy_from_slice(&src[s..s + self.nx]);
    }

    /// Shift every padded row one cell in -x; zero field enters at +x.
    pub fn shift_left_x(&mut self) {
        let w = self.row;
        let rows = G_LO + self.ny + G_HI;
        for comp in [&mut self.x, &mut self.y, &mut self.z] {
            for r in 0..rows {
                let s = r * w;
                comp.copy_within(s + 1..s + w, s);
                comp[s + w - 1] = 0.0;
            }
        }
    }
}

/// Electric and magnetic fields on a Yee mesh.
///
/// Staggering: Ex at (i+½,j), Ey at (i,j+½), Ez at (i,j), Bx at (i,j+½),
/// By at (i+½,j), Bz at (i+½,j+½).
#[derive(Debug, Clone, PartialEq)]
pub struct EMFields {
    pub e: VecGrid,
    pub b: VecGrid,
}

impl EMFields {
    pub fn new(nx: usize, ny: usize) -> Self {
        EMFields {
            e: VecGrid::new(nx, ny),
            b: VecGrid::new(nx, ny),
        }
    }

    pub fn nx(&self) -> usize {
        self.e.nx()
    }

    pub fn ny(&self) -> usize {
        self.e.ny()
    }

    pub fn copy_guard_x(&mut self) {
        let ny = self.e.ny() as i32;
        self.e.copy_guard_x(-(G_LO as i32)..ny + G_HI as i32);
        self.b.copy_guard_x(-(G_LO as i32)..ny + G_HI as i32);
    }

    pub fn copy_guard_y(&mut self) {
        self.e.copy_guard_y();
        self.b.copy_guard_y();
    }
}

/// Electric current density deposited by the particles, time-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentDensity {
    pub j: VecGrid,
}

impl CurrentDensity {
    pub fn new(nx: usize, ny: usize) -> Self {
        CurrentDensity {
            j: VecGrid::new(nx, ny),
        }
    }
}

/// Bilinear charge deposit of one particle (cell-unit charge weights).
///
/// Shared by the charge-density diagnostic; tests use an independent copy.
pub fn deposit_charge(rho: &mut VecGrid, p: &Particle, q: f32) {
    let i = p.ix;
    let j = p.iy;
    let w1 = p.x;
    let w2 = p.y;
    let idx = rho.idx(i, j);
    let row = rho.row_stride();
    rho.z[idx] += q * (1.0 - w1) * (1.0 - w2);
    rho.z[idx + 1] += q * w1 * (1.0 - w2);
    rho.z[idx + row] += q * (1.0 - w1) * w2;
    rho.z[idx + row + 1] += q * w1 * w2;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_offsets_are_stable() {
        let g4 = VecGrid::new(4, 4);
        let g9 = VecGrid::new(9, 7);
        assert_eq!(g4.idx(0, 0) % g4.row_stride(), G_LO);
        assert_eq!(g9.idx(0, 0) % g9.row_stride(), G_LO);
        assert_eq!(g4.idx(-1, 0), g4.idx(0, 0) - 1);
        assert_eq!(g4.idx(0, -1) + g4.row_stride(), g4.idx(0, 0));
    }

    #[test]
    fn fold_and_copy_roundtrip_x() {
        let mut g = VecGrid::new(4, 2);
        let i = g.idx(-1, 0);
        g.x[i] = 2.0;
        let i = g.idx(4, 0);
        g.x[i] = 3.0;
        g.fold_x_periodic(0..2);
        assert_eq!(g.x[g.idx(3, 0)], 2.0);
        assert_eq!(g.x[g.idx(0, 0)], 3.0);
        // guards now hold copies
        assert_eq!(g.x[g.idx(-1, 0)], 2.0);
        assert_eq!(g.x[g.idx(4, 0)], 3.0);
    }

    #[test]
    fn fold_y_moves_guard_rows_to_interior() {
        let mut g = VecGrid::new(3, 4);
        let i = g.idx(1, -1);
        g.z[i] = 1.5;
        let i = g.idx(1, 4);
        g.z[i] = 2.5;
        let i = g.idx(1, 5);
        g.z[i] = 4.0;
        g.fold_y_periodic();
        assert_eq!(g.z[g.idx(1, 3)], 1.5);
        assert_eq!(g.z[g.idx(1, 0)], 2.5);
        assert_eq!(g.z[g.idx(1, 1)], 4.0);
        // guard rows refreshed with interior copies
        assert_eq!(g.z[g.idx(1, -1)], 1.5);
        assert_eq!(g.z[g.idx(1, 4)], 2.5);
        assert_eq!(g.z[g.idx(1, 5)], 4.0);
    }

    #[test]
    fn shift_left_discards_first_column_and_zeroes_last() {
        let mut g = VecGrid::new(4, 2);
        for ix in 0..4 {
            let i = g.idx(ix, 0);
            g.y[i] = ix as f32 + 1.0;
        }
        g.shift_left_x();
        assert_eq!(g.y[g.idx(0, 0)], 2.0);
        assert_eq!(g.y[g.idx(2, 0)], 4.0);
        assert_eq!(g.y[g.idx(3, 0)], 0.0);
    }

    #[test]
    fn row_band_roundtrip() {
        let mut g = VecGrid::new(3, 3);
        let i = g.idx(0, 2);
        g.x[i] = 7.0;
        let mut band = RowBand::default();
        g.copy_rows_out(2, 1, &mut band);
        let mut h = VecGrid::new(3, 3);
        h.copy_rows_in(0, &band);
        assert_eq!(h.x[h.idx(0, 0)], 7.0);
        h.add_rows_in(0, &band);
        assert_eq!(h.x[h.idx(0, 0)], 14.0);
    }
}
