//! Finite-difference time-domain field advance on the Yee mesh.

use crate::grid::{EMFields, VecGrid, G_LO};

/// Mutable view of a contiguous block of padded rows of one grid, used to
/// run the field update row-striped across threads.
pub struct GridRowsMut<'a> {
    /// First interior row covered (may be -1: the low guard row).
    pub iy0: i32,
    pub n_rows: usize,
    w: usize,
    pub x: &'a mut [f32],
    pub y: &'a mut [f32],
    pub z: &'a mut [f32],
}

impl VecGrid {
    /// Split the grid into mutable row stripes. `blocks` are (first interior
    /// row, row count) pairs, contiguous and ascending.
    pub fn stripes_mut(&mut self, blocks: &[(i32, usize)]) -> Vec<GridRowsMut<'_>> {
        let w = self.row_stride();
        let mut out = Vec::with_capacity(blocks.len());
        let mut xs = self.x.as_mut_slice();
        let mut ys = self.y.as_mut_slice();
        let mut zs = self.z.as_mut_slice();
        let mut consumed = 0usize;
        for (iy0, n_rows) in blocks.iter().copied() {
            let start = (iy0 + G_LO as i32) as usize * w;
            debug_assert!(start >= consumed);
            let skip = start - consumed;
            let take = n_rows * w;
            xs = &mut std::mem::take(&mut xs)[skip..];
            ys = &mut std::mem::take(&mut ys)[skip..];
            zs = &mut std::mem::take(&mut zs)[skip..];
            let (x, xr) = std::mem::take(&mut xs).split_at_mut(take);
            let (y, yr) = std::mem::take(&mut ys).split_at_mut(take);
            let (z, zr) = std::mem::take(&mut zs).split_at_mut(take);
            xs = xr;
            ys = yr;
            zs = zr;
            consumed = start + take;
            out.push(GridRowsMut { iy0, n_rows, w, x, y, z });
        }
        out
    }
}

/// Advance B a half step from curl E, E a full step from curl B minus J,
/// then B the final half step, leaving E and B time-centered.
///
/// The update range is extended one ring beyond the interior (B over
/// [-1, n], E over [0, n] per axis) so that after the step every interior
/// value matches the whole-grid periodic update without any mid-step guard
/// refresh; guard values outside that ring are left unspecified and must be
/// restored by the caller's boundary policy before the next use.
///
/// `j_y_off` shifts field row iy to J row iy + j_y_off (regions depositing
/// into a shared whole-grid current pass their first global row).
/// `j_row_hi` optionally overrides the J values of field row `ny` (the first
/// high guard row) with full padded rows taken from the upper neighbor's
/// reduced and filtered current.
pub fn yee_advance(
    emf: &mut EMFields,
    j: &VecGrid,
    j_y_off: i32,
    j_row_hi: Option<[&[f32]; 3]>,
    dt: f32,
    dx: f32,
    dy: f32,
) {
    let ny = emf.e.ny() as i32;
    {
        let mut stripes = emf.b.stripes_mut(&[(-1, ny as usize + 2)]);
        yee_b_stripe(&mut stripes[0], &emf.e, 0.5 * dt, dx, dy);
    }
    {
        let mut stripes = emf.e.stripes_mut(&[(0, ny as usize + 1)]);
        yee_e_stripe(&mut stripes[0], &emf.b, j, j_y_off, j_row_hi, dt, dx, dy);
    }
    {
        let mut stripes = emf.b.stripes_mut(&[(-1, ny as usize + 2)]);
        yee_b_stripe(&mut stripes[0], &emf.e, 0.5 * dt, dx, dy);
    }
}

/// Half-step B update over one row stripe: B -= dt curl E.
pub fn yee_b_stripe(b: &mut GridRowsMut<'_>, e: &VecGrid, dt: f32, dx: f32, dy: f32) {
    let dt_dx = dt / dx;
    let dt_dy = dt / dy;
    let nx = e.nx() as i32;
    let w = e.row_stride();
    debug_assert_eq!(b.w, w);

    for r in 0..b.n_rows {
        let iy = b.iy0 + r as i32;
        let dst0 = r * w + (G_LO as i32 - 1) as usize;
        let src0 = e.idx(-1, iy);
        for k in 0..(nx + 2) as usize {
            let d = dst0 + k;
            let s = src0 + k;
            b.x[d] -= dt_dy * (e.z[s + w] - e.z[s]);
            b.y[d] += dt_dx * (e.z[s + 1] - e.z[s]);
            b.z[d] -= dt_dx * (e.y[s + 1] - e.y[s]) - dt_dy * (e.x[s + w] - e.x[s]);
        }
    }
}

/// Full-step E update over one row stripe: E += dt (curl B - J).
#[allow(clippy::too_many_arguments)]
pub fn yee_e_stripe(
    e: &mut GridRowsMut<'_>,
    b: &VecGrid,
    j: &VecGrid,
    j_y_off: i32,
    j_row_hi: Option<[&[f32]; 3]>,
    dt: f32,
    dx: f32,
    dy: f32,
) {
    let dt_dx = dt / dx;
    let dt_dy = dt / dy;
    let nx = b.nx() as i32;
    let ny = b.ny() as i32;
    let w = b.row_stride();
    debug_assert_eq!(e.w, w);
    debug_assert_eq!(j.row_stride(), w);

    for r in 0..e.n_rows {
        let iy = e.iy0 + r as i32;
        let dst0 = r * w + G_LO;
        let src0 = b.idx(0, iy);
        let (jx, jy, jz): (&[f32], &[f32], &[f32]) = match (&j_row_hi, iy == ny) {
            (Some(rows), true) => (rows[0], rows[1], rows[2]),
            _ => {
                let s = j.row_start(iy + j_y_off);
                (&j.x[s..s + w], &j.y[s..s + w], &j.z[s..s + w])
            }
        };
        for k in 0..(nx + 1) as usize {
            let d = dst0 + k;
            let s = src0 + k;
            let g = G_LO + k;
            e.x[d] += dt_dy * (b.z[s] - b.z[s - w]) - dt * jx[g];
            e.y[d] += -dt_dx * (b.z[s] - b.z[s - 1]) - dt * jy[g];
            e.z[d] += dt_dx * (b.y[s] - b.y[s - 1]) - dt_dy * (b.x[s] - b.x[s - w]) - dt * jz[g];
        }
    }
}
