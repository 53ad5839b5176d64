//! Digital filtering of the current density along x.

use crate::config::{FilterKind, FilterSpec};
use crate::grid::{VecGrid, G_LO};

/// Convolve every interior row of `j` along x with the binomial kernel
/// (¼,½,¼), `n_passes` times; compensated mode appends one pass whose
/// weights flatten the combined transfer function to second order at k = 0.
///
/// For an n-pass binomial the compensator is the normalized kernel
/// [-1, (4+2n)/n, -1], i.e. side = -n/4 and center = (2+n)/2: it satisfies
/// center + 2·side = 1 (DC preserved) and its k² coefficient +n/4 cancels
/// the -n/4 of the binomial passes.
///
/// With `x_periodic` the x guard columns are refreshed after every pass;
/// otherwise (moving window) guard values are consumed as-is.
pub fn filter_current(j: &mut VecGrid, spec: &FilterSpec, x_periodic: bool) {
    let ny = j.ny();
    filter_rows(j, 0..ny, spec, x_periodic);
}

/// Filter a contiguous band of interior rows (shared-buffer callers filter
/// only the rows they own).
pub fn filter_rows(
    j: &mut VecGrid,
    rows: std::ops::Range<usize>,
    spec: &FilterSpec,
    x_periodic: bool,
) {
    if spec.kind == FilterKind::None {
        return;
    }
    for _ in 0..spec.n_passes {
        kernel_x(j, rows.clone(), 0.25, 0.5, x_periodic);
    }
    if spec.kind == FilterKind::Compensated {
        let n = spec.n_passes as f64;
        let side = (-n / 4.0) as f32;
        let center = ((2.0 + n) / 2.0) as f32;
        kernel_x(j, rows, side, center, x_periodic);
    }
}

fn kernel_x(j: &mut VecGrid, rows: std::ops::Range<usize>, sa: f32, sb: f32, x_periodic: bool) {
    let nx = j.nx();
    let w = j.row_stride();
    for comp in [&mut j.x, &mut j.y, &mut j.z] {
        for iy in rows.clone() {
            let s = (iy + G_LO) * w;
            let row = &mut comp[s..s + w];
            let mut fl = row[G_LO - 1];
            let mut f0 = row[G_LO];
            for ix in 0..nx {
                let fu = row[G_LO + ix + 1];
                let fs = sa * fl + sb * f0 + sa * fu;
                fl = f0;
                f0 = fu;
                row[G_LO + ix] = fs;
            }
            if x_periodic {
                row[0] = row[G_LO + nx - 1];
                row[G_LO + nx] = row[G_LO];
                row[G_LO + nx + 1] = row[G_LO + 1];
            }
        }
    }
}
