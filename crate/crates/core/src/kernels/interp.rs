//! Bilinear field interpolation at the particle position.

use crate::grid::EMFields;
use crate::particle::Particle;

/// E and B evaluated at one particle's position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolatedField {
    pub ep: [f32; 3],
    pub bp: [f32; 3],
}

/// Bilinear interpolation respecting the Yee staggering of each component.
///
/// Components living on half-cell offsets use the shifted weight
/// `wh = w ± ½` with the stencil base moved one cell down when the particle
/// sits in the lower half of its cell, so the interpolation is exact for
/// fields affine in position, for every staggering.
pub fn interpolate_emf(emf: &EMFields, p: &Particle) -> InterpolatedField {
    interpolate_emf_at(emf, p)
}

#[inline(always)]
pub(crate) fn interpolate_emf_at(emf: &EMFields, p: &Particle) -> InterpolatedField {
    let row = emf.e.row_stride();
    let w1 = p.x;
    let w2 = p.y;

    let ih = if w1 < 0.5 { p.ix - 1 } else { p.ix };
    let jh = if w2 < 0.5 { p.iy - 1 } else { p.iy };
    let w1h = if w1 < 0.5 { w1 + 0.5 } else { w1 - 0.5 };
    let w2h = if w2 < 0.5 { w2 + 0.5 } else { w2 - 0.5 };

    let e = &emf.e;
    let b = &emf.b;

    // index helpers: (ix, iy) and the half-shifted variants
    let c = e.idx(p.ix, p.iy);
    let ch_x = e.idx(ih, p.iy);
    let ch_y = e.idx(p.ix, jh);
    let ch_xy = e.idx(ih, jh);

    // f0 + w·(f1-f0) reconstructs constant fields exactly.
    let lerp2 = |f: &[f32], i0: usize, wx: f32, wy: f32| -> f32 {
        let lo = f[i0] + wx * (f[i0 + 1] - f[i0]);
        let hi = f[i0 + row] + wx * (f[i0 + row + 1] - f[i0 + row]);
        lo + wy * (hi - lo)
    };

    InterpolatedField {
        ep: [
            lerp2(&e.x, ch_x, w1h, w2),
            lerp2(&e.y, ch_y, w1, w2h),
            lerp2(&e.z, c, w1, w2),
        ],
        bp: [
            lerp2(&b.x, ch_y, w1, w2h),
            lerp2(&b.y, ch_x, w1h, w2),
            lerp2(&b.z, ch_xy, w1h, w2h),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{G_HI, G_LO};

    fn particle(ix: i32, iy: i32, x: f32, y: f32) -> Particle {
        Particle { ix, iy, x, y, ux: 0.0, uy: 0.0, uz: 0.0 }
    }

    fn fill(emf: &mut EMFields, f: impl Fn(i32, i32) -> ([f32; 3], [f32; 3])) {
        let (nx, ny) = (emf.nx() as i32, emf.ny() as i32);
        for iy in -(G_LO as i32)..ny + G_HI as i32 {
            for ix in -(G_LO as i32)..nx + G_HI as i32 {
                let i = emf.e.idx(ix, iy);
                let (e, b) = f(ix, iy);
                emf.e.x[i] = e[0];
                emf.e.y[i] = e[1];
                emf.e.z[i] = e[2];
                emf.b.x[i] = b[0];
                emf.b.y[i] = b[1];
                emf.b.z[i] = b[2];
            }
        }
    }

    #[test]
    fn constant_fields_interpolate_exactly() {
        let mut emf = EMFields::new(8, 8);
        fill(&mut emf, |_, _| ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]));
        for (x, y) in [(0.1, 0.9), (0.5, 0.5), (0.74, 0.26), (0.0, 0.0)] {
            let f = interpolate_emf(&emf, &particle(3, 4, x, y));
            assert_eq!(f.ep, [1.0, 2.0, 3.0]);
            assert_eq!(f.bp, [4.0, 5.0, 6.0]);
        }
    }

    #[test]
    fn affine_ez_is_exact() {
        // Ez is unstaggered; Ez(i,j) = i gives ep_z = ix + x.
        let mut emf = EMFields::new(8, 8);
        fill(&mut emf, |ix, _| ([0.0, 0.0, ix as f32], [0.0; 3]));
        let f = interpolate_emf(&emf, &particle(3, 2, 0.25, 0.6));
        assert_eq!(f.ep[2], 3.25);
    }

    #[test]
    fn affine_fields_exact_for_all_staggerings() {
        // Each component affine in its own staggered coordinates; sample a
        // spread of particle offsets and check exact reconstruction.
        let mut emf = EMFields::new(8, 8);
        // Ex at (i+1/2, j): value = (i+0.5) + 2j; Ey at (i, j+1/2): i - j - 0.5;
        // Ez at (i,j): 2i + 3j; Bx at (i, j+1/2); By at (i+1/2, j); Bz at (i+1/2, j+1/2).
        fill(&mut emf, |ix, iy| {
            let (i, j) = (ix as f32, iy as f32);
            (
                [(i + 0.5) + 2.0 * j, i - (j + 0.5), 2.0 * i + 3.0 * j],
                [0.5 * i + (j + 0.5), (i + 0.5) - j, (i + 0.5) + (j + 0.5)],
            )
        });
        for (x, y) in [(0.1, 0.8), (0.6, 0.3), (0.5, 0.5), (0.9, 0.9)] {
            let p = particle(4, 3, x, y);
            let (px, py) = (4.0 + x, 3.0 + y);
            let f = interpolate_emf(&emf, &p);
            let expect_e = [px + 2.0 * py, px - py, 2.0 * px + 3.0 * py];
            let expect_b = [0.5 * px + py, px - py, px + py];
            for c in 0..3 {
                assert!(
                    (f.ep[c] - expect_e[c]).abs() < 1e-5,
                    "E{c} at ({x},{y}): {} vs {}",
                    f.ep[c],
                    expect_e[c]
                );
                assert!(
                    (f.bp[c] - expect_b[c]).abs() < 1e-5,
                    "B{c} at ({x},{y}): {} vs {}",
                    f.bp[c],
                    expect_b[c]
                );
            }
        }
    }

    #[test]
    fn particle_on_node_averages_staggered_neighbors() {
        // At x = 0 exactly, a half-staggered component (Ex) is the average of
        // the two samples bracketing the node: cells ix-1 and ix.
        let mut emf = EMFields::new(8, 8);
        fill(&mut emf, |ix, _| ([ix as f32, 0.0, 0.0], [0.0; 3]));
        let f = interpolate_emf(&emf, &particle(3, 2, 0.0, 0.25));
        // samples at cells 2 and 3, equal weights 1/2
        assert_eq!(f.ep[0], 2.5);
    }
}
