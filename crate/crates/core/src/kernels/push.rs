//! Relativistic Boris particle advance.

use super::interp::InterpolatedField;
use crate::particle::Particle;

pub(crate) struct PushResult {
    pub ux: f32,
    pub uy: f32,
    pub uz: f32,
    /// 1/γ after the full momentum update.
    pub rg: f32,
    /// Displacement in cell units.
    pub dxc: f32,
    pub dyc: f32,
}

/// Half electric kick, magnetic rotation with γ from the post-kick momentum,
/// half electric kick; then the displacement u/γ·dt in cell units.
/// Arithmetic runs in f64 so the rotation preserves |u| to the last f32 ulps.
#[inline(always)]
pub(crate) fn boris_core(
    p: &Particle,
    f: &InterpolatedField,
    tem: f64,
    dt_dx: f64,
    dt_dy: f64,
) -> PushResult {
    let epx = f.ep[0] as f64 * tem;
    let epy = f.ep[1] as f64 * tem;
    let epz = f.ep[2] as f64 * tem;

    // first half acceleration
    let utx = p.ux as f64 + epx;
    let uty = p.uy as f64 + epy;
    let utz = p.uz as f64 + epz;

    // rotation, with γ evaluated at the half step
    let gamma = (1.0 + utx * utx + uty * uty + utz * utz).sqrt();
    let bt = tem / gamma;
    let bx = f.bp[0] as f64 * bt;
    let by = f.bp[1] as f64 * bt;
    let bz = f.bp[2] as f64 * bt;

    let upx = utx + uty * bz - utz * by;
    let upy = uty + utz * bx - utx * bz;
    let upz = utz + utx * by - uty * bx;

    let s = 2.0 / (1.0 + bx * bx + by * by + bz * bz);
    let sx = bx * s;
    let sy = by * s;
    let sz = bz * s;

    // second half acceleration
    let ux = utx + upy * sz - upz * sy + epx;
    let uy = uty + upz * sx - upx * sz + epy;
    let uz = utz + upx * sy - upy * sx + epz;

    let rg = 1.0 / (1.0 + ux * ux + uy * uy + uz * uz).sqrt();

    PushResult {
        ux: ux as f32,
        uy: uy as f32,
        uz: uz as f32,
        rg: rg as f32,
        dxc: (dt_dx * rg * ux) as f32,
        dyc: (dt_dy * rg * uy) as f32,
    }
}

/// Advance one particle through the Boris scheme and renormalize its cell
/// coordinates so the in-cell offset stays in [0,1); the cell index changes
/// by at most ±1 per axis. Periodic wrapping or migration is the caller's.
pub fn boris_advance(
    p: &Particle,
    f: &InterpolatedField,
    m_q: f32,
    dt: f32,
    dx: f32,
    dy: f32,
) -> Particle {
    let tem = 0.5 * dt as f64 / m_q as f64;
    let r = boris_core(p, f, tem, dt as f64 / dx as f64, dt as f64 / dy as f64);
    let x1 = p.x + r.dxc;
    let y1 = p.y + r.dyc;
    let di = (x1 >= 1.0) as i32 - (x1 < 0.0) as i32;
    let dj = (y1 >= 1.0) as i32 - (y1 < 0.0) as i32;
    Particle {
        ix: p.ix + di,
        iy: p.iy + dj,
        x: x1 - di as f32,
        y: y1 - dj as f32,
        ux: r.ux,
        uy: r.uy,
        uz: r.uz,
    }
}
