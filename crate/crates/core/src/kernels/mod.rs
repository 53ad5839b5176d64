//! The four per-step stages as pure functions over field and particle
//! buffers: field interpolation at the particle, Boris momentum/position
//! advance, charge-conserving current deposit, current filtering, and the
//! Yee field advance. None of them hold state or synchronize; exclusivity of
//! the buffers they mutate is the caller's contract.

mod deposit;
mod filter;
mod interp;
mod push;
mod window;
mod yee;

pub use deposit::{deposit_current, deposit_split};
pub use filter::{filter_current, filter_rows};
pub use interp::{interpolate_emf, InterpolatedField};
pub use push::boris_advance;
pub use window::{shift_grid_left, window_due};
pub use yee::{yee_advance, yee_b_stripe, yee_e_stripe, GridRowsMut};

use crate::grid::VecGrid;
use crate::particle::Particle;
use push::boris_core;

/// Precomputed per-species step coefficients.
#[derive(Debug, Clone, Copy)]
pub struct StepCoeffs {
    /// Half electric impulse factor, (q/m)·dt/2 = dt/(2·m_q).
    pub tem: f64,
    pub dt_dx: f64,
    pub dt_dy: f64,
    /// Charge flux normalizations q·dx/dt and q·dy/dt.
    pub qnx: f32,
    pub qny: f32,
    pub q: f32,
}

impl StepCoeffs {
    pub fn new(m_q: f32, q: f32, dt: f32, dx: f32, dy: f32) -> Self {
        StepCoeffs {
            tem: 0.5 * dt as f64 / m_q as f64,
            dt_dx: dt as f64 / dx as f64,
            dt_dy: dt as f64 / dy as f64,
            qnx: q * dx / dt,
            qny: q * dy / dt,
            q,
        }
    }
}

/// One particle through stages 1–3: interpolate the fields at its position,
/// push momentum and position, deposit the current of the motion. The cell
/// index moves by at most ±1 per axis; the caller wraps or migrates it.
#[inline]
pub fn advance_deposit_one(
    p: &mut Particle,
    emf: &crate::grid::EMFields,
    j: &mut VecGrid,
    jy_off: i32,
    c: &StepCoeffs,
) {
    let f = interp::interpolate_emf_at(emf, p);
    let r = boris_core(p, &f, c.tem, c.dt_dx, c.dt_dy);

    let x1 = p.x + r.dxc;
    let y1 = p.y + r.dyc;
    let di = (x1 >= 1.0) as i32 - (x1 < 0.0) as i32;
    let dj = (y1 >= 1.0) as i32 - (y1 < 0.0) as i32;
    let qvz = c.q * r.uz * r.rg;

    deposit_split(
        j,
        p.ix,
        p.iy + jy_off,
        p.x,
        p.y,
        r.dxc,
        r.dyc,
        di,
        dj,
        c.qnx,
        c.qny,
        qvz,
    );

    p.x = x1 - di as f32;
    p.y = y1 - dj as f32;
    p.ix += di;
    p.iy += dj;
    p.ux = r.ux;
    p.uy = r.uy;
    p.uz = r.uz;
}
