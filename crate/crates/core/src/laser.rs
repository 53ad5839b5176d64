//! Plane-wave laser initialization.
//!
//! Fills zeroed fields with a linearly polarized pulse propagating along +x:
//! the transverse field pair (Ey,Bz) rotated by the polarization angle, with
//! E and B sampled at the same longitudinal position so |E| = |B| holds
//! pointwise and the pulse is force-balanced for co-moving particles.

use crate::config::{LaserSpec, SimConfig};
use crate::grid::EMFields;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaserError {
    #[error("laser envelope ({len} c/ωp) does not fit in the box ({box_x} c/ωp)")]
    LaserWiderThanBox { len: f32, box_x: f32 },
}

/// sin²-shaped longitudinal envelope; `z` is the grid coordinate, the
/// leading edge sits at `start`, the pulse extends backwards from it.
pub fn envelope(laser: &LaserSpec, z: f64) -> f64 {
    let (rise, flat, fall) = laser.envelope_lengths();
    let (rise, flat, fall) = (rise as f64, flat as f64, fall as f64);
    let start = laser.start_x as f64;
    if z > start || z <= start - (rise + flat + fall) {
        0.0
    } else if z > start - rise {
        let s = ((z - start) / rise * std::f64::consts::FRAC_PI_2).sin();
        s * s
    } else if z > start - (rise + flat) {
        1.0
    } else {
        let edge = start - (rise + flat + fall);
        let s = ((z - edge) / fall * std::f64::consts::FRAC_PI_2).sin();
        s * s
    }
}

/// Add the pulse to zero-initialized fields. Guard cells are not touched;
/// refresh them afterwards with the run's boundary policy.
pub fn init_laser(emf: &mut EMFields, laser: &LaserSpec, cfg: &SimConfig) -> Result<(), LaserError> {
    let (rise, flat, fall) = laser.envelope_lengths();
    let len = rise + flat + fall;
    if len > cfg.box_x || laser.start_x > cfg.box_x {
        return Err(LaserError::LaserWiderThanBox { len, box_x: cfg.box_x });
    }

    let dx = cfg.dx() as f64;
    let k = laser.omega0 as f64;
    let amp = (laser.a0 * laser.omega0) as f64;
    let (sin_pol, cos_pol) = (laser.polarization as f64).sin_cos();

    for ix in 0..cfg.nx as i32 {
        let z = ix as f64 * dx;
        let field = amp * envelope(laser, z) * (k * (z - laser.start_x as f64)).cos();
        let ey = (field * cos_pol) as f32;
        let ez = (field * sin_pol) as f32;
        let by = (-field * sin_pol) as f32;
        let bz = (field * cos_pol) as f32;
        for iy in 0..cfg.ny as i32 {
            let i = emf.e.idx(ix, iy);
            emf.e.y[i] += ey;
            emf.e.z[i] += ez;
            emf.b.y[i] += by;
            emf.b.z[i] += bz;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FilterSpec, SpeciesSpec};

    fn cfg(nx: usize, ny: usize, box_x: f32, box_y: f32, laser: LaserSpec) -> SimConfig {
        SimConfig {
            nx,
            ny,
            box_x,
            box_y,
            dt: 0.01,
            n_steps: 0,
            n_regions: 1,
            seed: 0,
            filter: FilterSpec::default(),
            moving_window: false,
            species: Vec::<SpeciesSpec>::new(),
            laser: Some(laser),
        }
    }

    fn flat_top() -> LaserSpec {
        LaserSpec {
            a0: 2.0,
            omega0: 5.0,
            fwhm: None,
            rise: Some(3.0),
            flat: Some(4.0),
            fall: Some(3.0),
            polarization: 0.0,
            start_x: 18.0,
        }
    }

    #[test]
    fn zero_amplitude_limit_leaves_fields_zero() {
        // a0 -> 0 is modeled by scaling: amplitude is linear in a0.
        let laser = LaserSpec { a0: 1e-30, ..flat_top() };
        let c = cfg(256, 4, 20.0, 0.4, laser);
        let mut emf = EMFields::new(c.nx, c.ny);
        init_laser(&mut emf, c.laser.as_ref().unwrap(), &c).unwrap();
        let max = emf.e.y.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(max < 1e-25);
    }

    #[test]
    fn e_equals_b_pointwise() {
        let laser = LaserSpec { polarization: 0.7, ..flat_top() };
        let c = cfg(256, 4, 20.0, 0.4, laser);
        let mut emf = EMFields::new(c.nx, c.ny);
        init_laser(&mut emf, c.laser.as_ref().unwrap(), &c).unwrap();
        for iy in 0..4 {
            for ix in 0..256 {
                let i = emf.e.idx(ix, iy);
                let e2 = emf.e.y[i].powi(2) + emf.e.z[i].powi(2);
                let b2 = emf.b.y[i].powi(2) + emf.b.z[i].powi(2);
                assert!((e2 - b2).abs() <= 1e-6 * e2.max(1e-12));
            }
        }
    }

    #[test]
    fn peak_field_reaches_a0_omega0() {
        let c = cfg(512, 2, 20.0, 0.2, flat_top());
        let mut emf = EMFields::new(c.nx, c.ny);
        init_laser(&mut emf, c.laser.as_ref().unwrap(), &c).unwrap();
        let max = emf.e.y.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let expect = 2.0 * 5.0;
        // flat-top with many wavelengths: some cell sits within (k dx)²/8 of a crest
        assert!(
            (max - expect).abs() < 2e-3 * expect,
            "max |Ey| = {max}, expected ≈ {expect}"
        );
    }

    #[test]
    fn zero_outside_envelope_support() {
        let c = cfg(256, 4, 20.0, 0.4, flat_top());
        let mut emf = EMFields::new(c.nx, c.ny);
        init_laser(&mut emf, c.laser.as_ref().unwrap(), &c).unwrap();
        for ix in 0..256 {
            let z = ix as f32 * c.dx();
            if !(8.0..=18.0).contains(&z) {
                let i = emf.e.idx(ix, 0);
                assert_eq!(emf.e.y[i], 0.0, "field outside support at z={z}");
            }
        }
    }

    #[test]
    fn pulse_energy_matches_envelope_quadrature() {
        let c = cfg(512, 8, 20.0, 0.8, flat_top());
        let laser = c.laser.unwrap();
        let mut emf = EMFields::new(c.nx, c.ny);
        init_laser(&mut emf, &laser, &c).unwrap();

        let (dx, dy) = (c.dx() as f64, c.dy() as f64);
        let grid_energy = 0.5 * (emf.e.interior_sq_sum() + emf.b.interior_sq_sum()) * dx * dy;

        // Independent quadrature of the analytic integrand at 64x resolution.
        let amp = (laser.a0 * laser.omega0) as f64;
        let k = laser.omega0 as f64;
        let n = c.nx * 64;
        let h = c.box_x as f64 / n as f64;
        let mut line = 0.0f64;
        for i in 0..n {
            let z = (i as f64 + 0.5) * h;
            let f = amp * envelope(&laser, z) * (k * (z - laser.start_x as f64)).cos();
            line += f * f * h;
        }
        let expect = line * c.box_y as f64; // E² + B² = 2E², halved
        let rel = (grid_energy - expect).abs() / expect;
        assert!(rel < 0.01, "grid {grid_energy} vs quadrature {expect} (rel {rel})");
    }

    #[test]
    fn wider_than_box_is_rejected() {
        let laser = LaserSpec { rise: Some(30.0), ..flat_top() };
        let c = cfg(64, 4, 6.4, 0.4, laser);
        let mut emf = EMFields::new(c.nx, c.ny);
        assert!(matches!(
            init_laser(&mut emf, c.laser.as_ref().unwrap(), &c),
            Err(LaserError::LaserWiderThanBox { .. })
        ));
    }
}
