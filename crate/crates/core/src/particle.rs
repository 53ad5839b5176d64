//! Macro-particle phase space.

/// One macro-particle: owner cell, in-cell offset, and proper momentum.
///
/// `x`, `y` are the offsets within the owner cell, in [0,1) after every
/// push+migration cycle. `ux,uy,uz` are proper momentum components γv/c in
/// units of c. For row-band decomposed runs `iy` is region-local; `ix` is
/// always global.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub ix: i32,
    pub iy: i32,
    pub x: f32,
    pub y: f32,
    pub ux: f32,
    pub uy: f32,
    pub uz: f32,
}

impl Particle {
    /// Lorentz factor γ = sqrt(1 + u²).
    pub fn gamma(&self) -> f64 {
        let (ux, uy, uz) = (self.ux as f64, self.uy as f64, self.uz as f64);
        (1.0 + ux * ux + uy * uy + uz * uz).sqrt()
    }

    pub fn u_norm_sq(&self) -> f64 {
        let (ux, uy, uz) = (self.ux as f64, self.uy as f64, self.uz as f64);
        ux * ux + uy * uy + uz * uz
    }
}
