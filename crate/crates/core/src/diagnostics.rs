//! Field reports, binary dumps, energy accounting, and the map comparator
//! used to validate one backend against another.

use crate::backends::SimState;
use crate::grid::{deposit_charge, VecGrid, G_LO};
use crate::particle::Particle;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

/// Dumpable scalar quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Ex,
    Ey,
    Ez,
    Bx,
    By,
    Bz,
    Jx,
    Jy,
    Jz,
    /// Charge density of one species (by index).
    Charge(u8),
}

impl Quantity {
    pub fn code(self) -> u16 {
        match self {
            Quantity::Ex => 0,
            Quantity::Ey => 1,
            Quantity::Ez => 2,
            Quantity::Bx => 3,
            Quantity::By => 4,
            Quantity::Bz => 5,
            Quantity::Jx => 6,
            Quantity::Jy => 7,
            Quantity::Jz => 8,
            Quantity::Charge(s) => 9 + s as u16,
        }
    }

    pub fn from_code(code: u16) -> Option<Quantity> {
        Some(match code {
            0 => Quantity::Ex,
            1 => Quantity::Ey,
            2 => Quantity::Ez,
            3 => Quantity::Bx,
            4 => Quantity::By,
            5 => Quantity::Bz,
            6 => Quantity::Jx,
            7 => Quantity::Jy,
            8 => Quantity::Jz,
            c if c >= 9 && c <= 9 + u8::MAX as u16 => Quantity::Charge((c - 9) as u8),
            _ => return None,
        })
    }

    pub fn name(self) -> String {
        match self {
            Quantity::Ex => "ex".into(),
            Quantity::Ey => "ey".into(),
            Quantity::Ez => "ez".into(),
            Quantity::Bx => "bx".into(),
            Quantity::By => "by".into(),
            Quantity::Bz => "bz".into(),
            Quantity::Jx => "jx".into(),
            Quantity::Jy => "jy".into(),
            Quantity::Jz => "jz".into(),
            Quantity::Charge(s) => format!("charge{s}"),
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ex" => Quantity::Ex,
            "ey" => Quantity::Ey,
            "ez" => Quantity::Ez,
            "bx" => Quantity::Bx,
            "by" => Quantity::By,
            "bz" => Quantity::Bz,
            "jx" => Quantity::Jx,
            "jy" => Quantity::Jy,
            "jz" => Quantity::Jz,
            other => match other.strip_prefix("charge").and_then(|n| n.parse::<u8>().ok()) {
                Some(n) => Quantity::Charge(n),
                None => return Err(format!("unknown quantity `{other}`")),
            },
        })
    }
}

/// One scalar map over the whole interior grid, ghost rows stripped and
/// regions stitched in y order. Row-major, y outer.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldReport {
    pub quantity: Quantity,
    pub iter: u32,
    pub nx: u32,
    pub ny: u32,
    pub data: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field dump (bad magic)")]
    BadMagic,
    #[error("unsupported dump version {0}")]
    BadVersion(u16),
    #[error("unknown quantity code {0}")]
    BadQuantity(u16),
    #[error("dump truncated: expected {expect} values, found {found}")]
    Truncated { expect: usize, found: usize },
}

#[derive(Debug, Error)]
#[error("shape mismatch: {a_nx}x{a_ny} `{a_q}` vs {b_nx}x{b_ny} `{b_q}`")]
pub struct ShapeMismatch {
    pub a_nx: u32,
    pub a_ny: u32,
    pub a_q: String,
    pub b_nx: u32,
    pub b_ny: u32,
    pub b_q: String,
}

const MAGIC: &[u8; 8] = b"ZPICDUMP";
const VERSION: u16 = 1;

/// Extract one quantity from the state, stitching regions in y order.
pub fn field_report(state: &SimState, quantity: Quantity) -> FieldReport {
    let nx = state.cfg.nx;
    let ny = state.cfg.ny;
    let mut data = vec![0.0f32; nx * ny];

    match quantity {
        Quantity::Charge(s) => {
            charge_density(state, s as usize, &mut data);
        }
        _ => {
            let comp = match quantity {
                Quantity::Ex | Quantity::Bx | Quantity::Jx => 0,
                Quantity::Ey | Quantity::By | Quantity::Jy => 1,
                _ => 2,
            };
            state.for_each_band(|y0, rows, grids| {
                let grid: &VecGrid = match quantity {
                    Quantity::Ex | Quantity::Ey | Quantity::Ez => grids.0,
                    Quantity::Bx | Quantity::By | Quantity::Bz => grids.1,
                    _ => grids.2,
                };
                for r in 0..rows {
                    let dst = (y0 + r) * nx;
                    grid.interior_row(comp, r, &mut data[dst..dst + nx]);
                }
            });
        }
    }

    FieldReport {
        quantity,
        iter: state.iter,
        nx: nx as u32,
        ny: ny as u32,
        data,
    }
}

/// Bilinear charge deposit of one species over the whole grid (periodic
/// fold), written into `out` (interior cells, row-major).
fn charge_density(state: &SimState, species: usize, out: &mut [f32]) {
    let nx = state.cfg.nx;
    let ny = state.cfg.ny;
    let q = state.cfg.species[species].particle_charge();
    let mut rho = VecGrid::new(nx, ny);
    state.for_each_particle(species, |p, y0| {
        let global = Particle { iy: p.iy + y0, ..*p };
        deposit_charge(&mut rho, &global, q);
    });
    if !state.cfg.moving_window {
        rho.fold_x_periodic(0..ny as i32);
    }
    rho.fold_y_periodic();
    for iy in 0..ny {
        let s = (iy + G_LO) * rho.row_stride() + G_LO;
        out[iy * nx..(iy + 1) * nx].copy_from_slice(&rho.z[s..s + nx]);
    }
}

/// Write the bit-exact dump format: a 32-byte header (magic "ZPICDUMP",
/// version u16, quantity u16, iter u32, nx u32, ny u32, 8 reserved bytes)
/// followed by nx·ny little-endian f32 values, row-major, y outer.
pub fn write_report(report: &FieldReport, path: &Path) -> Result<(), DumpError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&report.quantity.code().to_le_bytes())?;
    out.write_all(&report.iter.to_le_bytes())?;
    out.write_all(&report.nx.to_le_bytes())?;
    out.write_all(&report.ny.to_le_bytes())?;
    out.write_all(&[0u8; 8])?;
    for v in &report.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Dump one quantity to `path` and return the in-memory report.
pub fn dump_field(state: &SimState, quantity: Quantity, path: &Path) -> Result<FieldReport, DumpError> {
    let report = field_report(state, quantity);
    write_report(&report, path)?;
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<FieldReport, DumpError> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 32];
    file.read_exact(&mut header)?;
    if &header[0..8] != MAGIC {
        return Err(DumpError::BadMagic);
    }
    let version = u16::from_le_bytes([header[8], header[9]]);
    if version != VERSION {
        return Err(DumpError::BadVersion(version));
    }
    let code = u16::from_le_bytes([header[10], header[11]]);
    let quantity = Quantity::from_code(code).ok_or(DumpError::BadQuantity(code))?;
    let iter = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let nx = u32::from_le_bytes(header[16..20].try_into().unwrap());
    let ny = u32::from_le_bytes(header[20..24].try_into().unwrap());

    let expect = nx as usize * ny as usize;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() != expect * 4 {
        return Err(DumpError::Truncated { expect, found: raw.len() / 4 });
    }
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(FieldReport { quantity, iter, nx, ny, data })
}

/// Error metrics between two maps of identical shape and quantity.
#[derive(Debug, Clone, Copy)]
pub struct MapDifference {
    /// max over cells of |a-b| / max|a| (the reference map's global scale).
    pub max_rel: f64,
    /// ‖a-b‖₂ / ‖a‖₂.
    pub l2_rel: f64,
}

/// Compare two field maps; the denominator is the global max-abs of `a`, so
/// near-zero cells cannot blow the metric up.
pub fn compare_field_maps(a: &FieldReport, b: &FieldReport) -> Result<MapDifference, ShapeMismatch> {
    if a.nx != b.nx || a.ny != b.ny || a.quantity != b.quantity {
        return Err(ShapeMismatch {
            a_nx: a.nx,
            a_ny: a.ny,
            a_q: a.quantity.name(),
            b_nx: b.nx,
            b_ny: b.ny,
            b_q: b.quantity.name(),
        });
    }
    let scale = a
        .data
        .iter()
        .fold(0.0f64, |m, v| m.max((*v as f64).abs()))
        .max(f64::MIN_POSITIVE);
    let mut max_abs = 0.0f64;
    let mut diff_sq = 0.0f64;
    let mut ref_sq = 0.0f64;
    for (x, y) in a.data.iter().zip(&b.data) {
        let d = (*x as f64 - *y as f64).abs();
        max_abs = max_abs.max(d);
        diff_sq += d * d;
        ref_sq += (*x as f64) * (*x as f64);
    }
    Ok(MapDifference {
        max_rel: max_abs / scale,
        l2_rel: (diff_sq / ref_sq.max(f64::MIN_POSITIVE)).sqrt(),
    })
}

/// Field and kinetic energy of the state, with a per-species breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub iter: u32,
    pub field_energy: f64,
    pub kinetic_energy: f64,
    pub per_species: Vec<f64>,
}

pub fn energy_report(state: &SimState) -> EnergyReport {
    let cell = state.cfg.dx() as f64 * state.cfg.dy() as f64;
    let mut field = 0.0f64;
    state.for_each_band(|_, _, grids| {
        field += 0.5 * (grids.0.interior_sq_sum() + grids.1.interior_sq_sum()) * cell;
    });

    let mut per_species = Vec::with_capacity(state.cfg.species.len());
    for (s, spec) in state.cfg.species.iter().enumerate() {
        let mass = spec.particle_mass() as f64;
        let mut kin = 0.0f64;
        state.for_each_particle(s, |p, _| {
            kin += mass * (p.gamma() - 1.0);
        });
        per_species.push(kin * cell);
    }

    EnergyReport {
        iter: state.iter,
        field_energy: field,
        kinetic_energy: per_species.iter().sum(),
        per_species,
    }
}

impl EnergyReport {
    /// One NDJSON line for the per-run energy series.
    pub fn to_ndjson(&self) -> String {
        let species = self
            .per_species
            .iter()
            .map(|v| format!("{v:.9e}"))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            r#"{{"iter":{},"field_energy":{:.9e},"kinetic_energy":{:.9e},"per_species":[{}]}}"#,
            self.iter, self.field_energy, self.kinetic_energy, species
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(nx: u32, ny: u32, data: Vec<f32>) -> FieldReport {
        FieldReport { quantity: Quantity::Bz, iter: 500, nx, ny, data }
    }

    #[test]
    fn compare_identity_is_zero() {
        let a = report(4, 2, vec![1.0, -2.0, 3.0, 0.5, 0.0, 1.5, -0.5, 2.0]);
        let d = compare_field_maps(&a, &a).unwrap();
        assert_eq!(d.max_rel, 0.0);
        assert_eq!(d.l2_rel, 0.0);
    }

    #[test]
    fn one_percent_perturbation_reads_point_zero_one() {
        let a = report(4, 2, vec![1.0, -2.0, 3.0, 0.5, 0.0, 1.5, -0.5, 4.0]);
        let mut b = a.clone();
        b.data[2] += 0.04; // 1% of max|a| = 4.0
        let d = compare_field_maps(&a, &b).unwrap();
        assert!((d.max_rel - 0.01).abs() < 1e-7, "{}", d.max_rel);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = report(4, 2, vec![0.0; 8]);
        let b = report(2, 4, vec![0.0; 8]);
        assert!(compare_field_maps(&a, &b).is_err());
        let mut c = a.clone();
        c.quantity = Quantity::Ey;
        assert!(compare_field_maps(&a, &c).is_err());
    }

    #[test]
    fn dump_roundtrip_is_identity() {
        let dir = std::env::temp_dir().join(format!("empic-dump-{}", std::process::id()));
        let path = dir.join("bz-00500.zdump");
        let a = report(3, 2, vec![1.0, 2.5, -3.25, 0.0, f32::MIN_POSITIVE, 7.0]);
        write_report(&a, &path).unwrap();
        let b = load_report(&path).unwrap();
        assert_eq!(a, b);
        // header is exactly 32 bytes + 6 floats
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 32 + 6 * 4);
        std::fs::remove_dir_all(&dir).ok();
    }
}
