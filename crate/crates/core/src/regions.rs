//! Row-band spatial decomposition.
//!
//! The grid is split into contiguous row bands along y, forming a periodic
//! ring: each region owns its rows' fields, current, and resident particles
//! (with region-local iy), plus guard rows mirroring its neighbors. Three
//! boundary operations keep the ring consistent: particle migration between
//! adjacent regions, ghost-current reduction after the deposit, and
//! ghost-field exchange after the field advance. None of them lock anything;
//! exclusivity comes from the caller (barriers or dependency clauses).

use crate::config::SimConfig;
use crate::grid::{CurrentDensity, EMFields, RowBand, VecGrid, G_HI, G_LO};
use crate::inject;
use crate::kernels::{self, StepCoeffs};
use crate::laser;
use crate::particle::Particle;
use thiserror::Error;

/// Minimum region height: the guard reach of the field stencils and the
/// current deposit (two rows), so nothing ever skips past a whole region.
pub const MIN_REGION_ROWS: usize = 2;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("region {region}: incoming particle claims to have moved {rows} rows, more than one region")]
    MigrationOverflow { region: usize, rows: i32 },
    #[error("partition would make region {region} only {rows} rows tall (minimum {MIN_REGION_ROWS})")]
    RegionTooThin { region: usize, rows: usize },
    #[error(transparent)]
    Laser(#[from] laser::LaserError),
}

/// Per-species particle storage of one region, with staging buffers for
/// particles that crossed the lower/upper boundary during the push.
#[derive(Debug, Clone, Default)]
pub struct SpeciesBin {
    pub parts: Vec<Particle>,
    pub out_lo: Vec<Particle>,
    pub out_hi: Vec<Particle>,
}

/// A contiguous row band of the grid plus its resident particles.
#[derive(Debug, Clone)]
pub struct Region {
    pub id: usize,
    /// First owned global row.
    pub y0: usize,
    pub n_rows: usize,
    pub nx: usize,
    pub emf: EMFields,
    pub j: CurrentDensity,
    pub species: Vec<SpeciesBin>,
}

/// Balanced row counts: heights differ by at most one and sum to `ny`.
pub fn region_heights(ny: usize, n_regions: usize) -> Vec<usize> {
    let base = ny / n_regions;
    let rem = ny % n_regions;
    (0..n_regions)
        .map(|r| if r < rem { base + 1 } else { base })
        .collect()
}

/// Split the validated config into a periodic ring of regions, injecting
/// each species into its owner regions and initializing the fields
/// (including the laser) with valid guard rows.
pub fn partition(cfg: &SimConfig) -> Result<Vec<Region>, RegionError> {
    let heights = region_heights(cfg.ny, cfg.n_regions);
    if let Some((r, rows)) = heights
        .iter()
        .enumerate()
        .find(|(_, h)| **h < MIN_REGION_ROWS)
    {
        return Err(RegionError::RegionTooThin { region: r, rows: *rows });
    }

    // Global fields once (the laser spans rows), then slice into bands.
    let mut global = EMFields::new(cfg.nx, cfg.ny);
    if let Some(l) = &cfg.laser {
        laser::init_laser(&mut global, l, cfg)?;
    }
    global.copy_guard_y();
    if !cfg.moving_window {
        global.copy_guard_x();
    }

    let mut regions = Vec::with_capacity(cfg.n_regions);
    let mut y0 = 0usize;
    let mut band = RowBand::default();
    for (id, rows) in heights.iter().copied().enumerate() {
        let mut emf = EMFields::new(cfg.nx, rows);
        // rows [y0-1, y0+rows+2) of the global grid, guards included
        global.e.copy_rows_out(y0 as i32 - 1, rows + G_LO + G_HI, &mut band);
        emf.e.copy_rows_in(-(G_LO as i32), &band);
        global.b.copy_rows_out(y0 as i32 - 1, rows + G_LO + G_HI, &mut band);
        emf.b.copy_rows_in(-(G_LO as i32), &band);

        let mut species = Vec::with_capacity(cfg.species.len());
        for (s, spec) in cfg.species.iter().enumerate() {
            let mut bin = SpeciesBin::default();
            inject::inject_cells(
                s,
                spec,
                cfg,
                0..cfg.nx as i32,
                y0 as i32..(y0 + rows) as i32,
                y0 as i32,
                0,
                &mut bin.parts,
            );
            species.push(bin);
        }

        regions.push(Region {
            id,
            y0,
            n_rows: rows,
            nx: cfg.nx,
            emf,
            j: CurrentDensity::new(cfg.nx, rows),
            species,
        });
        y0 += rows;
    }
    debug_assert_eq!(y0, cfg.ny);
    Ok(regions)
}

/// Stages 1–3 for every particle of one region: zero the local current,
/// interpolate/push/deposit each particle, wrap x periodically (unless the
/// window moves), and stage particles that crossed a y boundary.
pub fn advance_region(region: &mut Region, coeffs: &[StepCoeffs], moving_window: bool) {
    region.j.j.zero();
    let nx = region.nx as i32;
    let n_rows = region.n_rows as i32;
    let emf = &region.emf;
    let j = &mut region.j.j;
    for (bin, c) in region.species.iter_mut().zip(coeffs) {
        advance_species_into(bin, c, emf, j, 0, nx, n_rows, moving_window, false);
    }
}

/// The particle loop shared by the global, regional, and shared-current
/// paths. `jy_off` maps region-local rows into the deposit grid (0 for a
/// local buffer, the region's y0 for a shared global buffer). With `wrap_y`
/// the y index wraps periodically in place (global layout); otherwise
/// boundary crossers are staged into the outgoing buffers.
#[allow(clippy::too_many_arguments)]
pub fn advance_species_into(
    bin: &mut SpeciesBin,
    coeffs: &StepCoeffs,
    emf: &EMFields,
    j: &mut VecGrid,
    jy_off: i32,
    nx: i32,
    n_rows: i32,
    moving_window: bool,
    wrap_y: bool,
) {
    let mut i = 0;
    while i < bin.parts.len() {
        let p = &mut bin.parts[i];
        kernels::advance_deposit_one(p, emf, j, jy_off, coeffs);
        if !moving_window {
            if p.ix < 0 {
                p.ix += nx;
            } else if p.ix >= nx {
                p.ix -= nx;
            }
        } else if p.ix < 0 {
            // left the moving window at the trailing edge
            bin.parts.swap_remove(i);
            continue;
        }
        if wrap_y {
            if p.iy < 0 {
                p.iy += n_rows;
            } else if p.iy >= n_rows {
                p.iy -= n_rows;
            }
            i += 1;
        } else if p.iy < 0 {
            let p = bin.parts.swap_remove(i);
            bin.out_lo.push(p);
        } else if p.iy >= n_rows {
            let p = bin.parts.swap_remove(i);
            bin.out_hi.push(p);
        } else {
            i += 1;
        }
    }
}

/// Re-localize an incoming particle's row index: from the lower neighbor its
/// iy was counted past that neighbor's rows; from the upper neighbor it went
/// negative. A result outside [0, n_rows) means the particle skipped a whole
/// region.
pub fn relocalize(
    p: &mut Particle,
    from_lower: bool,
    neighbor_rows: usize,
    n_rows: usize,
    region_id: usize,
) -> Result<(), RegionError> {
    let before = p.iy;
    p.iy = if from_lower {
        p.iy - neighbor_rows as i32
    } else {
        p.iy + n_rows as i32
    };
    if p.iy < 0 || p.iy >= n_rows as i32 {
        return Err(RegionError::MigrationOverflow {
            region: region_id,
            rows: before,
        });
    }
    Ok(())
}

/// Drain the staging buffers facing `region` from its ring neighbors,
/// re-localizing iy. Total particle count across the ring is unchanged once
/// every region has run its migration.
pub fn migrate_into(
    region_id: usize,
    n_rows: usize,
    species: &mut [SpeciesBin],
    lower_out_hi: &mut [Vec<Particle>],
    lower_n_rows: usize,
    upper_out_lo: &mut [Vec<Particle>],
) -> Result<(), RegionError> {
    for (s, bin) in species.iter_mut().enumerate() {
        for mut p in lower_out_hi[s].drain(..) {
            relocalize(&mut p, true, lower_n_rows, n_rows, region_id)?;
            bin.parts.push(p);
        }
        for mut p in upper_out_lo[s].drain(..) {
            relocalize(&mut p, false, 0, n_rows, region_id)?;
            bin.parts.push(p);
        }
    }
    Ok(())
}

/// Ring migration over plain regions (barrier-style callers and tests).
pub fn migrate_ring(regions: &mut [Region]) -> Result<(), RegionError> {
    let n = regions.len();
    let n_species = regions[0].species.len();
    for r in 0..n {
        let lower = (r + n - 1) % n;
        let upper = (r + 1) % n;
        let lower_rows = regions[lower].n_rows;
        let mut from_lo: Vec<Vec<Particle>> = (0..n_species)
            .map(|s| std::mem::take(&mut regions[lower].species[s].out_hi))
            .collect();
        let mut from_hi: Vec<Vec<Particle>> = (0..n_species)
            .map(|s| std::mem::take(&mut regions[upper].species[s].out_lo))
            .collect();
        let rows = regions[r].n_rows;
        migrate_into(
            r,
            rows,
            &mut regions[r].species,
            &mut from_lo,
            lower_rows,
            &mut from_hi,
        )?;
    }
    Ok(())
}

/// Add the neighbors' guard-row deposits into this region's boundary rows,
/// then fold the x guards. `spill_hi_of_lower` are the lower neighbor's two
/// high guard rows (this region's rows 0,1); `spill_lo_of_upper` is the
/// upper neighbor's low guard row (this region's last row).
pub fn reduce_ghost_current(
    j: &mut VecGrid,
    n_rows: usize,
    spill_hi_of_lower: &RowBand,
    spill_lo_of_upper: &RowBand,
    x_periodic: bool,
) {
    j.add_rows_in(0, spill_hi_of_lower);
    j.add_rows_in(n_rows as i32 - 1, spill_lo_of_upper);
    if x_periodic {
        j.fold_x_periodic(0..n_rows as i32);
    }
}

/// Capture the raw guard-row deposits a region spills onto its neighbors.
pub fn capture_spills(j: &VecGrid, n_rows: usize, spill_lo: &mut RowBand, spill_hi: &mut RowBand) {
    j.copy_rows_out(-(G_LO as i32), G_LO, spill_lo);
    j.copy_rows_out(n_rows as i32, G_HI, spill_hi);
}

/// Fields a region donates to its neighbors' guard rows: `edge_lo` holds the
/// first two interior rows (the lower... rows the *upper* guards of the
/// neighbor below need), `edge_hi` the last interior row.
#[derive(Debug, Clone, Default)]
pub struct EdgeBand {
    pub e: RowBand,
    pub b: RowBand,
}

pub fn capture_edges(emf: &EMFields, n_rows: usize, edge_lo: &mut EdgeBand, edge_hi: &mut EdgeBand) {
    emf.e.copy_rows_out(0, G_HI, &mut edge_lo.e);
    emf.b.copy_rows_out(0, G_HI, &mut edge_lo.b);
    emf.e.copy_rows_out(n_rows as i32 - 1, G_LO, &mut edge_hi.e);
    emf.b.copy_rows_out(n_rows as i32 - 1, G_LO, &mut edge_hi.b);
}

/// Overwrite this region's guard rows with the adjacent interior rows of its
/// neighbors: the ring is periodic in y; x guards were refreshed by the
/// donor before capture.
pub fn exchange_ghost_fields(
    emf: &mut EMFields,
    n_rows: usize,
    edge_hi_of_lower: &EdgeBand,
    edge_lo_of_upper: &EdgeBand,
) {
    emf.e.copy_rows_in(-(G_LO as i32), &edge_hi_of_lower.e);
    emf.b.copy_rows_in(-(G_LO as i32), &edge_hi_of_lower.b);
    emf.e.copy_rows_in(n_rows as i32, &edge_lo_of_upper.e);
    emf.b.copy_rows_in(n_rows as i32, &edge_lo_of_upper.b);
}

/// Moving-window shift of one region: fields move one cell in -x, particles
/// decrement ix (dropping those leaving x < 0), and the new rightmost column
/// is refilled per species. `epoch` is the post-shift n_move count, keying
/// the injection draws.
pub fn shift_region_window(region: &mut Region, cfg: &SimConfig, epoch: u32) {
    kernels::shift_grid_left(&mut region.emf.e);
    kernels::shift_grid_left(&mut region.emf.b);
    let nx = cfg.nx as i32;
    for (s, spec) in cfg.species.iter().enumerate() {
        let bin = &mut region.species[s];
        let mut i = 0;
        while i < bin.parts.len() {
            bin.parts[i].ix -= 1;
            if bin.parts[i].ix < 0 {
                bin.parts.swap_remove(i);
            } else {
                i += 1;
            }
        }
        inject::inject_cells(
            s,
            spec,
            cfg,
            nx - 1..nx,
            region.y0 as i32..(region.y0 + region.n_rows) as i32,
            region.y0 as i32,
            epoch,
            &mut bin.parts,
        );
    }
}

/// Species step coefficients for a config.
pub fn species_coeffs(cfg: &SimConfig) -> Vec<StepCoeffs> {
    cfg.species
        .iter()
        .map(|s| StepCoeffs::new(s.m_q, s.particle_charge(), cfg.dt, cfg.dx(), cfg.dy()))
        .collect()
}

/// Total particles per species across a ring (staging included).
pub fn ring_population(regions: &[Region]) -> Vec<usize> {
    let n_species = regions[0].species.len();
    let mut counts = vec![0usize; n_species];
    for r in regions {
        for (s, bin) in r.species.iter().enumerate() {
            counts[s] += bin.parts.len() + bin.out_lo.len() + bin.out_hi.len();
        }
    }
    counts
}
