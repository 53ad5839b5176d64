//! Moving-window bookkeeping.
//!
//! The window follows the laser at the speed of light: once the accumulated
//! simulation time crosses one more cell width, every field grid shifts one
//! cell in -x (zero fields entering at +x), particles shift their global ix
//! and are discarded once they leave x < 0, and fresh plasma is injected in
//! the new rightmost column. The shift is a per-row move once per crossing
//! time, tracked by the `n_move` counter, not a per-step copy.

use crate::grid::VecGrid;

/// True when the window must shift before computing step `iter`
/// (iter counts completed steps).
pub fn window_due(iter: u32, dt: f32, dx: f32, n_move: u32) -> bool {
    iter as f64 * dt as f64 > dx as f64 * (n_move as f64 + 1.0)
}

/// Shift all padded rows of a grid one cell in -x; zeros enter at +x.
pub fn shift_grid_left(g: &mut VecGrid) {
    g.shift_left_x();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn due_after_one_cell_crossing_time() {
        let (dt, dx) = (0.035f32, 0.04f32);
        // dx/dt = 1.14 steps per cell
        assert!(!window_due(1, dt, dx, 0));
        assert!(window_due(2, dt, dx, 0));
        assert!(!window_due(2, dt, dx, 1));
        assert!(window_due(3, dt, dx, 1));
    }

    #[test]
    fn cfl_guarantees_at_most_one_shift_per_step() {
        let (dt, dx) = (0.07f32, 0.1f32);
        for iter in 0..1000u32 {
            let mut n_move = 0;
            for i in 0..=iter {
                if window_due(i, dt, dx, n_move) {
                    n_move += 1;
                    assert!(!window_due(i, dt, dx, n_move), "double shift at {i}");
                }
            }
        }
    }

    #[test]
    fn two_shifts_compose_to_a_two_column_move() {
        let mut a = VecGrid::new(6, 3);
        for ix in 0..6 {
            for iy in 0..3 {
                let i = a.idx(ix, iy);
                a.z[i] = (ix * 10 + iy) as f32;
            }
        }
        let before = a.clone();
        shift_grid_left(&mut a);
        shift_grid_left(&mut a);
        for iy in 0..3 {
            for ix in 0..4 {
                assert_eq!(a.z[a.idx(ix, iy)], before.z[before.idx(ix + 2, iy)]);
            }
            assert_eq!(a.z[a.idx(4, iy)], 0.0);
            assert_eq!(a.z[a.idx(5, iy)], 0.0);
        }
    }
}
