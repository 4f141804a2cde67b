//! First-order finite volume reference solver with LLF fluxes and forward
//! Euler stepping. Serves as the IDP-by-construction oracle for tests that
//! lack closed-form solutions.

use crate::error::Result;
use crate::field::{state_axpy, State, MAX_VARS};
use crate::quadrature::gauss_legendre;

use super::Preset;

/// Cell-average reference solution on a uniform 1D grid.
pub struct FvReference {
    pub n_cells: usize,
    pub h: f64,
    pub x_lo: f64,
    pub cells: Vec<State>,
}

impl FvReference {
    /// Value of the piecewise-constant profile at x.
    pub fn at(&self, x: f64) -> State {
        let i = (((x - self.x_lo) / self.h).floor() as isize)
            .clamp(0, self.n_cells as isize - 1) as usize;
        self.cells[i]
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.h
    }
}

/// Run the FV-LLF scheme to `t_final` at the given CFL number (0.4 in the
/// reference configuration).
pub fn fv_llf_reference(
    preset: Preset,
    n_cells: usize,
    t_final: f64,
    cfl: f64,
) -> Result<FvReference> {
    assert_eq!(preset.dim(), 1, "FV reference is 1D only");
    let (lo, hi) = preset.domain();
    let h = (hi[0] - lo[0]) / n_cells as f64;
    // initialize with exact cell averages (4-point Gauss per cell)
    let (gx, gw) = gauss_legendre(4);
    let mut cells: Vec<State> = (0..n_cells)
        .map(|i| {
            let x0 = lo[0] + i as f64 * h;
            let mut avg = [0.0; MAX_VARS];
            for (&x, &w) in gx.iter().zip(&gw) {
                let u = preset.initial([x0 + x * h, 0.0]);
                avg = state_axpy(w, &u, &avg);
            }
            avg
        })
        .collect();

    let periodic = preset.periodic();
    let m = preset.n_vars();
    let mut t = 0.0;
    let mut fluxes: Vec<State> = vec![[0.0; MAX_VARS]; n_cells + 1];
    while t < t_final - 1e-14 {
        // interface states; boundary data from the weak BC closure
        let mut lambda_max: f64 = 1e-14;
        for i in 0..=n_cells {
            let (ul, ur) = if periodic {
                (
                    cells[(i + n_cells - 1) % n_cells],
                    cells[i % n_cells],
                )
            } else if i == 0 {
                let inner = cells[0];
                (
                    preset.boundary_state([lo[0], 0.0], t, &inner, [-1.0, 0.0]),
                    inner,
                )
            } else if i == n_cells {
                let inner = cells[n_cells - 1];
                (
                    inner,
                    preset.boundary_state([hi[0], 0.0], t, &inner, [1.0, 0.0]),
                )
            } else {
                (cells[i - 1], cells[i])
            };
            let x = [lo[0] + i as f64 * h, 0.0];
            let lam = preset.wave_speed_bound(&[x], &ul, &ur, [1.0, 0.0], true)?;
            lambda_max = lambda_max.max(lam);
            let fl = preset.flux(x, &ul);
            let fr = preset.flux(x, &ur);
            for k in 0..m {
                fluxes[i][k] = 0.5 * (fl[0][k] + fr[0][k]) - 0.5 * lam * (ur[k] - ul[k]);
            }
        }
        let dt = (cfl * h / lambda_max).min(t_final - t);
        for i in 0..n_cells {
            let diff = state_axpy(-1.0, &fluxes[i], &fluxes[i + 1]);
            cells[i] = state_axpy(-dt / h, &diff, &cells[i]);
        }
        t += dt;
    }
    Ok(FvReference {
        n_cells,
        h,
        x_lo: lo[0],
        cells,
    })
}

/// L1 distance between a sampled profile and the reference cell averages.
pub fn l1_distance(reference: &FvReference, sample: impl Fn(f64) -> f64, var: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..reference.n_cells {
        let x = reference.cell_center(i);
        acc += (sample(x) - reference.cells[i][var]).abs() * reference.h;
    }
    acc
}
