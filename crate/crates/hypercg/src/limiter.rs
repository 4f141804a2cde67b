//! Monolithic convex limiting: bounds, the FCT-style flux limiter for
//! intermediate cell averages and the element slope limiter, including the
//! closed-form Euler density/pressure positivity fix.

use crate::error::{Result, SolverError};
use crate::field::State;
use crate::mesh::Mesh;
use crate::problems::euler::GAMMA;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsMode {
    Global,
    LocalStencil,
}

/// Scalar bounds for cell averages (per element) and nodal states (per node).
#[derive(Clone, Debug)]
pub enum ScalarBounds {
    Global {
        lo: f64,
        hi: f64,
    },
    Local {
        elem: Vec<(f64, f64)>,
        node: Vec<(f64, f64)>,
    },
}

impl ScalarBounds {
    #[inline]
    pub fn elem(&self, e: usize) -> (f64, f64) {
        match self {
            ScalarBounds::Global { lo, hi } => (*lo, *hi),
            ScalarBounds::Local { elem, .. } => elem[e],
        }
    }

    #[inline]
    pub fn node(&self, i: usize) -> (f64, f64) {
        match self {
            ScalarBounds::Global { lo, hi } => (*lo, *hi),
            ScalarBounds::Local { node, .. } => node[i],
        }
    }
}

/// Bounds from the invariant domain (global mode) or from the cell-average
/// stencils (local mode).
pub fn compute_bounds(
    mesh: &Mesh,
    mode: BoundsMode,
    global: (f64, f64),
    avg: &[State],
) -> ScalarBounds {
    match mode {
        BoundsMode::Global => ScalarBounds::Global {
            lo: global.0,
            hi: global.1,
        },
        BoundsMode::LocalStencil => {
            let mut elem = Vec::with_capacity(mesh.n_elems);
            for e in 0..mesh.n_elems {
                let mut lo = avg[e][0];
                let mut hi = avg[e][0];
                for (_, ne) in mesh.interior_neighbors(e) {
                    lo = lo.min(avg[ne][0]);
                    hi = hi.max(avg[ne][0]);
                }
                elem.push((lo, hi));
            }
            let node = mesh
                .node_elems
                .iter()
                .map(|elems| {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for &e in elems {
                        lo = lo.min(avg[e][0]);
                        hi = hi.max(avg[e][0]);
                    }
                    (lo, hi)
                })
                .collect();
            ScalarBounds::Local { elem, node }
        }
    }
}

/// Two-sided admissible flux window of one element for the FCT limiter.
/// `kappa = |K_e| / |dK_e|`; boundary facets use only the owning side.
pub struct FluxWindowSide {
    pub kappa: f64,
    pub dt: f64,
    pub bar_low: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Limited antidiffusive facet flux: clip f^A into [f_min, f_max] built from
/// the discrete maximum principle on both adjacent low-order averages.
/// `right` is None on boundary facets (one-sided formula).
pub fn limited_antidiffusive_flux(
    fa: f64,
    left: &FluxWindowSide,
    right: Option<&FluxWindowSide>,
) -> f64 {
    let up = left.kappa * (left.hi - left.bar_low) / left.dt;
    let dn = left.kappa * (left.lo - left.bar_low) / left.dt;
    let (f_max, f_min) = match right {
        Some(r) => (
            up.min(r.kappa * (r.bar_low - r.lo) / r.dt),
            dn.max(r.kappa * (r.bar_low - r.hi) / r.dt),
        ),
        None => (up, dn),
    };
    if fa >= 0.0 {
        fa.min(f_max)
    } else {
        fa.max(f_min)
    }
}

/// Nodal correction factor of the FCT / Barth-Jespersen type slope limiter.
pub fn slope_factor_scalar(bar: f64, f_node: f64, mass: f64, lo: f64, hi: f64) -> f64 {
    if f_node > 0.0 {
        (mass * (hi - bar) / f_node).clamp(0.0, 1.0)
    } else if f_node < 0.0 {
        (mass * (lo - bar) / f_node).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Element factor beta_e = min over nodes.
pub fn slope_factor_element(
    bar: f64,
    f_nodes: &[f64],
    mass: f64,
    node_bounds: impl Fn(usize) -> (f64, f64),
) -> f64 {
    let mut beta: f64 = 1.0;
    for (i, &f) in f_nodes.iter().enumerate() {
        let (lo, hi) = node_bounds(i);
        beta = beta.min(slope_factor_scalar(bar, f, mass, lo, hi));
    }
    beta
}

/// Largest beta in [0, 1] keeping rho and p of bar + beta * delta above the
/// floors for every node; the pressure constraint is the quadratic
/// A(beta) >= eps_p/(gamma-1) * rho(beta), solved in closed form with the
/// smallest positive downward crossing.
pub fn euler_positivity_factor(
    bar: &State,
    deltas: &[State],
    eps_rho: f64,
    eps_p: f64,
) -> Result<f64> {
    let rho0 = bar[0];
    let m0 = bar[1];
    let e0 = bar[2];
    let k = eps_p / (GAMMA - 1.0);
    let q0 = rho0 * e0 - 0.5 * m0 * m0 - k * rho0;
    if rho0 < eps_rho || q0 < -1e-14 * (rho0 * e0).abs().max(1e-300) {
        return Err(SolverError::InadmissibleState {
            context: format!(
                "euler_positivity_factor: average rho={rho0:.3e} margin={q0:.3e}"
            ),
        });
    }
    let mut beta: f64 = 1.0;
    for d in deltas {
        // density: linear constraint
        if d[0] < 0.0 {
            beta = beta.min(((rho0 - eps_rho) / -d[0]).max(0.0));
        }
        // pressure: quadratic Q(b) = a b^2 + bb b + c with c = q0 >= 0;
        // the root is shaved by a relative margin so rounding cannot push
        // the limited state below the floor
        let a = d[0] * d[2] - 0.5 * d[1] * d[1];
        let bb = rho0 * d[2] + e0 * d[0] - m0 * d[1] - k * d[0];
        let c = q0.max(0.0);
        beta = beta.min(first_downward_crossing(a, bb, c));
    }
    Ok(beta.clamp(0.0, 1.0))
}

/// Smallest b > 0 where the quadratic a b^2 + bb b + c (with c >= 0) becomes
/// negative; 1 if it stays nonnegative on [0, 1].
fn first_downward_crossing(a: f64, bb: f64, c: f64) -> f64 {
    // roots are shaved by a relative margin so rounding cannot push the
    // limited state past the crossing
    const SHAVE: f64 = 1.0 - 1e-11;
    let scale = a.abs().max(bb.abs()).max(c.abs()).max(1e-300);
    if a.abs() < 1e-14 * scale {
        // effectively linear
        if bb >= 0.0 {
            return 1.0;
        }
        return (SHAVE * c / -bb).min(1.0);
    }
    let disc = bb * bb - 4.0 * a * c;
    if disc <= 0.0 {
        // no real root: with c >= 0 the sign never flips on [0, 1]
        return 1.0;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (bb + bb.signum() * sq);
    let (mut r1, mut r2) = (q / a, if q != 0.0 { c / q } else { 0.0 });
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if a > 0.0 {
        // convex: negative between the roots
        if r1 > 0.0 {
            (SHAVE * r1).min(1.0)
        } else if r2 > 0.0 {
            // Q(0) = c >= 0 with r1 <= 0 < r2 only when c ~ 0
            0.0
        } else {
            1.0
        }
    } else {
        // concave: nonnegative between the roots, 0 lies inside since c >= 0
        if r2 > 0.0 {
            (SHAVE * r2).min(1.0)
        } else {
            0.0
        }
    }
}
