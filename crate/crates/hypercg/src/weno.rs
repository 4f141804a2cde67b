//! WENO smoothness sensor and dissipative stabilization for the CG scheme:
//! Sobolev semi-norms, candidate polynomials extrapolated from facet
//! neighbors, nonlinear weights, the consistent gradient projection and the
//! entropy correction factor.

use crate::basis::{bernstein_values, derivative_ctrl, reparametrize, MAX_LOCAL};
use crate::error::{Result, SolverError};
use crate::mesh::{Mesh, Neighbor};
use crate::problems::Preset;

/// Up to four facet neighbors plus the element's own polynomial.
pub const MAX_CAND: usize = 5;

#[derive(Clone, Copy, Debug)]
pub struct WenoConfig {
    /// Steepening exponent q >= 1 of the shock detector.
    pub q: f64,
    /// Power r of the nonlinear weights.
    pub r: i32,
    /// Division guard in the nonlinear weights.
    pub eps: f64,
    /// Linear weight of each neighbor candidate; w_0 = 1 - n_e * w.
    pub linear_weight: f64,
    /// Relative semi-norm floor below which an element counts as constant.
    pub tol_norm: f64,
}

impl Default for WenoConfig {
    fn default() -> Self {
        WenoConfig {
            q: 1.0,
            r: 2,
            eps: 1e-12,
            linear_weight: 0.2,
            tol_norm: 1e-14,
        }
    }
}

/// Gather the local coefficient vector of element `e`.
pub fn element_coeffs(mesh: &Mesh, u_var: &[f64], e: usize, out: &mut [f64]) {
    for (slot, &g) in out.iter_mut().zip(mesh.nodes_of(e)) {
        *slot = u_var[g];
    }
}

/// Sobolev semi-norm of a local polynomial (coefficients on the reference
/// element). The mesh-size weights h^(2|k|-d) cancel against the affine
/// mapping in 1D; in 2D the aspect factors remain.
pub fn sobolev_seminorm(mesh: &Mesh, coeffs: &[f64]) -> f64 {
    let basis = &mesh.basis;
    if mesh.dim == 1 {
        let p = basis.degree;
        let mut work = [0.0; MAX_LOCAL];
        work[..=p].copy_from_slice(&coeffs[..=p]);
        let mut total = 0.0;
        let mut deg = p;
        let mut vals = [0.0; MAX_LOCAL];
        for _ in 1..=p {
            let mut next = [0.0; MAX_LOCAL];
            derivative_ctrl(deg, &work[..=deg], &mut next);
            deg -= 1;
            work[..=deg].copy_from_slice(&next[..=deg]);
            for (&x, &w) in basis.line_points.iter().zip(&basis.line_weights) {
                bernstein_values(deg, x, &mut vals);
                let v: f64 = (0..=deg).map(|j| work[j] * vals[j]).sum();
                total += w * v * v;
            }
        }
        total.sqrt()
    } else {
        // Q1 closed form: only first derivatives enter (|k| <= p = 1)
        let a = coeffs[1] - coeffs[0];
        let b = coeffs[3] - coeffs[2];
        let c = coeffs[2] - coeffs[0];
        let d = coeffs[3] - coeffs[1];
        let ix = (a * a + a * b + b * b) / 3.0;
        let iy = (c * c + c * d + d * d) / 3.0;
        ((mesh.hy / mesh.hx) * ix + (mesh.hx / mesh.hy) * iy).sqrt()
    }
}

/// Candidate polynomials for the Hermite-WENO reconstruction on element `e`:
/// candidate 0 is u_h restricted to K_e; each interior facet neighbor
/// contributes its polynomial extrapolated onto K_e and shifted to share the
/// cell average. Returns the number of candidates.
pub fn candidate_polynomials(
    mesh: &Mesh,
    u_var: &[f64],
    e: usize,
    out: &mut [[f64; MAX_LOCAL]; MAX_CAND],
) -> usize {
    let n_local = mesh.n_local();
    let p = mesh.basis.degree;
    element_coeffs(mesh, u_var, e, &mut out[0][..n_local]);
    let own_avg = mesh.basis.cell_average(&out[0][..n_local]);
    let mut count = 1;
    let mut nb_coeffs = [0.0; MAX_LOCAL];
    for lf in 0..mesh.n_facets_per_elem() {
        let view = mesh.facet_view(e, lf);
        let ne = match view.other {
            Neighbor::Interior(ne) => ne,
            Neighbor::Boundary(_) => continue,
        };
        element_coeffs(mesh, u_var, ne, &mut nb_coeffs[..n_local]);
        let cand = &mut out[count];
        if mesh.dim == 1 {
            // this element in the neighbor's reference coordinates
            let (a, b) = if lf == 0 { (1.0, 2.0) } else { (-1.0, 0.0) };
            reparametrize(p, &nb_coeffs, a, b, &mut cand[..n_local]);
        } else {
            // Q1: linear extension across the shared edge
            let ext = |c0: f64, c1: f64, forward: bool| -> (f64, f64) {
                if forward {
                    (c1, 2.0 * c1 - c0) // neighbor sits before us in this axis
                } else {
                    (2.0 * c0 - c1, c0) // neighbor sits after us
                }
            };
            match lf {
                0 | 2 => {
                    // vertical extension per x-column
                    for jx in 0..2 {
                        let (lo, hi) = ext(nb_coeffs[jx], nb_coeffs[2 + jx], lf == 0);
                        cand[jx] = lo;
                        cand[2 + jx] = hi;
                    }
                }
                _ => {
                    // horizontal extension per y-row
                    for jy in 0..2 {
                        let (lo, hi) = ext(nb_coeffs[2 * jy], nb_coeffs[2 * jy + 1], lf == 3);
                        cand[2 * jy] = lo;
                        cand[2 * jy + 1] = hi;
                    }
                }
            }
        }
        let shift = own_avg - mesh.basis.cell_average(&cand[..n_local]);
        for c in cand[..n_local].iter_mut() {
            *c += shift;
        }
        count += 1;
    }
    count
}

/// Convex-combination weights and the blended reconstruction u^{e,*}.
pub fn weno_reconstruct(
    mesh: &Mesh,
    cfg: &WenoConfig,
    u_var: &[f64],
    e: usize,
) -> ([f64; MAX_LOCAL], usize) {
    let mut cands = [[0.0; MAX_LOCAL]; MAX_CAND];
    let count = candidate_polynomials(mesh, u_var, e, &mut cands);
    let n_local = mesh.n_local();
    let n_e = count - 1;
    let w0 = 1.0 - cfg.linear_weight * n_e as f64;
    let mut weights = [0.0; MAX_CAND];
    let mut sum = 0.0;
    for (l, cand) in cands[..count].iter().enumerate() {
        let lin = if l == 0 { w0 } else { cfg.linear_weight };
        let norm = sobolev_seminorm(mesh, &cand[..n_local]);
        let w = lin / (norm.powi(cfg.r) + cfg.eps);
        weights[l] = w;
        sum += w;
    }
    let mut blend = [0.0; MAX_LOCAL];
    for (l, cand) in cands[..count].iter().enumerate() {
        let w = weights[l] / sum;
        for j in 0..n_local {
            blend[j] += w * cand[j];
        }
    }
    (blend, count)
}

/// Shock detector value from the deviation and field semi-norms.
pub fn sensor_value(deviation: f64, field: f64, tol: f64, q: f64) -> f64 {
    if field <= tol {
        return 1.0;
    }
    1.0 - (deviation / field).min(1.0).powf(q)
}

/// gamma_e for one variable of element `e`.
pub fn smoothness_sensor(mesh: &Mesh, cfg: &WenoConfig, u_var: &[f64], e: usize) -> f64 {
    let n_local = mesh.n_local();
    let (blend, _) = weno_reconstruct(mesh, cfg, u_var, e);
    let mut own = [0.0; MAX_LOCAL];
    element_coeffs(mesh, u_var, e, &mut own[..n_local]);
    let field = sobolev_seminorm(mesh, &own[..n_local]);
    let mut dev = [0.0; MAX_LOCAL];
    let mut scale: f64 = 1.0;
    for j in 0..n_local {
        dev[j] = own[j] - blend[j];
        scale = scale.max(own[j].abs());
    }
    let deviation = sobolev_seminorm(mesh, &dev[..n_local]);
    sensor_value(deviation, field, cfg.tol_norm * scale, cfg.q)
}

/// Matrix-free application of the consistent mass matrix.
pub fn apply_consistent_mass(mesh: &Mesh, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    let n_local = mesh.n_local();
    let basis = &mesh.basis;
    let mut local = [0.0; MAX_LOCAL];
    for e in 0..mesh.n_elems {
        element_coeffs(mesh, x, e, &mut local[..n_local]);
        let nodes = mesh.nodes_of(e);
        for (q, w) in basis.quad_weights.iter().enumerate() {
            let wp = w * mesh.elem_volume;
            let phi = &basis.phi[q];
            let val: f64 = (0..n_local).map(|j| local[j] * phi[j]).sum();
            for i in 0..n_local {
                out[nodes[i]] += wp * phi[i] * val;
            }
        }
    }
}

/// Lumped-preconditioned conjugate gradients for the SPD mass system.
/// (The plain lumped-preconditioned Richardson sweep stalls beyond P1;
/// PCG reaches 1e-10 in a few dozen iterations for every degree in scope.)
pub fn solve_consistent_mass(
    mesh: &Mesh,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let lumped = mesh.global_lumped_masses();
    let n = b.len();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    // lumped solve as the initial guess
    let mut x: Vec<f64> = b.iter().zip(&lumped).map(|(bi, mi)| bi / mi).collect();
    let mut ax = vec![0.0; n];
    apply_consistent_mass(mesh, &x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&lumped).map(|(ri, mi)| ri / mi).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let res = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res <= tol * norm_b {
            return Ok(x);
        }
        apply_consistent_mass(mesh, &p, &mut ax);
        let pap: f64 = p.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        for i in 0..n {
            z[i] = r[i] / lumped[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = r.iter().map(|x| x * x).sum::<f64>().sqrt() / norm_b;
    if res <= tol * 10.0 {
        return Ok(x);
    }
    Err(SolverError::NonConvergence {
        what: "consistent mass solve".into(),
        residual: res,
    })
}

/// Consistent L2 projection of grad(u_h) into the CG space, per direction.
pub fn gradient_projection(mesh: &Mesh, u_var: &[f64]) -> Result<Vec<[f64; 2]>> {
    let n = mesh.n_nodes;
    let n_local = mesh.n_local();
    let basis = &mesh.basis;
    let scale = mesh.grad_scale();
    let mut rhs = [vec![0.0; n], vec![0.0; n]];
    let mut local = [0.0; MAX_LOCAL];
    for e in 0..mesh.n_elems {
        element_coeffs(mesh, u_var, e, &mut local[..n_local]);
        let nodes = mesh.nodes_of(e);
        for (q, w) in basis.quad_weights.iter().enumerate() {
            let wp = w * mesh.elem_volume;
            let phi = &basis.phi[q];
            let grad = &basis.grad[q];
            let mut gu = [0.0, 0.0];
            for j in 0..n_local {
                gu[0] += local[j] * grad[j][0] * scale[0];
                gu[1] += local[j] * grad[j][1] * scale[1];
            }
            for i in 0..n_local {
                rhs[0][nodes[i]] += wp * phi[i] * gu[0];
                if mesh.dim == 2 {
                    rhs[1][nodes[i]] += wp * phi[i] * gu[1];
                }
            }
        }
    }
    let gx = solve_consistent_mass(mesh, &rhs[0], 1e-10, 200)?;
    let gy = if mesh.dim == 2 {
        solve_consistent_mass(mesh, &rhs[1], 1e-10, 200)?
    } else {
        vec![0.0; n]
    };
    Ok(gx.into_iter().zip(gy).map(|(a, b)| [a, b]).collect())
}

/// Element stabilization rows s_h^e(phi_i, u_h) for one variable:
/// nu_e * integral of grad(phi_i) . (grad(u_h) - gamma_e g_h).
pub fn stabilization_rows(
    mesh: &Mesh,
    coeffs: &[f64],
    g_local: &[[f64; 2]],
    gamma: f64,
    nu: f64,
    e: usize,
    out: &mut [f64],
) {
    let _ = e;
    let basis = &mesh.basis;
    let n_local = mesh.n_local();
    let scale = mesh.grad_scale();
    out[..n_local].fill(0.0);
    for (q, w) in basis.quad_weights.iter().enumerate() {
        let wp = w * mesh.elem_volume;
        let phi = &basis.phi[q];
        let grad = &basis.grad[q];
        let mut gu = [0.0, 0.0];
        let mut gh = [0.0, 0.0];
        for j in 0..n_local {
            gu[0] += coeffs[j] * grad[j][0] * scale[0];
            gu[1] += coeffs[j] * grad[j][1] * scale[1];
            gh[0] += g_local[j][0] * phi[j];
            gh[1] += g_local[j][1] * phi[j];
        }
        let dx = gu[0] - gamma * gh[0];
        let dy = gu[1] - gamma * gh[1];
        for (i, slot) in out[..n_local].iter_mut().enumerate() {
            *slot += nu
                * wp
                * (grad[i][0] * scale[0] * dx + grad[i][1] * scale[1] * dy);
        }
    }
}

/// Entropy correction factor xi_e in [0, 1] for scalar problems with the
/// square entropy: clamps the ratio of discrete entropy production to the
/// maximal low-order dissipation.
pub fn entropy_correction_factor(
    mesh: &Mesh,
    preset: Preset,
    coeffs: &[f64],
    udot_low: &[f64],
    nu_lo: f64,
    e: usize,
) -> f64 {
    let basis = &mesh.basis;
    let n_local = mesh.n_local();
    let scale = mesh.grad_scale();
    let origin = mesh.elem_origin(e);
    let mut production = 0.0;
    let mut dissipation = 0.0;
    for (q, w) in basis.quad_weights.iter().enumerate() {
        let wp = w * mesh.elem_volume;
        let phi = &basis.phi[q];
        let grad = &basis.grad[q];
        let mut u = 0.0;
        let mut udot = 0.0;
        let mut gu = [0.0, 0.0];
        for j in 0..n_local {
            u += coeffs[j] * phi[j];
            udot += udot_low[j] * phi[j];
            gu[0] += coeffs[j] * grad[j][0] * scale[0];
            gu[1] += coeffs[j] * grad[j][1] * scale[1];
        }
        let x = [
            origin[0] + basis.quad_points[q][0] * mesh.hx,
            origin[1] + basis.quad_points[q][1] * mesh.hy,
        ];
        let fp = preset.scalar_flux_derivative(x, u);
        // div q(u_h) = u f'(u) . grad u (the velocity fields in scope are
        // divergence-free, so no explicit x-divergence term remains)
        let divq = u * (fp[0] * gu[0] + fp[1] * gu[1]);
        production += wp * (u * udot + divq);
        dissipation += nu_lo * wp * (gu[0] * gu[0] + gu[1] * gu[1]);
    }
    1.0 - (production.max(0.0) / (dissipation + 1e-14)).min(1.0)
}
