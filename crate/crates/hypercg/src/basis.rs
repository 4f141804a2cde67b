//! Bernstein polynomial basis on the unit interval and unit square,
//! quadrature tables, element masses and cell averaging.
//!
//! Bernstein basis functions are nonnegative and form a partition of unity,
//! which the whole limiting machinery relies on. All evaluations use the
//! de Casteljau-type recurrence rather than explicit binomials so that high
//! degrees stay well conditioned.

use crate::quadrature::gauss_legendre;

/// Upper bound on local nodes per element (1D degree <= 32, Q1 has 4).
pub const MAX_LOCAL: usize = 33;

/// All Bernstein values B_0^p(t) .. B_p^p(t) by the stable recurrence.
pub fn bernstein_values(p: usize, t: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..=p {
        out[k] = t * out[k - 1];
        for j in (1..k).rev() {
            out[j] = (1.0 - t) * out[j] + t * out[j - 1];
        }
        out[0] *= 1.0 - t;
    }
}

/// First derivatives dB_j^p/dt via B_j^{p-1} differences.
pub fn bernstein_derivatives(p: usize, t: f64, out: &mut [f64]) {
    if p == 0 {
        out[0] = 0.0;
        return;
    }
    let mut lower = [0.0; MAX_LOCAL];
    bernstein_values(p - 1, t, &mut lower);
    let pf = p as f64;
    out[0] = -pf * lower[0];
    for j in 1..p {
        out[j] = pf * (lower[j - 1] - lower[j]);
    }
    out[p] = pf * lower[p - 1];
}

/// Control points of the derivative polynomial: degree p -> p-1.
pub fn derivative_ctrl(p: usize, coeffs: &[f64], out: &mut [f64]) {
    let pf = p as f64;
    for j in 0..p {
        out[j] = pf * (coeffs[j + 1] - coeffs[j]);
    }
}

/// Evaluate the polynomial with the given control points at parameter t
/// (valid outside [0, 1] as well).
pub fn de_casteljau(p: usize, coeffs: &[f64], t: f64) -> f64 {
    let mut c = [0.0; MAX_LOCAL];
    c[..=p].copy_from_slice(&coeffs[..=p]);
    for level in (1..=p).rev() {
        for j in 0..level {
            c[j] = (1.0 - t) * c[j] + t * c[j + 1];
        }
    }
    c[0]
}

/// Blossom value of the degree-p polynomial at parameters `ts` (len p).
fn blossom(p: usize, coeffs: &[f64], ts: &[f64]) -> f64 {
    let mut c = [0.0; MAX_LOCAL];
    c[..=p].copy_from_slice(&coeffs[..=p]);
    for (level, &t) in (1..=p).rev().zip(ts.iter()) {
        for j in 0..level {
            c[j] = (1.0 - t) * c[j] + t * c[j + 1];
        }
    }
    c[0]
}

/// Bernstein control points of the same polynomial reparametrized to the
/// interval [a, b] of the source parameter. Exact for any a < b or a > b;
/// used to extrapolate a neighbor polynomial onto an adjacent cell.
pub fn reparametrize(p: usize, coeffs: &[f64], a: f64, b: f64, out: &mut [f64]) {
    let mut ts = [0.0; MAX_LOCAL];
    for j in 0..=p {
        for (k, t) in ts[..p].iter_mut().enumerate() {
            *t = if k < p - j { a } else { b };
        }
        out[j] = blossom(p, coeffs, &ts[..p]);
    }
}

/// Per-facet reference data: traces of the basis and lumped trace masses.
#[derive(Clone, Debug)]
pub struct FacetTable {
    /// Outward unit normal in reference coordinates.
    pub normal: [f64; 2],
    /// Facet corner(s) in element reference coordinates (1 point in 1D).
    pub corners: Vec<[f64; 2]>,
    /// Quadrature points in element reference coordinates.
    pub quad_points: Vec<[f64; 2]>,
    /// Reference weights; sum to the reference facet measure (1).
    pub quad_weights: Vec<f64>,
    /// phi[q][i]: basis traces at the quadrature points.
    pub phi: Vec<Vec<f64>>,
    /// sigma[i] = integral of phi_i over the reference facet.
    pub sigma: Vec<f64>,
}

/// Precomputed basis data on the reference element.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub dim: usize,
    pub degree: usize,
    pub n_local: usize,
    /// Local node positions in reference coordinates.
    pub node_ref: Vec<[f64; 2]>,
    pub quad_points: Vec<[f64; 2]>,
    /// Reference weights, sum 1.
    pub quad_weights: Vec<f64>,
    /// phi[q][i]
    pub phi: Vec<Vec<f64>>,
    /// grad[q][i]: reference gradients.
    pub grad: Vec<Vec<[f64; 2]>>,
    pub facets: Vec<FacetTable>,
    /// Local indices of nodes on the element boundary (N_e^boundary).
    pub boundary_local: Vec<usize>,
    /// Local indices of internal nodes (N_e^0).
    pub interior_local: Vec<usize>,
    /// 1D rule reused for line integrals and seminorms.
    pub line_points: Vec<f64>,
    pub line_weights: Vec<f64>,
}

impl BasisTable {
    /// Interval element of degree p with the (p+1)-point Gauss rule,
    /// exact for all degree-2p integrands of the scheme.
    pub fn interval(p: usize) -> Self {
        assert!(p >= 1 && p + 1 <= MAX_LOCAL);
        let n_local = p + 1;
        let (gx, gw) = gauss_legendre(p + 1);
        let mut phi = Vec::with_capacity(gx.len());
        let mut grad = Vec::with_capacity(gx.len());
        let mut buf = [0.0; MAX_LOCAL];
        for &x in &gx {
            bernstein_values(p, x, &mut buf);
            phi.push(buf[..n_local].to_vec());
            bernstein_derivatives(p, x, &mut buf);
            grad.push(buf[..n_local].iter().map(|&d| [d, 0.0]).collect());
        }
        let node_ref: Vec<[f64; 2]> = (0..=p).map(|j| [j as f64 / p as f64, 0.0]).collect();
        let mut facets = Vec::new();
        for (corner, normal) in [(0.0, [-1.0, 0.0]), (1.0, [1.0, 0.0])] {
            bernstein_values(p, corner, &mut buf);
            let trace = buf[..n_local].to_vec();
            facets.push(FacetTable {
                normal,
                corners: vec![[corner, 0.0]],
                quad_points: vec![[corner, 0.0]],
                quad_weights: vec![1.0],
                phi: vec![trace.clone()],
                sigma: trace,
            });
        }
        let boundary_local = vec![0, p];
        let interior_local = (1..p).collect();
        BasisTable {
            dim: 1,
            degree: p,
            n_local,
            node_ref,
            quad_points: gx.iter().map(|&x| [x, 0.0]).collect(),
            quad_weights: gw.clone(),
            phi,
            grad,
            facets,
            boundary_local,
            interior_local,
            line_points: gx,
            line_weights: gw,
        }
    }

    /// Bilinear quadrilateral (Q1): the only 2D element in scope.
    /// Local ordering: 0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1).
    pub fn quad_q1() -> Self {
        let p = 1;
        let n_local = 4;
        let (gx, gw) = gauss_legendre(p + 1);
        let b = |j: usize, t: f64| if j == 0 { 1.0 - t } else { t };
        let db = |j: usize| if j == 0 { -1.0 } else { 1.0 };
        let mut quad_points = Vec::new();
        let mut quad_weights = Vec::new();
        let mut phi = Vec::new();
        let mut grad = Vec::new();
        for (iy, &y) in gx.iter().enumerate() {
            for (ix, &x) in gx.iter().enumerate() {
                quad_points.push([x, y]);
                quad_weights.push(gw[ix] * gw[iy]);
                let mut row = Vec::with_capacity(n_local);
                let mut grow = Vec::with_capacity(n_local);
                for jy in 0..2 {
                    for jx in 0..2 {
                        row.push(b(jx, x) * b(jy, y));
                        grow.push([db(jx) * b(jy, y), b(jx, x) * db(jy)]);
                    }
                }
                phi.push(row);
                grad.push(grow);
            }
        }
        let node_ref = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        // Facet order: 0=bottom, 1=right, 2=top, 3=left.
        let facet_defs: [([f64; 2], [[f64; 2]; 2]); 4] = [
            ([0.0, -1.0], [[0.0, 0.0], [1.0, 0.0]]),
            ([1.0, 0.0], [[1.0, 0.0], [1.0, 1.0]]),
            ([0.0, 1.0], [[0.0, 1.0], [1.0, 1.0]]),
            ([-1.0, 0.0], [[0.0, 0.0], [0.0, 1.0]]),
        ];
        let mut facets = Vec::new();
        for (normal, corners) in facet_defs {
            let mut f_points = Vec::new();
            let mut f_phi = Vec::new();
            let mut sigma = vec![0.0; n_local];
            for (k, &s) in gx.iter().enumerate() {
                let pt = [
                    corners[0][0] + s * (corners[1][0] - corners[0][0]),
                    corners[0][1] + s * (corners[1][1] - corners[0][1]),
                ];
                f_points.push(pt);
                let mut row = Vec::with_capacity(n_local);
                for jy in 0..2 {
                    for jx in 0..2 {
                        row.push(b(jx, pt[0]) * b(jy, pt[1]));
                    }
                }
                for (i, &v) in row.iter().enumerate() {
                    sigma[i] += gw[k] * v;
                }
                f_phi.push(row);
            }
            facets.push(FacetTable {
                normal,
                corners: corners.to_vec(),
                quad_points: f_points,
                quad_weights: gw.clone(),
                phi: f_phi,
                sigma,
            });
        }
        BasisTable {
            dim: 2,
            degree: p,
            n_local,
            node_ref,
            quad_points,
            quad_weights,
            phi,
            grad,
            facets,
            boundary_local: vec![0, 1, 2, 3],
            interior_local: vec![],
            line_points: gx,
            line_weights: gw,
        }
    }

    /// Lumped element mass per node: |K_e| / |N_e| for Bernstein elements.
    pub fn lumped_mass(&self, elem_volume: f64) -> f64 {
        elem_volume / self.n_local as f64
    }

    /// Cell average of a coefficient vector; exact because lumped masses are
    /// equal and integrate the Bernstein partition of unity exactly.
    pub fn cell_average(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().sum::<f64>() / self.n_local as f64
    }

    /// Value of the local polynomial at a reference point.
    pub fn eval(&self, coeffs: &[f64], ref_pt: [f64; 2]) -> f64 {
        match self.dim {
            1 => de_casteljau(self.degree, coeffs, ref_pt[0]),
            _ => {
                let b = |j: usize, t: f64| if j == 0 { 1.0 - t } else { t };
                let mut v = 0.0;
                for jy in 0..2 {
                    for jx in 0..2 {
                        v += coeffs[jy * 2 + jx] * b(jx, ref_pt[0]) * b(jy, ref_pt[1]);
                    }
                }
                v
            }
        }
    }

    /// Reference gradient of the local polynomial at a reference point.
    pub fn eval_grad(&self, coeffs: &[f64], ref_pt: [f64; 2]) -> [f64; 2] {
        match self.dim {
            1 => {
                if self.degree == 0 {
                    return [0.0, 0.0];
                }
                let mut d = [0.0; MAX_LOCAL];
                derivative_ctrl(self.degree, coeffs, &mut d);
                [de_casteljau(self.degree - 1, &d, ref_pt[0]), 0.0]
            }
            _ => {
                let b = |j: usize, t: f64| if j == 0 { 1.0 - t } else { t };
                let db = |j: usize| if j == 0 { -1.0 } else { 1.0 };
                let mut g = [0.0, 0.0];
                for jy in 0..2 {
                    for jx in 0..2 {
                        let c = coeffs[jy * 2 + jx];
                        g[0] += c * db(jx) * b(jy, ref_pt[1]);
                        g[1] += c * b(jx, ref_pt[0]) * db(jy);
                    }
                }
                g
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        for p in [1usize, 2, 3, 5, 8, 16] {
            let table = BasisTable::interval(p);
            for row in &table.phi {
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() < 1e-14, "p={p}");
                assert!(row.iter().all(|&v| v >= -1e-15));
            }
            for grow in &table.grad {
                let s: f64 = grow.iter().map(|g| g[0]).sum();
                assert!(s.abs() < 1e-12, "p={p} gradient sum {s}");
            }
        }
        let q1 = BasisTable::quad_q1();
        for row in &q1.phi {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn basis_integrals_match_lumped_masses() {
        // integral of phi_i over the reference element equals 1/n_local.
        for p in [1usize, 2, 4, 7] {
            let t = BasisTable::interval(p);
            for i in 0..t.n_local {
                let integral: f64 = t
                    .quad_weights
                    .iter()
                    .zip(&t.phi)
                    .map(|(&w, row)| w * row[i])
                    .sum();
                assert!(
                    (integral - 1.0 / t.n_local as f64).abs() < 1e-13,
                    "p={p} i={i}: {integral}"
                );
            }
        }
        let q1 = BasisTable::quad_q1();
        for i in 0..4 {
            let integral: f64 = q1
                .quad_weights
                .iter()
                .zip(&q1.phi)
                .map(|(&w, row)| w * row[i])
                .sum();
            assert!((integral - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn lumped_mass_examples() {
        // h = 0.25, P1: both nodes get 0.125; h = 0.3, P2: all three get 0.1;
        // Q1 with |K| = h^2: h^2/4.
        assert!((BasisTable::interval(1).lumped_mass(0.25) - 0.125).abs() < 1e-15);
        assert!((BasisTable::interval(2).lumped_mass(0.3) - 0.1).abs() < 1e-15);
        let h = 0.7;
        assert!((BasisTable::quad_q1().lumped_mass(h * h) - h * h / 4.0).abs() < 1e-15);
    }

    #[test]
    fn cell_average_examples() {
        let p1 = BasisTable::interval(1);
        assert!((p1.cell_average(&[0.0, 2.0]) - 1.0).abs() < 1e-15);
        let p2 = BasisTable::interval(2);
        assert!((p2.cell_average(&[0.0, 1.0, 0.0]) - 1.0 / 3.0).abs() < 1e-15);
        // constant field
        assert!((p2.cell_average(&[3.5, 3.5, 3.5]) - 3.5).abs() < 1e-15);
        // agreement with quadrature of u_h
        let coeffs = [0.3, -1.2, 2.7];
        let quad_avg: f64 = p2
            .quad_weights
            .iter()
            .zip(&p2.phi)
            .map(|(&w, row)| w * row.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        assert!((p2.cell_average(&coeffs) - quad_avg).abs() < 1e-13);
    }

    #[test]
    fn evaluation_examples() {
        let p1 = BasisTable::interval(1);
        // u = (0, 1) on [0, h]: midpoint value 0.5, reference gradient 1.
        assert!((p1.eval(&[0.0, 1.0], [0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!((p1.eval_grad(&[0.0, 1.0], [0.5, 0.0])[0] - 1.0).abs() < 1e-15);
        // P2 endpoint interpolation: u = (0,0,1) at t=1 gives 1.
        let p2 = BasisTable::interval(2);
        assert!((p2.eval(&[0.0, 0.0, 1.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
        // constant field: value c, gradient 0.
        assert!((p2.eval(&[2.0, 2.0, 2.0], [0.37, 0.0]) - 2.0).abs() < 1e-14);
        assert!(p2.eval_grad(&[2.0, 2.0, 2.0], [0.37, 0.0])[0].abs() < 1e-13);
    }

    #[test]
    fn convex_hull_property_by_sampling() {
        // Bernstein coefficients bound the polynomial on the element.
        let p = 4;
        let coeffs = [0.1, 0.9, -0.4, 0.55, 0.3];
        let lo = coeffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = coeffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let table = BasisTable::interval(p);
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let v = table.eval(&coeffs, [t, 0.0]);
            assert!(v >= lo - 1e-13 && v <= hi + 1e-13);
        }
    }

    #[test]
    fn reparametrization_is_exact_for_polynomials() {
        // Extrapolate x^3 - 2x + 1 (as degree-4) from [0,1] to [1,2] and [-1,0].
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let p = 4;
        let table = BasisTable::interval(p);
        // Build Bernstein coefficients by interpolation at the Bernstein nodes.
        let coeffs = interpolate_at_nodes(&table, f);
        for (a, b) in [(1.0, 2.0), (-1.0, 0.0), (0.25, 0.75)] {
            let mut out = [0.0; MAX_LOCAL];
            reparametrize(p, &coeffs, a, b, &mut out);
            for k in 0..=10 {
                let s = k as f64 / 10.0;
                let t = a + s * (b - a);
                let v = de_casteljau(p, &out, s);
                assert!(
                    (v - f(t)).abs() < 1e-12,
                    "a={a} b={b} t={t}: {v} vs {}",
                    f(t)
                );
            }
        }
    }

    fn interpolate_at_nodes(table: &BasisTable, f: impl Fn(f64) -> f64) -> Vec<f64> {
        // Solve the small Bernstein collocation system by Gaussian elimination.
        let n = table.n_local;
        let p = table.degree;
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        let mut buf = [0.0; MAX_LOCAL];
        for (k, node) in table.node_ref.iter().enumerate() {
            bernstein_values(p, node[0], &mut buf);
            a[k][..n].copy_from_slice(&buf[..n]);
            rhs[k] = f(node[0]);
        }
        solve_dense(&mut a, &mut rhs);
        rhs
    }

    fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let factor = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
        for col in (0..n).rev() {
            b[col] /= a[col][col];
            for row in 0..col {
                b[row] -= a[row][col] * b[col];
                a[row][col] = 0.0;
            }
        }
    }
}
