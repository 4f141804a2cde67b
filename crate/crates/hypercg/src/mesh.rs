//! Uniform interval and structured quadrilateral meshes with the
//! connectivity and geometric vectors consumed by the scheme.
//!
//! Boundary facets carry unique pseudo-indices beyond the element range,
//! assigned in element-scan order. 1D facets are points with measure 1 and
//! normal +-1, so the macrocell CFL bound reduces to the classical 1D one.

use crate::basis::BasisTable;
use crate::error::{Result, SolverError};

/// What lies on the other side of a facet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    /// Interior facet shared with this element.
    Interior(usize),
    /// Boundary facet `k`; its global pseudo-index is `n_elems + k`.
    Boundary(usize),
}

#[derive(Clone, Debug)]
pub struct Facet {
    pub left: usize,
    pub left_local: usize,
    pub right: Neighbor,
    /// Local facet index on the right element (interior facets only).
    pub right_local: usize,
    /// Unit normal pointing out of the left element.
    pub normal: [f64; 2],
    pub measure: f64,
    /// Physical corner point(s): one point in 1D, two edge endpoints in 2D.
    pub corners: Vec<[f64; 2]>,
}

/// A facet seen from one of its elements.
#[derive(Clone, Copy)]
pub struct FacetView<'a> {
    pub facet: &'a Facet,
    pub id: usize,
    /// +1 when the viewing element is the facet's left element.
    pub sign: f64,
    pub outward: [f64; 2],
    pub other: Neighbor,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub dim: usize,
    pub degree: usize,
    pub periodic: bool,
    pub n_elems: usize,
    pub n_nodes: usize,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
    /// Flat element-to-node map, `n_local` entries per element.
    pub elem_nodes: Vec<usize>,
    pub node_coords: Vec<[f64; 2]>,
    /// E_i: elements containing each node.
    pub node_elems: Vec<Vec<usize>>,
    pub facets: Vec<Facet>,
    /// Flat element-to-facet map, `n_facets_per_elem` entries per element.
    pub elem_facets: Vec<usize>,
    pub n_boundary_facets: usize,
    pub elem_volume: f64,
    /// Local mesh size: |K_e|^(1/d).
    pub h_e: f64,
    pub domain_measure: f64,
    pub basis: BasisTable,
    /// c_{i,e} per local node (uniform mesh: identical for every element),
    /// computed by volume quadrature of the basis gradients.
    pub c_node: Vec<[f64; 2]>,
}

impl Mesh {
    /// Uniform interval mesh with Bernstein nodes at j/p inside each cell.
    pub fn interval(
        x_lo: f64,
        x_hi: f64,
        n_cells: usize,
        degree: usize,
        periodic: bool,
    ) -> Result<Mesh> {
        if x_lo >= x_hi {
            return Err(SolverError::InvalidArgument(format!(
                "empty interval [{x_lo}, {x_hi}]"
            )));
        }
        if n_cells < 2 {
            return Err(SolverError::InvalidArgument(format!(
                "need at least 2 cells, got {n_cells}"
            )));
        }
        if degree < 1 {
            return Err(SolverError::InvalidArgument("degree must be >= 1".into()));
        }
        let basis = BasisTable::interval(degree);
        let n_local = basis.n_local;
        let h = (x_hi - x_lo) / n_cells as f64;
        let n_nodes = if periodic {
            n_cells * degree
        } else {
            n_cells * degree + 1
        };
        let node_coords: Vec<[f64; 2]> = (0..n_nodes)
            .map(|g| [x_lo + g as f64 * h / degree as f64, 0.0])
            .collect();
        let mut elem_nodes = Vec::with_capacity(n_cells * n_local);
        for e in 0..n_cells {
            for j in 0..n_local {
                let g = e * degree + j;
                elem_nodes.push(if periodic { g % n_nodes } else { g });
            }
        }
        let mut mesh = Mesh {
            dim: 1,
            degree,
            periodic,
            n_elems: n_cells,
            n_nodes,
            nx: n_cells,
            ny: 1,
            hx: h,
            hy: 1.0,
            x0: x_lo,
            y0: 0.0,
            elem_nodes,
            node_coords,
            node_elems: vec![],
            facets: vec![],
            elem_facets: vec![],
            n_boundary_facets: 0,
            elem_volume: h,
            h_e: h,
            domain_measure: x_hi - x_lo,
            basis,
            c_node: vec![],
        };
        mesh.build_facets_1d();
        mesh.finish();
        Ok(mesh)
    }

    /// Structured quadrilateral mesh; only Q1 is in scope in 2D.
    #[allow(clippy::too_many_arguments)]
    pub fn quad(
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
        degree: usize,
        periodic: bool,
    ) -> Result<Mesh> {
        if degree != 1 {
            return Err(SolverError::UnsupportedDegree { degree, dim: 2 });
        }
        if nx < 2 || ny < 2 {
            return Err(SolverError::InvalidArgument(format!(
                "need at least 2x2 cells, got {nx}x{ny}"
            )));
        }
        if x0 >= x1 || y0 >= y1 {
            return Err(SolverError::InvalidArgument("empty rectangle".into()));
        }
        let basis = BasisTable::quad_q1();
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let n_elems = nx * ny;
        let (n_nodes, node_index): (usize, Box<dyn Fn(usize, usize) -> usize>) = if periodic {
            (nx * ny, Box::new(move |ix, iy| (iy % ny) * nx + (ix % nx)))
        } else {
            (
                (nx + 1) * (ny + 1),
                Box::new(move |ix, iy| iy * (nx + 1) + ix),
            )
        };
        let mut node_coords = vec![[0.0, 0.0]; n_nodes];
        let (mx, my) = if periodic { (nx, ny) } else { (nx + 1, ny + 1) };
        for iy in 0..my {
            for ix in 0..mx {
                node_coords[node_index(ix, iy)] =
                    [x0 + ix as f64 * hx, y0 + iy as f64 * hy];
            }
        }
        let mut elem_nodes = Vec::with_capacity(n_elems * 4);
        for j in 0..ny {
            for i in 0..nx {
                elem_nodes.push(node_index(i, j));
                elem_nodes.push(node_index(i + 1, j));
                elem_nodes.push(node_index(i, j + 1));
                elem_nodes.push(node_index(i + 1, j + 1));
            }
        }
        let mut mesh = Mesh {
            dim: 2,
            degree,
            periodic,
            n_elems,
            n_nodes,
            nx,
            ny,
            hx,
            hy,
            x0,
            y0,
            elem_nodes,
            node_coords,
            node_elems: vec![],
            facets: vec![],
            elem_facets: vec![],
            n_boundary_facets: 0,
            elem_volume: hx * hy,
            h_e: (hx * hy).sqrt(),
            domain_measure: (x1 - x0) * (y1 - y0),
            basis,
            c_node: vec![],
        };
        mesh.build_facets_2d();
        mesh.finish();
        Ok(mesh)
    }

    fn build_facets_1d(&mut self) {
        let n = self.n_elems;
        self.elem_facets = vec![usize::MAX; n * 2];
        let mut boundary = 0usize;
        for e in 0..n {
            for lf in 0..2usize {
                if self.elem_facets[e * 2 + lf] != usize::MAX {
                    continue;
                }
                let x = self.x0 + (e + lf) as f64 * self.hx;
                let neighbor: Option<(usize, usize)> = match (lf, e) {
                    (0, 0) if !self.periodic => None,
                    (0, _) => Some(((e + n - 1) % n, 1)),
                    (1, last) if last == n - 1 && !self.periodic => None,
                    (1, _) => Some(((e + 1) % n, 0)),
                    _ => unreachable!(),
                };
                let normal = self.basis.facets[lf].normal;
                let id = self.facets.len();
                match neighbor {
                    Some((ne, nlf)) => {
                        self.facets.push(Facet {
                            left: e,
                            left_local: lf,
                            right: Neighbor::Interior(ne),
                            right_local: nlf,
                            normal,
                            measure: 1.0,
                            corners: vec![[x, 0.0]],
                        });
                        self.elem_facets[e * 2 + lf] = id;
                        self.elem_facets[ne * 2 + nlf] = id;
                    }
                    None => {
                        self.facets.push(Facet {
                            left: e,
                            left_local: lf,
                            right: Neighbor::Boundary(boundary),
                            right_local: usize::MAX,
                            normal,
                            measure: 1.0,
                            corners: vec![[x, 0.0]],
                        });
                        self.elem_facets[e * 2 + lf] = id;
                        boundary += 1;
                    }
                }
            }
        }
        self.n_boundary_facets = boundary;
    }

    fn build_facets_2d(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        let n = self.n_elems;
        self.elem_facets = vec![usize::MAX; n * 4];
        let mut boundary = 0usize;
        // local facets: 0=bottom, 1=right, 2=top, 3=left; opposite locals.
        let opposite = [2usize, 3, 0, 1];
        for e in 0..n {
            let (i, j) = (e % nx, e / nx);
            for lf in 0..4usize {
                if self.elem_facets[e * 4 + lf] != usize::MAX {
                    continue;
                }
                let (di, dj): (isize, isize) = match lf {
                    0 => (0, -1),
                    1 => (1, 0),
                    2 => (0, 1),
                    _ => (-1, 0),
                };
                let (ni, nj) = (i as isize + di, j as isize + dj);
                let inside =
                    ni >= 0 && ni < nx as isize && nj >= 0 && nj < ny as isize;
                let neighbor = if inside {
                    Some((nj as usize * nx + ni as usize, opposite[lf]))
                } else if self.periodic {
                    let wi = ((ni % nx as isize) + nx as isize) as usize % nx;
                    let wj = ((nj % ny as isize) + ny as isize) as usize % ny;
                    Some((wj * nx + wi, opposite[lf]))
                } else {
                    None
                };
                let ex = self.x0 + i as f64 * self.hx;
                let ey = self.y0 + j as f64 * self.hy;
                let table = &self.basis.facets[lf];
                let corners: Vec<[f64; 2]> = table
                    .corners
                    .iter()
                    .map(|c| [ex + c[0] * self.hx, ey + c[1] * self.hy])
                    .collect();
                let measure = if lf % 2 == 0 { self.hx } else { self.hy };
                let id = self.facets.len();
                match neighbor {
                    Some((ne, nlf)) => {
                        self.facets.push(Facet {
                            left: e,
                            left_local: lf,
                            right: Neighbor::Interior(ne),
                            right_local: nlf,
                            normal: table.normal,
                            measure,
                            corners,
                        });
                        self.elem_facets[e * 4 + lf] = id;
                        self.elem_facets[ne * 4 + nlf] = id;
                    }
                    None => {
                        self.facets.push(Facet {
                            left: e,
                            left_local: lf,
                            right: Neighbor::Boundary(boundary),
                            right_local: usize::MAX,
                            normal: table.normal,
                            measure,
                            corners,
                        });
                        self.elem_facets[e * 4 + lf] = id;
                        boundary += 1;
                    }
                }
            }
        }
        self.n_boundary_facets = boundary;
    }

    fn finish(&mut self) {
        let n_local = self.basis.n_local;
        let mut node_elems = vec![Vec::new(); self.n_nodes];
        for e in 0..self.n_elems {
            for &g in self.nodes_of(e) {
                if !node_elems[g].contains(&e) {
                    node_elems[g].push(e);
                }
            }
        }
        self.node_elems = node_elems;
        // c_{i,e} = integral of grad(phi_i) over K_e (divergence theorem route).
        let mut c_node = vec![[0.0, 0.0]; n_local];
        let scale = [1.0 / self.hx, 1.0 / self.hy];
        for (q, w) in self.basis.quad_weights.iter().enumerate() {
            let wp = w * self.elem_volume;
            for i in 0..n_local {
                let g = self.basis.grad[q][i];
                c_node[i][0] += wp * g[0] * scale[0];
                c_node[i][1] += wp * g[1] * scale[1];
            }
        }
        self.c_node = c_node;
    }

    #[inline]
    pub fn n_local(&self) -> usize {
        self.basis.n_local
    }

    #[inline]
    pub fn n_facets_per_elem(&self) -> usize {
        if self.dim == 1 {
            2
        } else {
            4
        }
    }

    #[inline]
    pub fn nodes_of(&self, e: usize) -> &[usize] {
        let n = self.basis.n_local;
        &self.elem_nodes[e * n..(e + 1) * n]
    }

    #[inline]
    pub fn facet_ids_of(&self, e: usize) -> &[usize] {
        let n = self.n_facets_per_elem();
        &self.elem_facets[e * n..(e + 1) * n]
    }

    /// View the facet at local index `lf` from element `e`.
    pub fn facet_view(&self, e: usize, lf: usize) -> FacetView<'_> {
        let id = self.facet_ids_of(e)[lf];
        let facet = &self.facets[id];
        let sign = if facet.left == e && facet.left_local == lf {
            1.0
        } else {
            -1.0
        };
        let outward = [sign * facet.normal[0], sign * facet.normal[1]];
        let other = if sign > 0.0 {
            facet.right
        } else {
            Neighbor::Interior(facet.left)
        };
        FacetView {
            facet,
            id,
            sign,
            outward,
            other,
        }
    }

    /// Physical facet measure of local facet `lf`.
    #[inline]
    pub fn facet_measure(&self, lf: usize) -> f64 {
        if self.dim == 1 {
            1.0
        } else if lf % 2 == 0 {
            self.hx
        } else {
            self.hy
        }
    }

    /// sigma_{i,ee'}: trace mass of local node `i` on local facet `lf`.
    #[inline]
    pub fn sigma(&self, lf: usize, i: usize) -> f64 {
        self.basis.facets[lf].sigma[i] * self.facet_measure(lf)
    }

    /// c_{i,ee'} = sigma_{i,ee'} * n (flat facets, constant normal).
    pub fn c_facet(&self, lf: usize, i: usize) -> [f64; 2] {
        let s = self.sigma(lf, i);
        let n = self.basis.facets[lf].normal;
        [s * n[0], s * n[1]]
    }

    /// Lower-left physical corner of element `e`.
    pub fn elem_origin(&self, e: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.x0 + (e as f64) * self.hx, 0.0]
        } else {
            let (i, j) = (e % self.nx, e / self.nx);
            [self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy]
        }
    }

    /// Map a reference point of element `e` to physical coordinates.
    pub fn to_physical(&self, e: usize, r: [f64; 2]) -> [f64; 2] {
        let o = self.elem_origin(e);
        [o[0] + r[0] * self.hx, o[1] + r[1] * self.hy]
    }

    /// Physical gradient scaling per direction (affine elements).
    #[inline]
    pub fn grad_scale(&self) -> [f64; 2] {
        [
            1.0 / self.hx,
            if self.dim == 1 { 0.0 } else { 1.0 / self.hy },
        ]
    }

    /// Lumped element mass m_i^e (equal for all Bernstein nodes).
    #[inline]
    pub fn lumped_mass(&self) -> f64 {
        self.basis.lumped_mass(self.elem_volume)
    }

    /// Global lumped masses m_i = sum over elements containing i.
    pub fn global_lumped_masses(&self) -> Vec<f64> {
        let me = self.lumped_mass();
        let mut m = vec![0.0; self.n_nodes];
        for e in 0..self.n_elems {
            for &g in self.nodes_of(e) {
                m[g] += me;
            }
        }
        m
    }

    /// Interior facet partners of element `e` (B_e without boundary facets).
    pub fn interior_neighbors(&self, e: usize) -> Vec<(usize, usize)> {
        (0..self.n_facets_per_elem())
            .filter_map(|lf| match self.facet_view(e, lf).other {
                Neighbor::Interior(ne) => Some((lf, ne)),
                Neighbor::Boundary(_) => None,
            })
            .collect()
    }

    /// True if the element touches a physical boundary facet.
    pub fn has_boundary_facet(&self, e: usize) -> bool {
        (0..self.n_facets_per_elem())
            .any(|lf| matches!(self.facet_view(e, lf).other, Neighbor::Boundary(_)))
    }

    /// True if any node of the element lies on the physical boundary
    /// (stronger than `has_boundary_facet` in 2D corners).
    pub fn has_boundary_node(&self, e: usize) -> bool {
        if self.periodic {
            return false;
        }
        self.nodes_of(e).iter().any(|&g| self.is_boundary_node(g))
    }

    pub fn is_boundary_node(&self, g: usize) -> bool {
        if self.periodic {
            return false;
        }
        let c = self.node_coords[g];
        let eps = 1e-12 * (self.hx + self.hy);
        let x1 = self.x0 + self.nx as f64 * self.hx;
        if (c[0] - self.x0).abs() < eps || (c[0] - x1).abs() < eps {
            return true;
        }
        if self.dim == 2 {
            let y1 = self.y0 + self.ny as f64 * self.hy;
            if (c[1] - self.y0).abs() < eps || (c[1] - y1).abs() < eps {
                return true;
            }
        }
        false
    }
}
