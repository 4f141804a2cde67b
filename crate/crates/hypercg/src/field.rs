//! Nodal solution storage: one flat block of Bernstein coefficients per
//! conserved variable.

/// Maximum number of conserved variables (Euler in 1D: rho, rho*v, rho*E).
pub const MAX_VARS: usize = 3;

/// Pointwise state vector; only the first `m` entries are meaningful.
pub type State = [f64; MAX_VARS];

/// Directional flux values, one spatial component per row.
pub type FluxVal = [[f64; MAX_VARS]; 2];

pub fn state_axpy(a: f64, x: &State, y: &State) -> State {
    let mut out = [0.0; MAX_VARS];
    for k in 0..MAX_VARS {
        out[k] = a * x[k] + y[k];
    }
    out
}

pub fn state_scale(a: f64, x: &State) -> State {
    let mut out = [0.0; MAX_VARS];
    for k in 0..MAX_VARS {
        out[k] = a * x[k];
    }
    out
}

/// Flattened coefficient array, variable-major: `data[v * n_nodes + j]`.
#[derive(Clone, Debug)]
pub struct NodalField {
    pub n_vars: usize,
    pub n_nodes: usize,
    pub data: Vec<f64>,
}

impl NodalField {
    pub fn zeros(n_vars: usize, n_nodes: usize) -> Self {
        NodalField {
            n_vars,
            n_nodes,
            data: vec![0.0; n_vars * n_nodes],
        }
    }

    #[inline]
    pub fn get(&self, var: usize, node: usize) -> f64 {
        self.data[var * self.n_nodes + node]
    }

    #[inline]
    pub fn set(&mut self, var: usize, node: usize, value: f64) {
        self.data[var * self.n_nodes + node] = value;
    }

    #[inline]
    pub fn var(&self, var: usize) -> &[f64] {
        &self.data[var * self.n_nodes..(var + 1) * self.n_nodes]
    }

    #[inline]
    pub fn var_mut(&mut self, var: usize) -> &mut [f64] {
        &mut self.data[var * self.n_nodes..(var + 1) * self.n_nodes]
    }

    #[inline]
    pub fn state_at(&self, node: usize) -> State {
        let mut s = [0.0; MAX_VARS];
        for k in 0..self.n_vars {
            s[k] = self.get(k, node);
        }
        s
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &NodalField) {
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in self.data.iter_mut() {
            *x *= a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Per-variable (min, max) over all coefficients.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        (0..self.n_vars)
            .map(|k| {
                let v = self.var(k);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &x in v {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                (lo, hi)
            })
            .collect()
    }
}
