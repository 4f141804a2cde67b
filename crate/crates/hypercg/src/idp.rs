//! Invariant-domain-preserving core: LLF fluxes, fake time steps (subcell
//! and macrocell CFL bounds), bar-state decompositions, flux-limited
//! intermediate cell averages, antidiffusive element contributions and the
//! matrix-free assembly of the semi-discrete right-hand side.
//!
//! Assembly is two-phase: an element/facet phase producing workspace values
//! from the immutable solution, then a deterministic sequential scatter.

use crate::basis::MAX_LOCAL;
use crate::error::{Result, SolverError};
use crate::field::{NodalField, State, MAX_VARS};
use crate::limiter::{
    compute_bounds, euler_positivity_factor, limited_antidiffusive_flux, slope_factor_scalar,
    BoundsMode, FluxWindowSide,
};
use crate::mesh::{Mesh, Neighbor};
use crate::problems::Preset;
use crate::weno::{
    element_coeffs, gradient_projection, smoothness_sensor, solve_consistent_mass,
    stabilization_rows, WenoConfig,
};

/// Scheme variants as labeled in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// gamma_e = beta_e = 0.
    LowOrder,
    /// gamma_e = beta_e = 1.
    HighOrder,
    /// gamma_e from the smoothness sensor, beta_e = 1.
    Weno,
    /// gamma_e from the sensor, beta_e from the slope limiter.
    WenoLimited,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Variant> {
        match s.to_ascii_uppercase().as_str() {
            "LO" => Ok(Variant::LowOrder),
            "HO" => Ok(Variant::HighOrder),
            "WENO" => Ok(Variant::Weno),
            "WENO-L" | "WENOL" => Ok(Variant::WenoLimited),
            _ => Err(SolverError::Config(format!(
                "unknown variant '{s}' (expected LO, HO, WENO or WENO-L)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Variant::LowOrder => "LO",
            Variant::HighOrder => "HO",
            Variant::Weno => "WENO",
            Variant::WenoLimited => "WENO-L",
        }
    }

    /// Does the variant add antidiffusive element contributions?
    pub fn uses_antidiffusion(&self) -> bool {
        !matches!(self, Variant::LowOrder)
    }

    /// Is the variant IDP by construction (hard admissibility checks apply)?
    pub fn is_idp(&self) -> bool {
        matches!(self, Variant::LowOrder | Variant::WenoLimited)
    }
}

/// Treatment of the facet fluxes in the intermediate cell average.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluxLimiterMode {
    /// alpha = 1: high-order group fluxes.
    Off,
    /// FCT limiter on the antidiffusive facet fluxes (scalar only).
    Fct,
    /// alpha = 0: low-order cell-average LLF fluxes.
    LowOrder,
}

/// Fake time step policy per element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtPolicy {
    /// Subcell bound (default in 1D; required without flux limiting).
    Subcell,
    /// Macrocell bound (valid with flux limiting or low-order fluxes).
    Macrocell,
    /// Macrocell bound with halving until the intermediate average is
    /// admissible, floored at the subcell bound (default in 2D).
    MacrocellShrink,
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub weno: WenoConfig,
    pub flux_limiter: FluxLimiterMode,
    pub dt_policy: DtPolicy,
    pub bounds_mode: BoundsMode,
    pub entropy_fix: bool,
    /// Solve the consistent mass system for the target time derivative
    /// instead of lumping it.
    pub consistent_mass_udot: bool,
    /// Upper cap on fake time steps when wave speeds vanish.
    pub dt_cap: f64,
    /// Euler positivity floors (absolute; configured from initial data).
    pub eps_rho: f64,
    pub eps_p: f64,
    /// Allowance for initial coefficients outside the invariant domain
    /// (nonzero only for projected initial data).
    pub bound_slack: f64,
}

impl SchemeConfig {
    pub fn new(preset: Preset, variant: Variant) -> SchemeConfig {
        let dt_policy = if preset.dim() == 1 {
            DtPolicy::Subcell
        } else {
            DtPolicy::MacrocellShrink
        };
        SchemeConfig {
            variant,
            weno: WenoConfig::default(),
            flux_limiter: FluxLimiterMode::Off,
            dt_policy,
            bounds_mode: BoundsMode::Global,
            entropy_fix: false,
            consistent_mass_udot: false,
            dt_cap: 1e3,
            eps_rho: 1e-10,
            eps_p: 1e-10,
            bound_slack: 0.0,
        }
    }

    pub fn validate(&self, preset: Preset) -> Result<()> {
        if self.flux_limiter == FluxLimiterMode::Fct {
            if preset.is_euler() {
                return Err(SolverError::Config(
                    "the FCT flux limiter is scalar-only".into(),
                ));
            }
            if self.dt_policy != DtPolicy::Macrocell {
                return Err(SolverError::Config(
                    "the FCT flux limiter requires the macrocell time-step policy".into(),
                ));
            }
        }
        if self.entropy_fix && (preset.is_euler() || preset.dim() != 2) {
            return Err(SolverError::Config(
                "the entropy fix applies to scalar 2D presets only".into(),
            ));
        }
        if self.weno.q < 1.0 || self.weno.r < 1 || self.weno.eps <= 0.0 {
            return Err(SolverError::Config("invalid WENO parameters".into()));
        }
        let max_candidates = if preset.dim() == 1 { 2.0 } else { 4.0 };
        if self.weno.linear_weight * max_candidates >= 1.0 || self.weno.linear_weight <= 0.0 {
            return Err(SolverError::Config(format!(
                "linear weight {} leaves no weight for the central candidate",
                self.weno.linear_weight
            )));
        }
        Ok(())
    }
}

/// Local Lax-Friedrichs flux in direction `n` with prescribed speed bound.
pub fn llf_flux(
    preset: Preset,
    x: [f64; 2],
    ul: &State,
    ur: &State,
    n: [f64; 2],
    lambda: f64,
    out: &mut State,
) {
    let fl = preset.flux(x, ul);
    let fr = preset.flux(x, ur);
    for k in 0..preset.n_vars() {
        let avg = 0.5 * ((fl[0][k] + fr[0][k]) * n[0] + (fl[1][k] + fr[1][k]) * n[1]);
        out[k] = avg - 0.5 * lambda * (ur[k] - ul[k]);
    }
}

/// Cell averages per element (exact for Bernstein coefficients).
pub fn cell_averages(mesh: &Mesh, u: &NodalField) -> Vec<State> {
    let n_local = mesh.n_local();
    let inv = 1.0 / n_local as f64;
    (0..mesh.n_elems)
        .map(|e| {
            let mut avg = [0.0; MAX_VARS];
            for &g in mesh.nodes_of(e) {
                for (k, slot) in avg.iter_mut().enumerate().take(u.n_vars) {
                    *slot += u.get(k, g);
                }
            }
            for slot in avg.iter_mut() {
                *slot *= inv;
            }
            avg
        })
        .collect()
}

/// Bar-state decomposition of the intermediate cell average (Lemma-1 data).
#[derive(Clone, Debug)]
pub struct BarStateSet {
    /// Split parameter: 1 with internal nodes, 2 without.
    pub split: f64,
    pub u_center: State,
    pub m_center: f64,
    /// (local node, bar state) for the boundary nodes of the element.
    pub bar_boundary: Vec<(usize, State)>,
    pub bar_center: State,
    /// Pairwise LLF bar states between the aggregated interior state and
    /// each boundary node.
    pub bar_pair: Vec<State>,
}

impl BarStateSet {
    /// Reassemble the convex decomposition into the cell average it encodes.
    pub fn reconstruct_average(&self, elem_volume: f64, n_vars: usize, me: f64) -> State {
        let mut out = [0.0; MAX_VARS];
        for k in 0..n_vars {
            let mut acc = self.m_center / elem_volume * self.bar_center[k];
            for (_, bar) in &self.bar_boundary {
                acc += me / elem_volume * bar[k];
            }
            out[k] = acc / self.split;
        }
        out
    }
}

/// Fluxes of one facet, oriented along the facet normal (out of `left`).
#[derive(Clone, Copy, Debug)]
pub struct FaceFluxes {
    pub high: State,
    pub low: State,
    pub lambda: f64,
}

pub struct Scheme<'a> {
    pub preset: Preset,
    pub mesh: &'a Mesh,
    pub cfg: SchemeConfig,
}

/// Assembly scratch storage, reused across stages and steps.
pub struct RhsWorkspace {
    pub avg: Vec<State>,
    pub dt_e: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub bar: Vec<State>,
    pub bar_low: Vec<State>,
    pub flux: Vec<FaceFluxes>,
    pub flux_eff: Vec<State>,
    pub alpha: Vec<f64>,
    pub f_node: Vec<f64>,
    pub udot_low: NodalField,
    pub udot: NodalField,
    pub g: Vec<Vec<[f64; 2]>>,
    pub masses: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new(mesh: &Mesh, n_vars: usize) -> Self {
        let ne = mesh.n_elems;
        let nf = mesh.facets.len();
        RhsWorkspace {
            avg: vec![[0.0; MAX_VARS]; ne],
            dt_e: vec![0.0; ne],
            gamma: vec![0.0; ne],
            beta: vec![0.0; ne],
            bar: vec![[0.0; MAX_VARS]; ne],
            bar_low: vec![[0.0; MAX_VARS]; ne],
            flux: vec![
                FaceFluxes {
                    high: [0.0; MAX_VARS],
                    low: [0.0; MAX_VARS],
                    lambda: 0.0,
                };
                nf
            ],
            flux_eff: vec![[0.0; MAX_VARS]; nf],
            alpha: vec![1.0; nf],
            f_node: vec![0.0; ne * mesh.n_local() * n_vars],
            udot_low: NodalField::zeros(n_vars, mesh.n_nodes),
            udot: NodalField::zeros(n_vars, mesh.n_nodes),
            g: vec![],
            masses: mesh.global_lumped_masses(),
        }
    }
}

/// Per-assembly diagnostics used by the run loop and the self tests.
#[derive(Clone, Copy, Debug)]
pub struct Diagnostics {
    pub min_dt_e: f64,
    pub min_beta: f64,
    pub n_alpha_limited: usize,
    /// max |sum_i f_i^e| / (sum_i |f_i^e| + floor) over interior elements.
    pub zero_sum_violation: f64,
    /// max error of the bar-state reconstruction identity on spot checks.
    pub bar_identity_error: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            min_dt_e: f64::INFINITY,
            min_beta: 1.0,
            n_alpha_limited: 0,
            zero_sum_violation: 0.0,
            bar_identity_error: 0.0,
        }
    }
}

impl<'a> Scheme<'a> {
    pub fn new(preset: Preset, mesh: &'a Mesh, cfg: SchemeConfig) -> Result<Scheme<'a>> {
        cfg.validate(preset)?;
        Ok(Scheme { preset, mesh, cfg })
    }

    /// Limited variants must never see inadmissible states; unlimited targets
    /// run with the guarded sound speed instead.
    fn strict_speeds(&self) -> bool {
        self.cfg.variant.is_idp()
    }

    fn n_vars(&self) -> usize {
        self.preset.n_vars()
    }

    /// Wave-speed floor used in bar-state divisions.
    fn lambda_floor(&self) -> f64 {
        1e-14
    }

    /// Scalar admissibility with the configured slack.
    fn in_domain(&self, u: &State) -> bool {
        let tol = match self.preset.scalar_range() {
            Some((lo, hi)) => self.cfg.bound_slack + 1e-12 * (hi - lo).max(1.0),
            None => 0.0,
        };
        self.preset.admissible(u, tol)
    }

    /// Aggregated interior state, its mass and the split parameter s of the
    /// convex decomposition.
    fn interior_aggregate(&self, u: &NodalField, e: usize, avg: &State) -> (f64, State, f64) {
        let basis = &self.mesh.basis;
        let me = self.mesh.lumped_mass();
        if basis.interior_local.is_empty() {
            (2.0, *avg, self.mesh.elem_volume)
        } else {
            let nodes = self.mesh.nodes_of(e);
            let mut u0 = [0.0; MAX_VARS];
            for &i in &basis.interior_local {
                for (k, slot) in u0.iter_mut().enumerate().take(self.n_vars()) {
                    *slot += u.get(k, nodes[i]);
                }
            }
            let count = basis.interior_local.len() as f64;
            for slot in u0.iter_mut() {
                *slot /= count;
            }
            (1.0, u0, me * count)
        }
    }

    /// Subcell fake-time-step bound of Lemma-1 type.
    pub fn fake_time_step_subcell(&self, u: &NodalField, e: usize) -> Result<f64> {
        let mesh = self.mesh;
        let me = mesh.lumped_mass();
        let nodes = mesh.nodes_of(e);
        let mut avg = [0.0; MAX_VARS];
        for &g in nodes {
            for (k, slot) in avg.iter_mut().enumerate().take(self.n_vars()) {
                *slot += u.get(k, g);
            }
        }
        for slot in avg.iter_mut() {
            *slot /= mesh.n_local() as f64;
        }
        if self.strict_speeds() {
            for &g in nodes {
                let s = u.state_at(g);
                if !self.preset.admissible(&s, self.scalar_tol()) {
                    return Err(SolverError::InadmissibleState {
                        context: format!("fake_time_step_subcell: node {g} of element {e}"),
                    });
                }
            }
        }
        let (split, u0, m0) = self.interior_aggregate(u, e, &avg);
        let node_coords: Vec<[f64; 2]> = nodes.iter().map(|&g| mesh.node_coords[g]).collect();
        let mut min_node = f64::INFINITY;
        let mut denom_center = 0.0;
        for &i in &mesh.basis.boundary_local {
            let c = mesh.c_node[i];
            let c_norm = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if c_norm < 1e-14 {
                continue;
            }
            let n = [c[0] / c_norm, c[1] / c_norm];
            let ui = u.state_at(nodes[i]);
            let lam = self
                .preset
                .wave_speed_bound(&node_coords, &u0, &ui, n, self.strict_speeds())?;
            let d = c_norm * lam;
            if d > 1e-300 {
                min_node = min_node.min(me / d);
            }
            denom_center += d;
        }
        let center = if denom_center > 1e-300 {
            m0 / denom_center
        } else {
            f64::INFINITY
        };
        Ok((min_node.min(center) / split).min(self.cfg.dt_cap))
    }

    fn scalar_tol(&self) -> f64 {
        match self.preset.scalar_range() {
            Some((lo, hi)) => self.cfg.bound_slack + 1e-12 * (hi - lo).max(1.0),
            None => 0.0,
        }
    }

    /// Trace of u_h at a facet quadrature point.
    fn trace_state(&self, u: &NodalField, e: usize, lf: usize, q: usize) -> State {
        let table = &self.mesh.basis.facets[lf];
        let nodes = self.mesh.nodes_of(e);
        let mut s = [0.0; MAX_VARS];
        for (j, &g) in nodes.iter().enumerate() {
            let phi = table.phi[q][j];
            if phi == 0.0 {
                continue;
            }
            for (k, slot) in s.iter_mut().enumerate().take(self.n_vars()) {
                *slot += phi * u.get(k, g);
            }
        }
        s
    }

    /// Facet average of the weakly imposed boundary data.
    fn boundary_avg_state(&self, u: &NodalField, e: usize, lf: usize, t: f64) -> State {
        let mesh = self.mesh;
        let table = &mesh.basis.facets[lf];
        let n = table.normal;
        let mut avg = [0.0; MAX_VARS];
        for (q, &w) in table.quad_weights.iter().enumerate() {
            let x = mesh.to_physical(e, table.quad_points[q]);
            let inner = self.trace_state(u, e, lf, q);
            let ghost = self.preset.boundary_state(x, t, &inner, n);
            for (k, slot) in avg.iter_mut().enumerate().take(self.n_vars()) {
                *slot += w * ghost[k];
            }
        }
        avg
    }

    /// Macrocell fake-time-step bound |K_e| / sum |S| lambda.
    pub fn fake_time_step_macrocell(
        &self,
        u: &NodalField,
        avg: &[State],
        e: usize,
        t: f64,
    ) -> Result<f64> {
        let mesh = self.mesh;
        let mut denom = 0.0;
        for lf in 0..mesh.n_facets_per_elem() {
            let view = mesh.facet_view(e, lf);
            let other_avg = match view.other {
                Neighbor::Interior(ne) => avg[ne],
                Neighbor::Boundary(_) => self.boundary_avg_state(u, e, lf, t),
            };
            let lam = self.preset.wave_speed_bound(
                &view.facet.corners,
                &avg[e],
                &other_avg,
                view.outward,
                self.strict_speeds(),
            )?;
            denom += view.facet.measure * lam;
        }
        if denom < 1e-300 {
            return Ok(self.cfg.dt_cap);
        }
        Ok((mesh.elem_volume / denom).min(self.cfg.dt_cap))
    }

    /// High/low facet flux pair of one (undirected) facet, oriented along
    /// the stored facet normal.
    pub fn face_fluxes(&self, u: &NodalField, avg: &[State], fid: usize, t: f64) -> Result<FaceFluxes> {
        let mesh = self.mesh;
        let facet = &mesh.facets[fid];
        let e = facet.left;
        let lf = facet.left_local;
        let n = facet.normal;
        let measure = facet.measure;
        let m = self.n_vars();
        let table = &mesh.basis.facets[lf];
        let nodes = mesh.nodes_of(e);
        let x_mid = facet_midpoint(facet);
        let mut high = [0.0; MAX_VARS];
        match facet.right {
            Neighbor::Interior(ne) => {
                // exact trace integral of the group flux interpolant
                for (j, &g) in nodes.iter().enumerate() {
                    let sigma = mesh.sigma(lf, j);
                    if sigma == 0.0 {
                        continue;
                    }
                    let f = self.preset.flux(mesh.node_coords[g], &u.state_at(g));
                    for (k, slot) in high.iter_mut().enumerate().take(m) {
                        *slot += sigma * (f[0][k] * n[0] + f[1][k] * n[1]) / measure;
                    }
                }
                let lam = self.preset.wave_speed_bound(
                    &facet.corners,
                    &avg[e],
                    &avg[ne],
                    n,
                    self.strict_speeds(),
                )?;
                let mut low = [0.0; MAX_VARS];
                llf_flux(self.preset, x_mid, &avg[e], &avg[ne], n, lam, &mut low);
                Ok(FaceFluxes { high, low, lambda: lam })
            }
            Neighbor::Boundary(_) => {
                // averaged nodal LLF flux against the boundary data
                for (j, &g) in nodes.iter().enumerate() {
                    let sigma = mesh.sigma(lf, j);
                    if sigma == 0.0 {
                        continue;
                    }
                    let uj = u.state_at(g);
                    let xj = mesh.node_coords[g];
                    // sigma-weighted boundary data average for this node
                    let mut hat = [0.0; MAX_VARS];
                    let mut sig_ref = 0.0;
                    for (q, &w) in table.quad_weights.iter().enumerate() {
                        let phi = table.phi[q][j];
                        if phi == 0.0 {
                            continue;
                        }
                        let x = mesh.to_physical(e, table.quad_points[q]);
                        let inner = self.trace_state(u, e, lf, q);
                        let ghost = self.preset.boundary_state(x, t, &inner, n);
                        for (k, slot) in hat.iter_mut().enumerate().take(m) {
                            *slot += w * phi * ghost[k];
                        }
                        sig_ref += w * phi;
                    }
                    for slot in hat.iter_mut() {
                        *slot /= sig_ref;
                    }
                    let lam = self.preset.wave_speed_bound(
                        &facet.corners,
                        &uj,
                        &hat,
                        n,
                        self.strict_speeds(),
                    )?;
                    let mut f_node = [0.0; MAX_VARS];
                    llf_flux(self.preset, xj, &uj, &hat, n, lam, &mut f_node);
                    for (k, slot) in high.iter_mut().enumerate().take(m) {
                        *slot += sigma * f_node[k] / measure;
                    }
                }
                let hat_avg = self.boundary_avg_state(u, e, lf, t);
                let lam = self.preset.wave_speed_bound(
                    &facet.corners,
                    &avg[e],
                    &hat_avg,
                    n,
                    self.strict_speeds(),
                )?;
                let mut low = [0.0; MAX_VARS];
                llf_flux(self.preset, x_mid, &avg[e], &hat_avg, n, lam, &mut low);
                Ok(FaceFluxes { high, low, lambda: lam })
            }
        }
    }

    /// Flux-limited intermediate cell average for the stored effective
    /// facet fluxes of element `e`.
    fn intermediate_average(
        &self,
        avg_e: &State,
        dt_e: f64,
        flux_sum: &State,
    ) -> State {
        let mut out = [0.0; MAX_VARS];
        let scale = dt_e / self.mesh.elem_volume;
        for k in 0..self.n_vars() {
            out[k] = avg_e[k] - scale * flux_sum[k];
        }
        out
    }

    /// Signed sum over facets of |S| * f for element `e` from facet storage.
    fn flux_sum(&self, e: usize, flux_of: impl Fn(usize) -> State) -> State {
        let mesh = self.mesh;
        let mut sum = [0.0; MAX_VARS];
        for lf in 0..mesh.n_facets_per_elem() {
            let view = mesh.facet_view(e, lf);
            let f = flux_of(view.id);
            for (k, slot) in sum.iter_mut().enumerate().take(self.n_vars()) {
                *slot += view.sign * view.facet.measure * f[k];
            }
        }
        sum
    }

    /// Bar-state decomposition of Lemma-1 type for element `e` at fake time
    /// step `dt`. Errors when `dt` exceeds the certified subcell bound.
    pub fn bar_state_decomposition(
        &self,
        u: &NodalField,
        e: usize,
        dt: f64,
    ) -> Result<BarStateSet> {
        let bound = self.fake_time_step_subcell(u, e)?;
        if dt > bound * (1.0 + 1e-12) {
            return Err(SolverError::CflViolation {
                context: format!("bar states need dt <= {bound:.3e}, got {dt:.3e}"),
            });
        }
        self.bar_state_decomposition_unchecked(u, e, dt)
    }

    /// Same decomposition without the CFL guard (the reconstruction identity
    /// is algebraic and holds for any dt).
    pub fn bar_state_decomposition_unchecked(
        &self,
        u: &NodalField,
        e: usize,
        dt: f64,
    ) -> Result<BarStateSet> {
        let mesh = self.mesh;
        let m = self.n_vars();
        let me = mesh.lumped_mass();
        let nodes = mesh.nodes_of(e);
        let mut avg = [0.0; MAX_VARS];
        for &g in nodes {
            for (k, slot) in avg.iter_mut().enumerate().take(m) {
                *slot += u.get(k, g);
            }
        }
        for slot in avg.iter_mut() {
            *slot /= mesh.n_local() as f64;
        }
        let (split, u0, m0) = self.interior_aggregate(u, e, &avg);
        let node_coords: Vec<[f64; 2]> = nodes.iter().map(|&g| mesh.node_coords[g]).collect();
        let f0 = self.preset.flux(elem_center(mesh, e), &u0);
        let mut bar_boundary = Vec::with_capacity(mesh.basis.boundary_local.len());
        let mut bar_pair = Vec::new();
        let mut bar_center = u0;
        for &i in &mesh.basis.boundary_local {
            let c = mesh.c_node[i];
            let c_norm = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if c_norm < 1e-14 {
                continue;
            }
            let n = [c[0] / c_norm, c[1] / c_norm];
            let ui = u.state_at(nodes[i]);
            let lam = self
                .preset
                .wave_speed_bound(&node_coords, &u0, &ui, n, self.strict_speeds())?
                .max(self.lambda_floor());
            let fi = self.preset.flux(elem_center(mesh, e), &ui);
            let mut pair = [0.0; MAX_VARS];
            for k in 0..m {
                let df = (fi[0][k] - f0[0][k]) * n[0] + (fi[1][k] - f0[1][k]) * n[1];
                pair[k] = 0.5 * (ui[k] + u0[k]) - df / (2.0 * lam);
            }
            let mut bar_i = [0.0; MAX_VARS];
            let wi = split * dt / me * c_norm * lam;
            let w0 = split * dt / m0 * c_norm * lam;
            for k in 0..m {
                bar_i[k] = ui[k] + wi * (pair[k] - ui[k]);
                bar_center[k] += w0 * (pair[k] - u0[k]);
            }
            bar_boundary.push((i, bar_i));
            bar_pair.push(pair);
        }
        Ok(BarStateSet {
            split,
            u_center: u0,
            m_center: m0,
            bar_boundary,
            bar_center,
            bar_pair,
        })
    }

    /// Group-flux intermediate average of Eq.-(21) type, assembled from the
    /// nodal fluxes and the lumped boundary vectors c_{i,e} (no facet data);
    /// the independent side of the reconstruction identity.
    pub fn group_flux_average(&self, u: &NodalField, e: usize, dt: f64) -> State {
        let mesh = self.mesh;
        let m = self.n_vars();
        let nodes = mesh.nodes_of(e);
        let mut avg = [0.0; MAX_VARS];
        let mut fsum = [0.0; MAX_VARS];
        for (i, &g) in nodes.iter().enumerate() {
            let s = u.state_at(g);
            for (k, slot) in avg.iter_mut().enumerate().take(m) {
                *slot += s[k];
            }
            let c = mesh.c_node[i];
            if c[0].abs() + c[1].abs() < 1e-14 {
                continue;
            }
            let f = self.preset.flux(mesh.node_coords[g], &s);
            for (k, slot) in fsum.iter_mut().enumerate().take(m) {
                *slot += f[0][k] * c[0] + f[1][k] * c[1];
            }
        }
        let mut out = [0.0; MAX_VARS];
        for k in 0..m {
            out[k] = avg[k] / mesh.n_local() as f64 - dt / mesh.elem_volume * fsum[k];
        }
        out
    }

    /// Halve the macrocell time step until the high-order intermediate
    /// average is admissible; the subcell bound is an unconditional floor.
    pub fn remark3_shrink(
        &self,
        u: &NodalField,
        e: usize,
        avg_e: &State,
        dt_init: f64,
        flux_sum_high: &State,
    ) -> Result<f64> {
        let mut dt = dt_init;
        let mut subcell: Option<f64> = None;
        for _ in 0..=60 {
            let bar = self.intermediate_average(avg_e, dt, flux_sum_high);
            if self.in_domain(&bar) {
                return Ok(dt);
            }
            let floor = match subcell {
                Some(f) => f,
                None => {
                    let f = self.fake_time_step_subcell(u, e)?;
                    subcell = Some(f);
                    f
                }
            };
            if dt * 0.5 <= floor {
                return Ok(floor.min(dt_init));
            }
            dt *= 0.5;
        }
        Ok(subcell.unwrap_or(dt).min(dt_init))
    }

    /// Boundary term b_i of the low-order scheme (diagnostic building block;
    /// the assembled scheme folds boundary data into the facet fluxes).
    pub fn boundary_term(&self, u: &NodalField, node: usize, t: f64) -> Result<State> {
        let mesh = self.mesh;
        let m = self.n_vars();
        let mut b = [0.0; MAX_VARS];
        let ui = u.state_at(node);
        let xi = mesh.node_coords[node];
        let fi = self.preset.flux(xi, &ui);
        for &e in &mesh.node_elems[node] {
            let local = mesh
                .nodes_of(e)
                .iter()
                .position(|&g| g == node)
                .expect("node-element connectivity");
            for lf in 0..mesh.n_facets_per_elem() {
                let view = mesh.facet_view(e, lf);
                if !matches!(view.other, Neighbor::Boundary(_)) {
                    continue;
                }
                let sigma = mesh.sigma(lf, local);
                if sigma == 0.0 {
                    continue;
                }
                let table = &mesh.basis.facets[lf];
                let n = table.normal;
                // sigma-weighted boundary data for this node on this facet
                let mut hat = [0.0; MAX_VARS];
                let mut sig_ref = 0.0;
                for (q, &w) in table.quad_weights.iter().enumerate() {
                    let phi = table.phi[q][local];
                    if phi == 0.0 {
                        continue;
                    }
                    let x = mesh.to_physical(e, table.quad_points[q]);
                    let inner = self.trace_state(u, e, lf, q);
                    let ghost = self.preset.boundary_state(x, t, &inner, n);
                    for (k, slot) in hat.iter_mut().enumerate().take(m) {
                        *slot += w * phi * ghost[k];
                    }
                    sig_ref += w * phi;
                }
                for slot in hat.iter_mut() {
                    *slot /= sig_ref;
                }
                let lam = self.preset.wave_speed_bound(
                    &view.facet.corners,
                    &ui,
                    &hat,
                    n,
                    self.strict_speeds(),
                )?;
                let mut flux = [0.0; MAX_VARS];
                llf_flux(self.preset, xi, &ui, &hat, n, lam, &mut flux);
                for (k, slot) in b.iter_mut().enumerate().take(m) {
                    *slot += sigma * (flux[k] - (fi[0][k] * n[0] + fi[1][k] * n[1]));
                }
            }
        }
        Ok(b)
    }

    /// Residual r_i = -[a(phi_i, u_h) + b(phi_i, u_h, u_hat) + s_h(phi_i, u_h)]
    /// of the stabilized Galerkin scheme; the consistent-mass time
    /// derivative solves M udot = r.
    pub fn galerkin_residual(
        &self,
        u: &NodalField,
        t: f64,
        gamma: &[f64],
        g: &[Vec<[f64; 2]>],
        out: &mut NodalField,
    ) -> Result<()> {
        let mesh = self.mesh;
        let basis = &mesh.basis;
        let m = self.n_vars();
        let n_local = mesh.n_local();
        let scale = mesh.grad_scale();
        out.data.fill(0.0);
        let mut coeffs = [[0.0; MAX_LOCAL]; MAX_VARS];
        let mut srow = [0.0; MAX_LOCAL];
        for e in 0..mesh.n_elems {
            let nodes = mesh.nodes_of(e);
            for k in 0..m {
                element_coeffs(mesh, u.var(k), e, &mut coeffs[k][..n_local]);
            }
            // volume: + integral grad(phi_i) . f(u_h)
            for (q, w) in basis.quad_weights.iter().enumerate() {
                let wp = w * mesh.elem_volume;
                let phi = &basis.phi[q];
                let grad = &basis.grad[q];
                let mut uq = [0.0; MAX_VARS];
                for k in 0..m {
                    for j in 0..n_local {
                        uq[k] += coeffs[k][j] * phi[j];
                    }
                }
                let x = mesh.to_physical(e, basis.quad_points[q]);
                let f = self.preset.flux(x, &uq);
                for (i, &gn) in nodes.iter().enumerate() {
                    let gx = grad[i][0] * scale[0];
                    let gy = grad[i][1] * scale[1];
                    for k in 0..m {
                        out.data[k * out.n_nodes + gn] += wp * (gx * f[0][k] + gy * f[1][k]);
                    }
                }
            }
            // facets: - integral phi_i f(u_h).n (interior) or phi_i F(u_h, u_hat; n)
            for lf in 0..mesh.n_facets_per_elem() {
                let view = mesh.facet_view(e, lf);
                let table = &basis.facets[lf];
                let boundary = matches!(view.other, Neighbor::Boundary(_));
                // facets owned by the other side share the same trace values
                let n_out = table.normal;
                for (q, &w) in table.quad_weights.iter().enumerate() {
                    let wp = w * mesh.facet_measure(lf);
                    let x = mesh.to_physical(e, table.quad_points[q]);
                    let uq = self.trace_state(u, e, lf, q);
                    let mut fn_val = [0.0; MAX_VARS];
                    if boundary {
                        let ghost = self.preset.boundary_state(x, t, &uq, n_out);
                        let lam = self.preset.wave_speed_bound(
                            &view.facet.corners,
                            &uq,
                            &ghost,
                            n_out,
                            self.strict_speeds(),
                        )?;
                        llf_flux(self.preset, x, &uq, &ghost, n_out, lam, &mut fn_val);
                    } else {
                        let f = self.preset.flux(x, &uq);
                        for (k, slot) in fn_val.iter_mut().enumerate().take(m) {
                            *slot = f[0][k] * n_out[0] + f[1][k] * n_out[1];
                        }
                    }
                    for (i, &gn) in nodes.iter().enumerate() {
                        let phi = table.phi[q][i];
                        if phi == 0.0 {
                            continue;
                        }
                        for k in 0..m {
                            out.data[k * out.n_nodes + gn] -= wp * phi * fn_val[k];
                        }
                    }
                }
            }
            // stabilization
            let nu = self.viscosity(u, e)?;
            for k in 0..m {
                let g_local: Vec<[f64; 2]> = nodes.iter().map(|&j| g[k][j]).collect();
                stabilization_rows(
                    mesh,
                    &coeffs[k][..n_local],
                    &g_local,
                    gamma[e],
                    nu,
                    e,
                    &mut srow,
                );
                for (i, &gn) in nodes.iter().enumerate() {
                    out.data[k * out.n_nodes + gn] -= srow[i];
                }
            }
        }
        Ok(())
    }

    /// Stabilization viscosity nu_e = lambda_e h_e / (2p) with lambda_e the
    /// max directional speed bound over element nodes and coordinate axes.
    pub fn viscosity(&self, u: &NodalField, e: usize) -> Result<f64> {
        let mesh = self.mesh;
        let mut lam: f64 = 0.0;
        let coords: Vec<[f64; 2]> = mesh.nodes_of(e).iter().map(|&g| mesh.node_coords[g]).collect();
        for &g in mesh.nodes_of(e) {
            let s = u.state_at(g);
            for d in 0..mesh.dim {
                let mut n = [0.0, 0.0];
                n[d] = 1.0;
                lam = lam.max(self.preset.wave_speed_bound(
                    &coords,
                    &s,
                    &s,
                    n,
                    self.strict_speeds(),
                )?);
            }
        }
        Ok(lam * mesh.h_e / (2.0 * mesh.degree as f64))
    }

    /// Full antidiffusive element contributions (Eq.-(41)-type target).
    #[allow(clippy::too_many_arguments)]
    fn contributions_full(
        &self,
        u: &NodalField,
        e: usize,
        avg_e: &State,
        dt_e: f64,
        gamma_e: f64,
        g: &[Vec<[f64; 2]>],
        udot: &NodalField,
        t: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let mesh = self.mesh;
        let basis = &mesh.basis;
        let m = self.n_vars();
        let n_local = mesh.n_local();
        let me = mesh.lumped_mass();
        let scale = mesh.grad_scale();
        let nodes = mesh.nodes_of(e);
        let inv_nl = 1.0 / n_local as f64;
        let mut coeffs = [[0.0; MAX_LOCAL]; MAX_VARS];
        let mut dot_coeffs = [[0.0; MAX_LOCAL]; MAX_VARS];
        for k in 0..m {
            element_coeffs(mesh, u.var(k), e, &mut coeffs[k][..n_local]);
            element_coeffs(mesh, udot.var(k), e, &mut dot_coeffs[k][..n_local]);
        }
        // nodal fluxes for the group interpolant
        let mut node_flux = [[[0.0; MAX_VARS]; 2]; MAX_LOCAL];
        for (j, &gn) in nodes.iter().enumerate() {
            node_flux[j] = self.preset.flux(mesh.node_coords[gn], &u.state_at(gn));
        }
        // mass deviation part
        for (i, &gn) in nodes.iter().enumerate() {
            for k in 0..m {
                out[i * m + k] = me * (u.get(k, gn) - avg_e[k]);
            }
        }
        // volume quadrature terms
        for (q, w) in basis.quad_weights.iter().enumerate() {
            let wp = w * mesh.elem_volume;
            let phi = &basis.phi[q];
            let grad = &basis.grad[q];
            let x = mesh.to_physical(e, basis.quad_points[q]);
            let mut uq = [0.0; MAX_VARS];
            let mut udot_q = [0.0; MAX_VARS];
            let mut fh = [[0.0; MAX_VARS]; 2];
            let mut divfh = [0.0; MAX_VARS];
            for j in 0..n_local {
                let gx = grad[j][0] * scale[0];
                let gy = grad[j][1] * scale[1];
                for k in 0..m {
                    uq[k] += coeffs[k][j] * phi[j];
                    udot_q[k] += dot_coeffs[k][j] * phi[j];
                    fh[0][k] += node_flux[j][0][k] * phi[j];
                    fh[1][k] += node_flux[j][1][k] * phi[j];
                    divfh[k] += node_flux[j][0][k] * gx + node_flux[j][1][k] * gy;
                }
            }
            let f_exact = self.preset.flux(x, &uq);
            for i in 0..n_local {
                let gx = grad[i][0] * scale[0];
                let gy = grad[i][1] * scale[1];
                for k in 0..m {
                    let t1 = gx * (f_exact[0][k] - fh[0][k]) + gy * (f_exact[1][k] - fh[1][k]);
                    let t2 = (phi[i] - inv_nl) * divfh[k];
                    let t4 = phi[i] * (udot_q[k] - dot_coeffs[k][i]);
                    out[i * m + k] += dt_e * wp * (t1 - t2 - t4);
                }
            }
        }
        // stabilization rows
        let nu = self.viscosity(u, e)?;
        let mut srow = [0.0; MAX_LOCAL];
        for k in 0..m {
            let g_local: Vec<[f64; 2]> = nodes.iter().map(|&j| g[k][j]).collect();
            stabilization_rows(mesh, &coeffs[k][..n_local], &g_local, gamma_e, nu, e, &mut srow);
            for i in 0..n_local {
                out[i * m + k] -= dt_e * srow[i];
            }
        }
        // boundary correction g_i^e
        if !mesh.periodic && mesh.has_boundary_facet(e) {
            for lf in 0..mesh.n_facets_per_elem() {
                let view = mesh.facet_view(e, lf);
                if !matches!(view.other, Neighbor::Boundary(_)) {
                    continue;
                }
                let table = &basis.facets[lf];
                let n = table.normal;
                let mut flux_h_int = [0.0; MAX_VARS]; // integral of f_h . n over the facet
                let mut flux_llf_int = [0.0; MAX_VARS]; // sum |c_j| F(u_j, u_hat_j)
                for (j, &gn) in nodes.iter().enumerate() {
                    let sigma = mesh.sigma(lf, j);
                    if sigma == 0.0 {
                        continue;
                    }
                    let uj = u.state_at(gn);
                    let fj = node_flux[j];
                    let mut hat = [0.0; MAX_VARS];
                    let mut sig_ref = 0.0;
                    for (q, &w) in table.quad_weights.iter().enumerate() {
                        let phi = table.phi[q][j];
                        if phi == 0.0 {
                            continue;
                        }
                        let x = mesh.to_physical(e, table.quad_points[q]);
                        let inner = self.trace_state(u, e, lf, q);
                        let ghost = self.preset.boundary_state(x, t, &inner, n);
                        for (k, slot) in hat.iter_mut().enumerate().take(m) {
                            *slot += w * phi * ghost[k];
                        }
                        sig_ref += w * phi;
                    }
                    for slot in hat.iter_mut() {
                        *slot /= sig_ref;
                    }
                    let lam = self.preset.wave_speed_bound(
                        &view.facet.corners,
                        &uj,
                        &hat,
                        n,
                        self.strict_speeds(),
                    )?;
                    let mut f_llf = [0.0; MAX_VARS];
                    llf_flux(self.preset, mesh.node_coords[gn], &uj, &hat, n, lam, &mut f_llf);
                    for k in 0..m {
                        flux_h_int[k] += sigma * (fj[0][k] * n[0] + fj[1][k] * n[1]);
                        flux_llf_int[k] += sigma * f_llf[k];
                    }
                }
                // term A: equal for all nodes (equal lumped masses)
                let factor = me / mesh.elem_volume;
                // term B: pointwise LLF against the group-interpolant trace
                for (q, &w) in table.quad_weights.iter().enumerate() {
                    let wp = w * mesh.facet_measure(lf);
                    let x = mesh.to_physical(e, table.quad_points[q]);
                    let inner = self.trace_state(u, e, lf, q);
                    let ghost = self.preset.boundary_state(x, t, &inner, n);
                    let lam = self.preset.wave_speed_bound(
                        &view.facet.corners,
                        &inner,
                        &ghost,
                        n,
                        self.strict_speeds(),
                    )?;
                    let mut f_llf = [0.0; MAX_VARS];
                    llf_flux(self.preset, x, &inner, &ghost, n, lam, &mut f_llf);
                    // group-flux trace at the quadrature point
                    let mut fh_trace = [0.0; MAX_VARS];
                    for j in 0..n_local {
                        let phi = table.phi[q][j];
                        if phi == 0.0 {
                            continue;
                        }
                        for (k, slot) in fh_trace.iter_mut().enumerate().take(m) {
                            *slot +=
                                phi * (node_flux[j][0][k] * n[0] + node_flux[j][1][k] * n[1]);
                        }
                    }
                    for (i, _) in nodes.iter().enumerate() {
                        let phi = table.phi[q][i];
                        if phi == 0.0 {
                            continue;
                        }
                        for k in 0..m {
                            out[i * m + k] -= dt_e * wp * phi * (f_llf[k] - fh_trace[k]);
                        }
                    }
                }
                for i in 0..n_local {
                    for k in 0..m {
                        out[i * m + k] -=
                            dt_e * factor * (flux_h_int[k] - flux_llf_int[k]);
                    }
                }
            }
        }
        Ok(())
    }

    /// Reduced second-order contributions for multilinear elements
    /// (Eq.-(57)-type target), scaled by the effective sensor value.
    fn contributions_q1(
        &self,
        u: &NodalField,
        e: usize,
        avg_e: &State,
        dt_e: f64,
        gamma_eff: f64,
        udot_low: &NodalField,
        out: &mut [f64],
    ) {
        let mesh = self.mesh;
        let basis = &mesh.basis;
        let m = self.n_vars();
        let n_local = mesh.n_local();
        let me = mesh.lumped_mass();
        let scale = mesh.grad_scale();
        let nodes = mesh.nodes_of(e);
        let inv_nl = 1.0 / n_local as f64;
        let mut coeffs = [[0.0; MAX_LOCAL]; MAX_VARS];
        let mut dot_coeffs = [[0.0; MAX_LOCAL]; MAX_VARS];
        for k in 0..m {
            element_coeffs(mesh, u.var(k), e, &mut coeffs[k][..n_local]);
            element_coeffs(mesh, udot_low.var(k), e, &mut dot_coeffs[k][..n_local]);
        }
        let mut node_flux = [[[0.0; MAX_VARS]; 2]; MAX_LOCAL];
        for (j, &gn) in nodes.iter().enumerate() {
            node_flux[j] = self.preset.flux(mesh.node_coords[gn], &u.state_at(gn));
        }
        for (i, &gn) in nodes.iter().enumerate() {
            for k in 0..m {
                out[i * m + k] = me * (u.get(k, gn) - avg_e[k]);
            }
        }
        for (q, w) in basis.quad_weights.iter().enumerate() {
            let wp = w * mesh.elem_volume;
            let phi = &basis.phi[q];
            let grad = &basis.grad[q];
            let mut udot_q = [0.0; MAX_VARS];
            let mut divfh = [0.0; MAX_VARS];
            for j in 0..n_local {
                let gx = grad[j][0] * scale[0];
                let gy = grad[j][1] * scale[1];
                for k in 0..m {
                    udot_q[k] += dot_coeffs[k][j] * phi[j];
                    divfh[k] += node_flux[j][0][k] * gx + node_flux[j][1][k] * gy;
                }
            }
            for i in 0..n_local {
                for k in 0..m {
                    let t2 = (phi[i] - inv_nl) * divfh[k];
                    let t4 = phi[i] * (udot_q[k] - dot_coeffs[k][i]);
                    out[i * m + k] -= dt_e * wp * (t2 - t4);
                }
            }
        }
        for v in out[..n_local * m].iter_mut() {
            *v *= gamma_eff;
        }
    }

    /// Assemble du/dt. Returns per-assembly diagnostics; the caller owns the
    /// global time step selection based on `ws.dt_e`.
    pub fn semidiscrete_rhs(
        &self,
        u: &NodalField,
        t: f64,
        ws: &mut RhsWorkspace,
        out: &mut NodalField,
    ) -> Result<Diagnostics> {
        let mesh = self.mesh;
        let m = self.n_vars();
        let n_local = mesh.n_local();
        let me = mesh.lumped_mass();
        let mut diag = Diagnostics::default();

        // phase 1: cell averages
        let averages = cell_averages(mesh, u);
        ws.avg.copy_from_slice(&averages);

        // phase 2: facet fluxes and speeds
        for fid in 0..mesh.facets.len() {
            ws.flux[fid] = self.face_fluxes(u, &ws.avg, fid, t)?;
        }

        // phase 3: fake time steps
        match self.cfg.dt_policy {
            DtPolicy::Subcell => {
                for e in 0..mesh.n_elems {
                    ws.dt_e[e] = self.fake_time_step_subcell(u, e)?;
                }
            }
            DtPolicy::Macrocell | DtPolicy::MacrocellShrink => {
                for e in 0..mesh.n_elems {
                    let mut denom = 0.0;
                    for lf in 0..mesh.n_facets_per_elem() {
                        let view = mesh.facet_view(e, lf);
                        denom += view.facet.measure * ws.flux[view.id].lambda;
                    }
                    ws.dt_e[e] = if denom > 1e-300 {
                        (mesh.elem_volume / denom).min(self.cfg.dt_cap)
                    } else {
                        self.cfg.dt_cap
                    };
                }
                if self.cfg.dt_policy == DtPolicy::MacrocellShrink {
                    for e in 0..mesh.n_elems {
                        let fsum = self.flux_sum(e, |fid| ws.flux[fid].high);
                        ws.dt_e[e] =
                            self.remark3_shrink(u, e, &ws.avg[e], ws.dt_e[e], &fsum)?;
                    }
                }
            }
        }
        for &dt in &ws.dt_e {
            diag.min_dt_e = diag.min_dt_e.min(dt);
        }

        // phase 4: low-order averages and the low-order time derivative
        let use_q1 = mesh.dim == 2;
        let needs_udot_low = (self.cfg.variant.uses_antidiffusion() && use_q1)
            || self.cfg.entropy_fix
            || self.cfg.flux_limiter == FluxLimiterMode::Fct;
        if needs_udot_low {
            for e in 0..mesh.n_elems {
                let fsum = self.flux_sum(e, |fid| ws.flux[fid].low);
                ws.bar_low[e] = self.intermediate_average(&ws.avg[e], ws.dt_e[e], &fsum);
            }
            ws.udot_low.data.fill(0.0);
            for e in 0..mesh.n_elems {
                for &gn in mesh.nodes_of(e) {
                    for k in 0..m {
                        ws.udot_low.data[k * ws.udot_low.n_nodes + gn] +=
                            me * (ws.bar_low[e][k] - u.get(k, gn)) / ws.dt_e[e];
                    }
                }
            }
            for k in 0..m {
                for gn in 0..mesh.n_nodes {
                    ws.udot_low.data[k * ws.udot_low.n_nodes + gn] /= ws.masses[gn];
                }
            }
        }

        // phase 5: smoothness sensor
        match self.cfg.variant {
            Variant::LowOrder => ws.gamma.fill(0.0),
            Variant::HighOrder => ws.gamma.fill(1.0),
            Variant::Weno | Variant::WenoLimited => {
                for e in 0..mesh.n_elems {
                    let mut gamma: f64 = 1.0;
                    for k in 0..m {
                        gamma =
                            gamma.min(smoothness_sensor(mesh, &self.cfg.weno, u.var(k), e));
                    }
                    ws.gamma[e] = gamma;
                }
            }
        }
        if self.cfg.entropy_fix && self.cfg.variant.uses_antidiffusion() {
            for e in 0..mesh.n_elems {
                let mut coeffs = [0.0; MAX_LOCAL];
                let mut dots = [0.0; MAX_LOCAL];
                element_coeffs(mesh, u.var(0), e, &mut coeffs[..n_local]);
                element_coeffs(mesh, ws.udot_low.var(0), e, &mut dots[..n_local]);
                let nu = self.viscosity(u, e)?;
                let xi = crate::weno::entropy_correction_factor(
                    mesh,
                    self.preset,
                    &coeffs[..n_local],
                    &dots[..n_local],
                    nu,
                    e,
                );
                ws.gamma[e] = ws.gamma[e].min(xi);
            }
        }

        // phase 6: gradient projection and target time derivative (1D full
        // contributions only)
        let needs_full = self.cfg.variant.uses_antidiffusion() && !use_q1;
        if needs_full {
            ws.g = (0..m)
                .map(|k| gradient_projection(mesh, u.var(k)))
                .collect::<Result<Vec<_>>>()?;
            let mut residual = NodalField::zeros(m, mesh.n_nodes);
            self.galerkin_residual(u, t, &ws.gamma, &ws.g, &mut residual)?;
            if self.cfg.consistent_mass_udot {
                for k in 0..m {
                    let sol = solve_consistent_mass(mesh, residual.var(k), 1e-12, 400)?;
                    ws.udot.var_mut(k).copy_from_slice(&sol);
                }
            } else {
                for k in 0..m {
                    for gn in 0..mesh.n_nodes {
                        ws.udot.data[k * ws.udot.n_nodes + gn] =
                            residual.get(k, gn) / ws.masses[gn];
                    }
                }
            }
        }

        // phase 7: effective facet fluxes (flux limiting)
        match self.cfg.flux_limiter {
            FluxLimiterMode::Off => {
                for fid in 0..mesh.facets.len() {
                    ws.flux_eff[fid] = ws.flux[fid].high;
                    ws.alpha[fid] = 1.0;
                }
            }
            FluxLimiterMode::LowOrder => {
                for fid in 0..mesh.facets.len() {
                    ws.flux_eff[fid] = ws.flux[fid].low;
                    ws.alpha[fid] = 0.0;
                }
            }
            FluxLimiterMode::Fct => {
                let (glo, ghi) = self
                    .preset
                    .scalar_range()
                    .expect("FCT limiter is scalar-only");
                let bounds = compute_bounds(
                    mesh,
                    self.cfg.bounds_mode,
                    (glo - self.cfg.bound_slack, ghi + self.cfg.bound_slack),
                    &ws.avg,
                );
                let kappa = mesh.elem_volume / self.boundary_measure();
                for fid in 0..mesh.facets.len() {
                    let facet = &mesh.facets[fid];
                    let e = facet.left;
                    let fa = ws.flux[fid].low[0] - ws.flux[fid].high[0];
                    let (lo_e, hi_e) = bounds.elem(e);
                    let left = FluxWindowSide {
                        kappa,
                        dt: ws.dt_e[e],
                        bar_low: ws.bar_low[e][0],
                        lo: lo_e,
                        hi: hi_e,
                    };
                    let limited = match facet.right {
                        Neighbor::Interior(ne) => {
                            let (lo_n, hi_n) = bounds.elem(ne);
                            let right = FluxWindowSide {
                                kappa,
                                dt: ws.dt_e[ne],
                                bar_low: ws.bar_low[ne][0],
                                lo: lo_n,
                                hi: hi_n,
                            };
                            limited_antidiffusive_flux(fa, &left, Some(&right))
                        }
                        Neighbor::Boundary(_) => limited_antidiffusive_flux(fa, &left, None),
                    };
                    ws.flux_eff[fid][0] = ws.flux[fid].low[0] - limited;
                    let alpha = if fa.abs() > 1e-300 {
                        (limited / fa).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    ws.alpha[fid] = alpha;
                    if alpha < 1.0 - 1e-12 {
                        diag.n_alpha_limited += 1;
                    }
                }
            }
        }

        // phase 8: intermediate cell averages
        for e in 0..mesh.n_elems {
            let fsum = self.flux_sum(e, |fid| ws.flux_eff[fid]);
            ws.bar[e] = self.intermediate_average(&ws.avg[e], ws.dt_e[e], &fsum);
        }

        // phase 9: antidiffusive element contributions
        if self.cfg.variant.uses_antidiffusion() {
            for e in 0..mesh.n_elems {
                let out_slice =
                    &mut ws.f_node[e * n_local * m..(e + 1) * n_local * m];
                if use_q1 {
                    self.contributions_q1(
                        u,
                        e,
                        &ws.avg[e],
                        ws.dt_e[e],
                        ws.gamma[e],
                        &ws.udot_low,
                        out_slice,
                    );
                } else {
                    self.contributions_full(
                        u,
                        e,
                        &ws.avg[e],
                        ws.dt_e[e],
                        ws.gamma[e],
                        &ws.g,
                        &ws.udot,
                        t,
                        out_slice,
                    )?;
                }
                // zero-sum diagnostic on elements without boundary nodes
                if !mesh.has_boundary_node(e) {
                    for k in 0..m {
                        let mut sum = 0.0;
                        let mut mag = 0.0;
                        for i in 0..n_local {
                            let v = out_slice[i * m + k];
                            sum += v;
                            mag += v.abs();
                        }
                        let viol = sum.abs() / (mag + 1e-14);
                        diag.zero_sum_violation = diag.zero_sum_violation.max(viol);
                    }
                }
            }
        } else {
            ws.f_node.fill(0.0);
        }

        // phase 10: slope limiting
        match self.cfg.variant {
            Variant::LowOrder => ws.beta.fill(0.0),
            Variant::HighOrder | Variant::Weno => ws.beta.fill(1.0),
            Variant::WenoLimited => {
                if self.preset.is_euler() {
                    for e in 0..mesh.n_elems {
                        let base = e * n_local * m;
                        let deltas: Vec<State> = (0..n_local)
                            .map(|i| {
                                let mut d = [0.0; MAX_VARS];
                                for k in 0..m {
                                    d[k] = ws.f_node[base + i * m + k] / me;
                                }
                                d
                            })
                            .collect();
                        ws.beta[e] = euler_positivity_factor(
                            &ws.bar[e],
                            &deltas,
                            self.cfg.eps_rho,
                            self.cfg.eps_p,
                        )?;
                    }
                } else {
                    let (glo, ghi) = self.preset.scalar_range().expect("scalar preset");
                    let bounds = compute_bounds(
                        mesh,
                        self.cfg.bounds_mode,
                        (glo - self.cfg.bound_slack, ghi + self.cfg.bound_slack),
                        &ws.avg,
                    );
                    for e in 0..mesh.n_elems {
                        let base = e * n_local * m;
                        let nodes = mesh.nodes_of(e);
                        let mut beta: f64 = 1.0;
                        for (i, &gn) in nodes.iter().enumerate() {
                            let (lo, hi) = bounds.node(gn);
                            beta = beta.min(slope_factor_scalar(
                                ws.bar[e][0],
                                ws.f_node[base + i * m],
                                me,
                                lo,
                                hi,
                            ));
                        }
                        ws.beta[e] = beta;
                    }
                }
            }
        }
        for &b in &ws.beta {
            diag.min_beta = diag.min_beta.min(b);
        }

        // phase 11: deterministic sequential scatter
        out.data.fill(0.0);
        for e in 0..mesh.n_elems {
            let base = e * n_local * m;
            let inv_dt = 1.0 / ws.dt_e[e];
            for (i, &gn) in mesh.nodes_of(e).iter().enumerate() {
                for k in 0..m {
                    let bar_node = ws.bar[e][k]
                        + ws.beta[e] * ws.f_node[base + i * m + k] / me;
                    out.data[k * out.n_nodes + gn] +=
                        (me * (bar_node - u.get(k, gn))) * inv_dt;
                }
            }
        }
        for k in 0..m {
            for gn in 0..mesh.n_nodes {
                out.data[k * out.n_nodes + gn] /= ws.masses[gn];
            }
        }

        // spot check: bar-state reconstruction identity on a few elements
        let sample = [0usize, mesh.n_elems / 3, mesh.n_elems / 2, mesh.n_elems - 1];
        for &e in sample.iter() {
            if mesh.has_boundary_facet(e) {
                continue;
            }
            let dt = ws.dt_e[e].min(1e-2 * mesh.h_e);
            let set = self.bar_state_decomposition_unchecked(u, e, dt)?;
            let lhs = set.reconstruct_average(mesh.elem_volume, m, me);
            let rhs = self.group_flux_average(u, e, dt);
            for k in 0..m {
                let scale = lhs[k].abs().max(rhs[k].abs()).max(1.0);
                diag.bar_identity_error =
                    diag.bar_identity_error.max((lhs[k] - rhs[k]).abs() / scale);
            }
        }
        Ok(diag)
    }

    /// Total boundary measure |dK_e| of one element (uniform mesh).
    fn boundary_measure(&self) -> f64 {
        (0..self.mesh.n_facets_per_elem())
            .map(|lf| self.mesh.facet_measure(lf))
            .sum()
    }
}

fn facet_midpoint(facet: &crate::mesh::Facet) -> [f64; 2] {
    let mut x = [0.0, 0.0];
    for c in &facet.corners {
        x[0] += c[0];
        x[1] += c[1];
    }
    let n = facet.corners.len() as f64;
    [x[0] / n, x[1] / n]
}

fn elem_center(mesh: &Mesh, e: usize) -> [f64; 2] {
    mesh.to_physical(e, [0.5, 0.5])
}

/// Nodal initialization u_j(0) = u_0(x_j).
pub fn nodal_initial(preset: Preset, mesh: &Mesh) -> NodalField {
    let m = preset.n_vars();
    let mut u = NodalField::zeros(m, mesh.n_nodes);
    for (g, &x) in mesh.node_coords.iter().enumerate() {
        let s = preset.initial(x);
        for k in 0..m {
            u.set(k, g, s[k]);
        }
    }
    u
}

/// Lumped total mass per conserved variable.
pub fn total_mass(mesh: &Mesh, u: &NodalField) -> State {
    let masses = mesh.global_lumped_masses();
    let mut out = [0.0; MAX_VARS];
    for k in 0..u.n_vars {
        out[k] = u
            .var(k)
            .iter()
            .zip(&masses)
            .map(|(ui, mi)| ui * mi)
            .sum();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scheme_for<'a>(
        preset: Preset,
        mesh: &'a Mesh,
        variant: Variant,
    ) -> Scheme<'a> {
        let cfg = SchemeConfig::new(preset, variant);
        Scheme::new(preset, mesh, cfg).unwrap()
    }

    #[test]
    fn llf_consistency_every_preset() {
        // F(u, u; n) = f(u) . n
        for (_, preset) in crate::problems::PRESET_NAMES {
            let u = preset.initial([0.3, 0.2]);
            let x = [0.31, 0.21];
            for n in [[1.0, 0.0], [-1.0, 0.0]] {
                let lam = preset.wave_speed_bound(&[x], &u, &u, n, true).unwrap();
                let mut f = [0.0; MAX_VARS];
                llf_flux(preset, x, &u, &u, n, lam, &mut f);
                let exact = preset.flux(x, &u);
                for k in 0..preset.n_vars() {
                    let want = exact[0][k] * n[0] + exact[1][k] * n[1];
                    assert!((f[k] - want).abs() < 1e-13, "{}", preset.name());
                }
            }
        }
    }

    #[test]
    fn llf_value_and_antisymmetry() {
        let p = Preset::AdvectGauss;
        let mut f = [0.0; MAX_VARS];
        llf_flux(p, [0.0; 2], &[0.0; 3], &[1.0, 0.0, 0.0], [1.0, 0.0], 1.0, &mut f);
        assert_eq!(f[0], 0.0);
        // antisymmetry on random states
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let ul = [rng.gen_range(-1.0..1.0), 0.0, 0.0];
            let ur = [rng.gen_range(-1.0..1.0), 0.0, 0.0];
            let lam = 1.0;
            let mut a = [0.0; MAX_VARS];
            let mut b = [0.0; MAX_VARS];
            llf_flux(p, [0.0; 2], &ul, &ur, [1.0, 0.0], lam, &mut a);
            llf_flux(p, [0.0; 2], &ur, &ul, [-1.0, 0.0], lam, &mut b);
            assert!((a[0] + b[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn subcell_bound_p1_and_p2() {
        // advection with lambda = 1: P1 gives h/4, P2 gives h/6
        let mesh = Mesh::interval(0.0, 1.0, 4, 1, true).unwrap();
        let scheme = scheme_for(Preset::AdvectGauss, &mesh, Variant::LowOrder);
        let u = NodalField::zeros(1, mesh.n_nodes);
        let dt = scheme.fake_time_step_subcell(&u, 0).unwrap();
        assert!((dt - 0.25 / 4.0).abs() < 1e-14, "P1: {dt}");
        let mesh2 = Mesh::interval(0.0, 1.0, 4, 2, true).unwrap();
        let scheme2 = scheme_for(Preset::AdvectGauss, &mesh2, Variant::LowOrder);
        let u2 = NodalField::zeros(1, mesh2.n_nodes);
        let dt2 = scheme2.fake_time_step_subcell(&u2, 1).unwrap();
        assert!((dt2 - 0.25 / 6.0).abs() < 1e-14, "P2: {dt2}");
    }

    #[test]
    fn subcell_bound_capped_for_zero_speed() {
        // Burgers at u = 0: all wave speeds vanish
        let mesh = Mesh::interval(0.0, 1.0, 4, 1, true).unwrap();
        let scheme = scheme_for(Preset::Burgers1d, &mesh, Variant::LowOrder);
        let u = NodalField::zeros(1, mesh.n_nodes);
        let dt = scheme.fake_time_step_subcell(&u, 2).unwrap();
        assert_eq!(dt, scheme.cfg.dt_cap);
    }

    #[test]
    fn macrocell_bound_evaluation() {
        // Burgers with u = 2 everywhere on h = 0.1: |K|/(1*2 + 1*2) = 0.025
        let mesh = Mesh::interval(0.0, 1.0, 10, 1, true).unwrap();
        let scheme = scheme_for(Preset::Burgers1d, &mesh, Variant::LowOrder);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        u.var_mut(0).fill(1.4); // stay inside G = [-0.5, 1.5]
        let avg = cell_averages(&mesh, &u);
        let dt = scheme.fake_time_step_macrocell(&u, &avg, 3, 0.0).unwrap();
        assert!((dt - 0.1 / (2.0 * 1.4)).abs() < 1e-14);
        // independence of the polynomial degree
        let mesh4 = Mesh::interval(0.0, 1.0, 10, 4, true).unwrap();
        let scheme4 = scheme_for(Preset::Burgers1d, &mesh4, Variant::LowOrder);
        let mut u4 = NodalField::zeros(1, mesh4.n_nodes);
        u4.var_mut(0).fill(1.4);
        let avg4 = cell_averages(&mesh4, &u4);
        let dt4 = scheme4.fake_time_step_macrocell(&u4, &avg4, 3, 0.0).unwrap();
        assert!((dt - dt4).abs() < 1e-15);
    }

    #[test]
    fn face_fluxes_constant_state() {
        let mesh = Mesh::interval(0.0, 1.0, 4, 2, true).unwrap();
        let scheme = scheme_for(Preset::Burgers1d, &mesh, Variant::HighOrder);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        u.var_mut(0).fill(0.8);
        let avg = cell_averages(&mesh, &u);
        for fid in 0..mesh.facets.len() {
            let f = scheme.face_fluxes(&u, &avg, fid, 0.0).unwrap();
            let n = mesh.facets[fid].normal[0];
            let want = 0.5 * 0.8 * 0.8 * n;
            assert!((f.high[0] - want).abs() < 1e-14);
            assert!((f.low[0] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn group_flux_is_endpoint_value_in_1d() {
        // P1 advection: the high flux at a point facet is the nodal value
        let mesh = Mesh::interval(0.0, 1.0, 4, 1, true).unwrap();
        let scheme = scheme_for(Preset::AdvectGauss, &mesh, Variant::HighOrder);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        for g in 0..mesh.n_nodes {
            u.set(0, g, 0.1 + 0.2 * g as f64);
        }
        let avg = cell_averages(&mesh, &u);
        // right facet of element 1 sits at node 2
        let view = mesh.facet_view(1, 1);
        let f = scheme.face_fluxes(&u, &avg, view.id, 0.0).unwrap();
        assert!((f.high[0] * view.sign - u.get(0, 2)).abs() < 1e-14);
    }

    #[test]
    fn effective_flux_antisymmetry_from_both_sides() {
        // recompute the high flux from the right element: exact negation
        let mesh = Mesh::quad(0.0, 1.0, 0.0, 1.0, 3, 3, 1, true).unwrap();
        let scheme = scheme_for(Preset::Kpp, &mesh, Variant::HighOrder);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        for g in 0..mesh.n_nodes {
            u.set(0, g, rng.gen_range(1.0..10.0));
        }
        for fid in 0..mesh.facets.len() {
            let facet = &mesh.facets[fid];
            let ne = match facet.right {
                Neighbor::Interior(ne) => ne,
                Neighbor::Boundary(_) => continue,
            };
            let f = scheme.face_fluxes(&u, &cell_averages(&mesh, &u), fid, 0.0).unwrap();
            // manual evaluation from the right element
            let mut from_right = 0.0;
            for (j, &g) in mesh.nodes_of(ne).iter().enumerate() {
                let sigma = mesh.sigma(facet.right_local, j);
                if sigma == 0.0 {
                    continue;
                }
                let flux = scheme
                    .preset
                    .flux(mesh.node_coords[g], &u.state_at(g));
                let n = mesh.basis.facets[facet.right_local].normal;
                from_right += sigma * (flux[0][0] * n[0] + flux[1][0] * n[1]) / facet.measure;
            }
            assert!(
                (from_right + f.high[0]).abs() < 1e-13,
                "facet {fid}: {from_right} vs {}",
                f.high[0]
            );
        }
    }

    #[test]
    fn intermediate_average_worked_example() {
        // two unit cells, P1 advection, element 0 holds (0, 1):
        // bar = 0.5 - 0.25 * (1 - 0) = 0.25 at dt = 0.25
        let mesh = Mesh::interval(0.0, 2.0, 2, 1, true).unwrap();
        let scheme = scheme_for(Preset::AdvectGauss, &mesh, Variant::HighOrder);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        u.set(0, 1, 1.0);
        let bar = scheme.group_flux_average(&u, 0, 0.25);
        assert!((bar[0] - 0.25).abs() < 1e-14);
        // constant state: fluxes telescope for any dt
        let mut c = NodalField::zeros(1, mesh.n_nodes);
        c.var_mut(0).fill(0.7);
        let bar_c = scheme.group_flux_average(&c, 1, 0.4);
        assert!((bar_c[0] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn bar_state_identity_random_states() {
        // reconstruction of the convex decomposition equals the group-flux
        // average for P1, P2 and Q1
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let meshes = vec![
            Mesh::interval(0.0, 1.0, 4, 1, true).unwrap(),
            Mesh::interval(0.0, 1.0, 4, 2, true).unwrap(),
            Mesh::quad(0.0, 1.0, 0.0, 1.0, 3, 3, 1, true).unwrap(),
        ];
        for mesh in &meshes {
            let preset = if mesh.dim == 1 {
                Preset::Burgers1d
            } else {
                Preset::Kpp
            };
            let scheme = scheme_for(preset, mesh, Variant::LowOrder);
            let (lo, hi) = preset.scalar_range().unwrap();
            for _ in 0..100 {
                let mut u = NodalField::zeros(1, mesh.n_nodes);
                for g in 0..mesh.n_nodes {
                    u.set(0, g, rng.gen_range(lo..hi));
                }
                let e = rng.gen_range(0..mesh.n_elems);
                let dt = scheme.fake_time_step_subcell(&u, e).unwrap();
                let set = scheme.bar_state_decomposition(&u, e, dt).unwrap();
                let lhs = set.reconstruct_average(mesh.elem_volume, 1, mesh.lumped_mass());
                let rhs = scheme.group_flux_average(&u, e, dt);
                assert!(
                    (lhs[0] - rhs[0]).abs() < 1e-12 * lhs[0].abs().max(1.0),
                    "identity: {} vs {}",
                    lhs[0],
                    rhs[0]
                );
            }
        }
    }

    #[test]
    fn bar_states_stay_in_hull_for_scalars() {
        // pairwise bar states and the full decomposition stay in the hull of
        // the participating states (advection and Burgers)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for preset in [Preset::AdvectGauss, Preset::Burgers1d] {
            let mesh = Mesh::interval(0.0, 1.0, 4, 2, true).unwrap();
            let scheme = scheme_for(preset, &mesh, Variant::LowOrder);
            let (lo, hi) = preset.scalar_range().unwrap();
            for _ in 0..500 {
                let mut u = NodalField::zeros(1, mesh.n_nodes);
                for g in 0..mesh.n_nodes {
                    u.set(0, g, rng.gen_range(lo..hi));
                }
                let e = rng.gen_range(0..mesh.n_elems);
                let dt = scheme.fake_time_step_subcell(&u, e).unwrap();
                let set = scheme.bar_state_decomposition(&u, e, dt).unwrap();
                let states: Vec<f64> = mesh.nodes_of(e).iter().map(|&g| u.get(0, g)).collect();
                let smin = states.iter().cloned().fold(f64::INFINITY, f64::min);
                let smax = states.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for pair in &set.bar_pair {
                    assert!(pair[0] >= smin - 1e-12 && pair[0] <= smax + 1e-12);
                }
                for (_, bar) in &set.bar_boundary {
                    assert!(bar[0] >= smin - 1e-12 && bar[0] <= smax + 1e-12);
                }
                assert!(set.bar_center[0] >= smin - 1e-12 && set.bar_center[0] <= smax + 1e-12);
            }
        }
    }

    #[test]
    fn shrink_returns_initial_step_on_constant_data()  {
        let mesh = Mesh::quad(0.0, 1.0, 0.0, 1.0, 4, 4, 1, true).unwrap();
        let scheme = scheme_for(Preset::Kpp, &mesh, Variant::LowOrder);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        u.var_mut(0).fill(1.0);
        let avg = cell_averages(&mesh, &u);
        let fsum = [0.0; MAX_VARS]; // constant state: group fluxes telescope
        let dt = scheme.remark3_shrink(&u, 0, &avg[0], 0.01, &fsum).unwrap();
        assert_eq!(dt, 0.01);
    }

    #[test]
    fn contributions_vanish_for_constant_state() {
        let mesh = Mesh::interval(0.0, 1.0, 4, 2, true).unwrap();
        let mut cfg = SchemeConfig::new(Preset::Burgers1d, Variant::HighOrder);
        cfg.dt_policy = DtPolicy::Subcell;
        let scheme = Scheme::new(Preset::Burgers1d, &mesh, cfg).unwrap();
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        u.var_mut(0).fill(0.9);
        let mut ws = RhsWorkspace::new(&mesh, 1);
        let mut out = NodalField::zeros(1, mesh.n_nodes);
        scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
        for e in 0..mesh.n_elems {
            for i in 0..mesh.n_local() {
                assert!(ws.f_node[e * mesh.n_local() + i].abs() < 1e-13);
            }
        }
        for &v in &out.data {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn q1_contributions_scale_with_gamma() {
        let mesh = Mesh::quad(0.0, 1.0, 0.0, 1.0, 3, 3, 1, true).unwrap();
        let scheme = scheme_for(Preset::Kpp, &mesh, Variant::HighOrder);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        for g in 0..mesh.n_nodes {
            u.set(0, g, rng.gen_range(1.0..10.0));
        }
        let avg = cell_averages(&mesh, &u);
        let udot_low = NodalField::zeros(1, mesh.n_nodes);
        let mut with_gamma = [0.0; 8];
        let mut zero_gamma = [0.0; 8];
        scheme.contributions_q1(&u, 4, &avg[4], 0.01, 0.5, &udot_low, &mut with_gamma);
        scheme.contributions_q1(&u, 4, &avg[4], 0.01, 0.0, &udot_low, &mut zero_gamma);
        assert!(zero_gamma.iter().all(|&v| v == 0.0));
        assert!(with_gamma.iter().any(|&v| v.abs() > 1e-10));
    }

    #[test]
    fn zero_sum_of_element_contributions() {
        // interior elements: sum_i f_i^e = 0 for both variants
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // 1D full variant
        let mesh = Mesh::interval(0.0, 1.0, 5, 2, true).unwrap();
        let scheme = scheme_for(Preset::Burgers1d, &mesh, Variant::Weno);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        for g in 0..mesh.n_nodes {
            u.set(0, g, rng.gen_range(-0.4..1.4));
        }
        let mut ws = RhsWorkspace::new(&mesh, 1);
        let mut out = NodalField::zeros(1, mesh.n_nodes);
        let diag = scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
        assert!(
            diag.zero_sum_violation < 1e-12,
            "1D zero-sum violation {}",
            diag.zero_sum_violation
        );
        // 2D Q1 variant
        let mesh2 = Mesh::quad(0.0, 1.0, 0.0, 1.0, 4, 4, 1, true).unwrap();
        let scheme2 = scheme_for(Preset::Kpp, &mesh2, Variant::Weno);
        let mut u2 = NodalField::zeros(1, mesh2.n_nodes);
        for g in 0..mesh2.n_nodes {
            u2.set(0, g, rng.gen_range(1.0..10.0));
        }
        let mut ws2 = RhsWorkspace::new(&mesh2, 1);
        let mut out2 = NodalField::zeros(1, mesh2.n_nodes);
        let diag2 = scheme2.semidiscrete_rhs(&u2, 0.0, &mut ws2, &mut out2).unwrap();
        assert!(diag2.zero_sum_violation < 1e-12);
    }

    #[test]
    fn boundary_term_cases() {
        // periodic: no boundary facets at all
        let mesh = Mesh::interval(0.0, 1.0, 4, 1, true).unwrap();
        let scheme = scheme_for(Preset::AdvectGauss, &mesh, Variant::LowOrder);
        let u = nodal_initial(Preset::AdvectGauss, &mesh);
        for g in 0..mesh.n_nodes {
            let b = scheme.boundary_term(&u, g, 0.0).unwrap();
            assert_eq!(b[0], 0.0);
        }
        // Shu-Osher: u_hat = u makes the boundary flux consistent
        let mesh_so = Preset::ShuOsher.build_mesh(20, 1).unwrap();
        let scheme_so = scheme_for(Preset::ShuOsher, &mesh_so, Variant::Weno);
        let u_so = nodal_initial(Preset::ShuOsher, &mesh_so);
        for g in [0, mesh_so.n_nodes - 1] {
            let b = scheme_so.boundary_term(&u_so, g, 0.0).unwrap();
            for k in 0..3 {
                assert!(b[k].abs() < 1e-13, "node {g} component {k}: {}", b[k]);
            }
        }
        // modified Sod at t = 0: the trace equals the inflow data
        let mesh_sod = Preset::SodModified.build_mesh(16, 1).unwrap();
        let scheme_sod = scheme_for(Preset::SodModified, &mesh_sod, Variant::WenoLimited);
        let u_sod = nodal_initial(Preset::SodModified, &mesh_sod);
        let b = scheme_sod.boundary_term(&u_sod, 0, 0.0).unwrap();
        for k in 0..3 {
            assert!(b[k].abs() < 1e-12);
        }
        // interior node of a non-periodic mesh: no boundary support
        let b_mid = scheme_sod.boundary_term(&u_sod, 8, 0.0).unwrap();
        assert_eq!(b_mid[0], 0.0);
    }

    #[test]
    fn constant_states_are_steady() {
        // periodic scalar presets and consistent-BC presets: du/dt = 0
        for (preset, value) in [
            (Preset::AdvectGauss, 0.4),
            (Preset::AdvectStepBump, 0.9),
            (Preset::Burgers1d, 0.7),
        ] {
            let mesh = preset.build_mesh(6, 2).unwrap();
            for variant in [
                Variant::LowOrder,
                Variant::HighOrder,
                Variant::Weno,
                Variant::WenoLimited,
            ] {
                let scheme = scheme_for(preset, &mesh, variant);
                let mut u = NodalField::zeros(1, mesh.n_nodes);
                u.var_mut(0).fill(value);
                let mut ws = RhsWorkspace::new(&mesh, 1);
                let mut out = NodalField::zeros(1, mesh.n_nodes);
                scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
                for &v in &out.data {
                    assert!(
                        v.abs() < 1e-12,
                        "{} {} not steady: {v:.3e}",
                        preset.name(),
                        variant.label()
                    );
                }
            }
        }
        // KPP at the far-field value: boundary data matches the constant
        let mesh = Preset::Kpp.build_mesh(8, 1).unwrap();
        let scheme = scheme_for(Preset::Kpp, &mesh, Variant::WenoLimited);
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        u.var_mut(0).fill(std::f64::consts::FRAC_PI_4);
        let mut ws = RhsWorkspace::new(&mesh, 1);
        let mut out = NodalField::zeros(1, mesh.n_nodes);
        scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
        for &v in &out.data {
            assert!(v.abs() < 1e-12, "KPP far field not steady: {v:.3e}");
        }
        // solid body rotation at zero: interior and boundary both steady
        let mesh = Preset::SolidBodyRotation.build_mesh(8, 1).unwrap();
        let scheme = scheme_for(Preset::SolidBodyRotation, &mesh, Variant::WenoLimited);
        let u = NodalField::zeros(1, mesh.n_nodes);
        let mut ws = RhsWorkspace::new(&mesh, 1);
        let mut out = NodalField::zeros(1, mesh.n_nodes);
        scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
        for &v in &out.data {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn low_order_p1_matches_hand_stencil() {
        // classical LLF/Rusanov stencil on a 4-cell periodic mesh
        let mesh = Mesh::interval(0.0, 1.0, 4, 1, true).unwrap();
        let scheme = scheme_for(Preset::AdvectGauss, &mesh, Variant::LowOrder);
        let h = 0.25;
        let u_vals = [0.3, 0.8, 0.1, 0.5];
        let mut u = NodalField::zeros(1, mesh.n_nodes);
        for (g, &v) in u_vals.iter().enumerate() {
            u.set(0, g, v);
        }
        let mut ws = RhsWorkspace::new(&mesh, 1);
        let mut out = NodalField::zeros(1, mesh.n_nodes);
        scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
        // dt_e = h/4 (lambda = 1): hand stencil
        // m_i du_i = lambda (u_{i-1} - 2 u_i + u_{i+1}) - (f_{i+1} - f_{i-1})/2
        for i in 0..4 {
            let um = u_vals[(i + 3) % 4];
            let up = u_vals[(i + 1) % 4];
            let ui = u_vals[i];
            let want = ((um - 2.0 * ui + up) - 0.5 * (up - um)) / h;
            assert!(
                (out.get(0, i) - want).abs() < 1e-13,
                "node {i}: {} vs {want}",
                out.get(0, i)
            );
        }
    }

    #[test]
    fn conservation_on_periodic_meshes() {
        // sum m_i du_i/dt = 0 for every variant
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for preset in [Preset::AdvectStepBump, Preset::Burgers1d] {
            let mesh = preset.build_mesh(8, 2).unwrap();
            let (lo, hi) = preset.scalar_range().unwrap();
            for variant in [
                Variant::LowOrder,
                Variant::HighOrder,
                Variant::Weno,
                Variant::WenoLimited,
            ] {
                let scheme = scheme_for(preset, &mesh, variant);
                let mut u = NodalField::zeros(1, mesh.n_nodes);
                for g in 0..mesh.n_nodes {
                    u.set(0, g, rng.gen_range(lo..hi));
                }
                let mut ws = RhsWorkspace::new(&mesh, 1);
                let mut out = NodalField::zeros(1, mesh.n_nodes);
                scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
                let masses = mesh.global_lumped_masses();
                let total: f64 = out
                    .var(0)
                    .iter()
                    .zip(&masses)
                    .map(|(du, m)| du * m)
                    .sum();
                let scale: f64 = out
                    .var(0)
                    .iter()
                    .zip(&masses)
                    .map(|(du, m)| (du * m).abs())
                    .sum::<f64>()
                    .max(1e-30);
                assert!(
                    total.abs() < 1e-12 * scale,
                    "{} {}: drift {total:.3e}",
                    preset.name(),
                    variant.label()
                );
            }
        }
    }

    #[test]
    fn high_order_variant_matches_direct_galerkin_assembly() {
        // MCL with alpha = beta = 1 and the consistent-mass time derivative
        // reproduces the stabilized Galerkin right-hand side
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for p in [1usize, 2] {
            let mesh = Mesh::interval(0.0, 1.0, 8, p, true).unwrap();
            let mut cfg = SchemeConfig::new(Preset::Burgers1d, Variant::HighOrder);
            cfg.consistent_mass_udot = true;
            let scheme = Scheme::new(Preset::Burgers1d, &mesh, cfg).unwrap();
            let mut u = NodalField::zeros(1, mesh.n_nodes);
            for g in 0..mesh.n_nodes {
                u.set(0, g, rng.gen_range(-0.4..1.4));
            }
            let mut ws = RhsWorkspace::new(&mesh, 1);
            let mut out = NodalField::zeros(1, mesh.n_nodes);
            scheme.semidiscrete_rhs(&u, 0.0, &mut ws, &mut out).unwrap();
            // ws.udot holds the direct CG-WENO derivative (consistent mass)
            let mut max_rel: f64 = 0.0;
            let scale = ws
                .udot
                .data
                .iter()
                .map(|x| x.abs())
                .fold(0.0, f64::max)
                .max(1e-30);
            for g in 0..mesh.n_nodes {
                max_rel = max_rel.max((out.get(0, g) - ws.udot.get(0, g)).abs() / scale);
            }
            assert!(max_rel < 1e-10, "P{p}: relative difference {max_rel:.3e}");
        }
    }
}
