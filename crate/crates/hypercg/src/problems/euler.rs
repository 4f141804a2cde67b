//! 1D compressible Euler equations: state algebra, wave-speed bounds and
//! the exact Riemann solver used as a reference oracle.

use crate::error::{Result, SolverError};
use crate::field::State;

pub const GAMMA: f64 = 1.4;

#[inline]
pub fn pressure(u: &State) -> f64 {
    (GAMMA - 1.0) * (u[2] - 0.5 * u[1] * u[1] / u[0])
}

#[inline]
pub fn velocity(u: &State) -> f64 {
    u[1] / u[0]
}

#[inline]
pub fn admissible(u: &State) -> bool {
    u[0] > 0.0 && pressure(u) > 0.0 && u.iter().all(|x| x.is_finite())
}

pub fn from_primitive(rho: f64, v: f64, p: f64) -> State {
    [rho, rho * v, p / (GAMMA - 1.0) + 0.5 * rho * v * v]
}

pub fn flux_1d(u: &State) -> State {
    let v = velocity(u);
    let p = pressure(u);
    [u[1], u[1] * v + p, v * (u[2] + p)]
}

/// Strict two-state wave-speed bound max(|v_L.n| + c_L, |v_R.n| + c_R);
/// errors on inadmissible inputs.
pub fn llf_speed(ul: &State, ur: &State, n: f64) -> Result<f64> {
    if !admissible(ul) || !admissible(ur) {
        return Err(SolverError::InadmissibleState {
            context: format!(
                "llf_speed_euler: rho_L={:.3e} p_L={:.3e} rho_R={:.3e} p_R={:.3e}",
                ul[0],
                pressure(ul),
                ur[0],
                pressure(ur)
            ),
        });
    }
    Ok(llf_speed_guarded(ul, ur, n))
}

/// Same bound with the sound speed guarded as sqrt(max(0, gamma p / rho));
/// only meant for unlimited target schemes that may leave the admissible set.
pub fn llf_speed_guarded(ul: &State, ur: &State, n: f64) -> f64 {
    let c = |u: &State| (GAMMA * pressure(u).max(0.0) / u[0].max(1e-300)).sqrt();
    let sl = (velocity(ul) * n).abs() + c(ul);
    let sr = (velocity(ur) * n).abs() + c(ur);
    sl.max(sr)
}

/// Physical specific entropy s = log(p rho^-gamma).
pub fn specific_entropy(u: &State) -> f64 {
    let p = pressure(u).max(1e-300);
    let rho = u[0].max(1e-300);
    (p * rho.powf(-GAMMA)).ln()
}

struct Primitive {
    rho: f64,
    v: f64,
    p: f64,
    c: f64,
}

fn primitive(u: &State) -> Primitive {
    let rho = u[0];
    let v = velocity(u);
    let p = pressure(u);
    Primitive {
        rho,
        v,
        p,
        c: (GAMMA * p / rho).sqrt(),
    }
}

/// Pressure function f_K(p) and its derivative for one side of the star
/// region (Toro-style two-shock / two-rarefaction branches).
fn pressure_fn(p: f64, side: &Primitive) -> (f64, f64) {
    if p > side.p {
        let a = 2.0 / ((GAMMA + 1.0) * side.rho);
        let b = (GAMMA - 1.0) / (GAMMA + 1.0) * side.p;
        let sq = (a / (p + b)).sqrt();
        let f = (p - side.p) * sq;
        let df = sq * (1.0 - 0.5 * (p - side.p) / (p + b));
        (f, df)
    } else {
        let pr = p / side.p;
        let ex = (GAMMA - 1.0) / (2.0 * GAMMA);
        let f = 2.0 * side.c / (GAMMA - 1.0) * (pr.powf(ex) - 1.0);
        let df = 1.0 / (side.rho * side.c) * pr.powf(-(GAMMA + 1.0) / (2.0 * GAMMA));
        (f, df)
    }
}

/// Star-region pressure and velocity: Newton iteration with a bisection
/// fallback, tolerance 1e-12 (relative).
pub fn star_state(ul: &State, ur: &State) -> Result<(f64, f64)> {
    if !admissible(ul) || !admissible(ur) {
        return Err(SolverError::InadmissibleState {
            context: "exact_riemann_euler input".into(),
        });
    }
    let l = primitive(ul);
    let r = primitive(ur);
    let dv = r.v - l.v;
    // vacuum formation: the pressure function has no positive root
    if 2.0 * (l.c + r.c) / (GAMMA - 1.0) <= dv {
        return Err(SolverError::VacuumFormation);
    }
    let total = |p: f64| {
        let (fl, dl) = pressure_fn(p, &l);
        let (fr, dr) = pressure_fn(p, &r);
        (fl + fr + dv, dl + dr)
    };
    // PVRS initial guess, floored away from zero
    let p_pv = 0.5 * (l.p + r.p) - 0.125 * dv * (l.rho + r.rho) * (l.c + r.c);
    let mut p = p_pv.max(1e-10 * (l.p + r.p));
    let mut lo = 1e-14 * (l.p + r.p);
    let mut hi = (l.p.max(r.p)) * 1.0;
    // grow hi until the residual is positive (f is increasing in p)
    for _ in 0..200 {
        if total(hi).0 > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let mut converged = false;
    for _ in 0..100 {
        let (f, df) = total(p);
        if f > 0.0 {
            hi = hi.min(p);
        } else {
            lo = lo.max(p);
        }
        let dp = f / df;
        let mut p_new = p - dp;
        if !(p_new > lo && p_new < hi) || !p_new.is_finite() {
            p_new = 0.5 * (lo + hi);
        }
        let change = (p_new - p).abs() / (0.5 * (p_new + p)).max(1e-300);
        p = p_new;
        if change < 1e-13 || (hi - lo) < 1e-13 * p {
            converged = true;
            break;
        }
    }
    if !converged {
        let (f, _) = total(p);
        if f.abs() > 1e-9 * (1.0 + dv.abs()) {
            return Err(SolverError::NonConvergence {
                what: "Riemann star pressure".into(),
                residual: f,
            });
        }
    }
    let v_star = 0.5 * (l.v + r.v) + 0.5 * (pressure_fn(p, &r).0 - pressure_fn(p, &l).0);
    Ok((p, v_star))
}

/// Exact self-similar solution of the Riemann problem sampled at xi = x/t.
pub fn exact_riemann(ul: &State, ur: &State, xi: f64) -> Result<State> {
    let (p_star, v_star) = star_state(ul, ur)?;
    let l = primitive(ul);
    let r = primitive(ur);
    let g = GAMMA;
    let state = if xi <= v_star {
        // left of the contact
        if p_star > l.p {
            let sl = l.v - l.c * ((g + 1.0) / (2.0 * g) * p_star / l.p + (g - 1.0) / (2.0 * g)).sqrt();
            if xi < sl {
                (l.rho, l.v, l.p)
            } else {
                let ratio = p_star / l.p;
                let gr = (g - 1.0) / (g + 1.0);
                let rho = l.rho * (ratio + gr) / (gr * ratio + 1.0);
                (rho, v_star, p_star)
            }
        } else {
            let sh = l.v - l.c;
            let c_star = l.c * (p_star / l.p).powf((g - 1.0) / (2.0 * g));
            let st = v_star - c_star;
            if xi < sh {
                (l.rho, l.v, l.p)
            } else if xi > st {
                (l.rho * (p_star / l.p).powf(1.0 / g), v_star, p_star)
            } else {
                let v = 2.0 / (g + 1.0) * (l.c + (g - 1.0) / 2.0 * l.v + xi);
                let c = 2.0 / (g + 1.0) * (l.c + (g - 1.0) / 2.0 * (l.v - xi));
                let rho = l.rho * (c / l.c).powf(2.0 / (g - 1.0));
                let p = l.p * (c / l.c).powf(2.0 * g / (g - 1.0));
                (rho, v, p)
            }
        }
    } else {
        // right of the contact
        if p_star > r.p {
            let sr = r.v + r.c * ((g + 1.0) / (2.0 * g) * p_star / r.p + (g - 1.0) / (2.0 * g)).sqrt();
            if xi > sr {
                (r.rho, r.v, r.p)
            } else {
                let ratio = p_star / r.p;
                let gr = (g - 1.0) / (g + 1.0);
                let rho = r.rho * (ratio + gr) / (gr * ratio + 1.0);
                (rho, v_star, p_star)
            }
        } else {
            let sh = r.v + r.c;
            let c_star = r.c * (p_star / r.p).powf((g - 1.0) / (2.0 * g));
            let st = v_star + c_star;
            if xi > sh {
                (r.rho, r.v, r.p)
            } else if xi < st {
                (r.rho * (p_star / r.p).powf(1.0 / g), v_star, p_star)
            } else {
                let v = 2.0 / (g + 1.0) * (-r.c + (g - 1.0) / 2.0 * r.v + xi);
                let c = 2.0 / (g + 1.0) * (r.c - (g - 1.0) / 2.0 * (r.v - xi));
                let rho = r.rho * (c / r.c).powf(2.0 / (g - 1.0));
                let p = r.p * (c / r.c).powf(2.0 * g / (g - 1.0));
                (rho, v, p)
            }
        }
    };
    Ok(from_primitive(state.0, state.1, state.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_round_trip() {
        let u = from_primitive(1.0, 0.0, 1.0);
        assert!((u[2] - 1.0 / (GAMMA - 1.0)).abs() < 1e-15);
        assert!((pressure(&u) - 1.0).abs() < 1e-14);
        // lambda for this state pair: sqrt(1.4)
        let s = llf_speed(&u, &u, 1.0).unwrap();
        assert!((s - GAMMA.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn vacuum_adjacent_state_rejected() {
        let bad = from_primitive(-1e-12, 0.0, 1.0);
        let good = from_primitive(1.0, 0.0, 1.0);
        assert!(llf_speed(&bad, &good, 1.0).is_err());
    }

    #[test]
    fn modified_sod_pair_speed() {
        let l = from_primitive(1.0, 0.75, 1.0);
        let r = from_primitive(0.125, 0.0, 0.1);
        let s = llf_speed(&l, &r, 1.0).unwrap();
        // left state dominates: 0.75 + sqrt(1.4)
        assert!((s - (0.75 + GAMMA.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn equal_states_return_input() {
        let u = from_primitive(0.7, -1.3, 2.1);
        for xi in [-10.0, -1.3, 0.0, 5.0] {
            let s = exact_riemann(&u, &u, xi).unwrap();
            for k in 0..3 {
                assert!((s[k] - u[k]).abs() < 1e-12, "xi={xi} k={k}");
            }
        }
    }

    #[test]
    fn classic_sod_star_pressure() {
        let l = from_primitive(1.0, 0.0, 1.0);
        let r = from_primitive(0.125, 0.0, 0.1);
        let (p_star, v_star) = star_state(&l, &r).unwrap();
        // frozen from the converged pressure-function root (matches the
        // commonly tabulated 0.30313 / 0.92745 to displayed precision)
        assert!((p_star - 0.30313).abs() < 5e-6, "p* = {p_star}");
        assert!((v_star - 0.92745).abs() < 5e-6, "v* = {v_star}");
    }

    #[test]
    fn rankine_hugoniot_across_sampled_shock() {
        // modified Sod: the right wave is a shock
        let l = from_primitive(1.0, 0.75, 1.0);
        let r = from_primitive(0.125, 0.0, 0.1);
        let (p_star, _) = star_state(&l, &r).unwrap();
        assert!(p_star > 0.1, "right wave must be a shock");
        let g = GAMMA;
        let rp = primitive_of(&r);
        let sr = rp.1 + rp.3 * ((g + 1.0) / (2.0 * g) * p_star / rp.2 + (g - 1.0) / (2.0 * g)).sqrt();
        let u_star = exact_riemann(&l, &r, sr - 1e-9).unwrap();
        let u_right = exact_riemann(&l, &r, sr + 1e-9).unwrap();
        let fl = flux_1d(&u_star);
        let fr = flux_1d(&u_right);
        for k in 0..3 {
            let jump = sr * (u_right[k] - u_star[k]) - (fr[k] - fl[k]);
            assert!(jump.abs() < 1e-8, "RH defect {jump} in component {k}");
        }
    }

    #[test]
    fn strong_collision_has_positive_star_pressure() {
        let l = from_primitive(1.0, 5.0, 1.0);
        let r = from_primitive(1.0, -5.0, 1.0);
        let (p_star, v_star) = star_state(&l, &r).unwrap();
        assert!(p_star > 1.0);
        assert!(v_star.abs() < 1e-12);
    }

    #[test]
    fn vacuum_formation_detected() {
        let l = from_primitive(1.0, -10.0, 0.01);
        let r = from_primitive(1.0, 10.0, 0.01);
        assert!(matches!(
            star_state(&l, &r),
            Err(SolverError::VacuumFormation)
        ));
    }

    fn primitive_of(u: &State) -> (f64, f64, f64, f64) {
        let p = pressure(u);
        (u[0], velocity(u), p, (GAMMA * p / u[0]).sqrt())
    }
}
