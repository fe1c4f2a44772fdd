//! Travelling-wave system of the constant-density Baer-Rinzel model under
//! small Stratonovich spatially correlated noise. The expansion turns the
//! mean dynamics into six coupled ODEs in the wave coordinate ξ = ct − x,
//! with drift corrections ∝ ν²F_c(0) on the cable voltage and the gates.
//! A bisection shooting solver finds the speed c of the homoclinic pulse
//! (approximated over a long finite ξ-interval).

use crate::br::{gate_steady, rates_h, rates_m, rates_n, Gate};
use crate::config::ModelConfig;
use crate::error::Error;
use crate::noise::correlation_fn;
use crate::Result;

/// Wave-frame state (V, Ŵ = V_ξ, U, m, n, h).
pub type TWState = [f64; 6];

/// Parameters of the wave-frame system.
#[derive(Debug, Clone, Copy)]
pub struct TWParams {
    /// Wave speed.
    pub c: f64,
    /// Noise intensities entering the drift corrections.
    pub nu_c: f64,
    pub nu_m: f64,
    pub nu_n: f64,
    pub nu_h: f64,
    /// Kernel value F_c(0) = 1/(2ζ).
    pub f_c0: f64,
    /// Constant spine density.
    pub rho: f64,
    /// Cable diffusion strength 1/(r_a·π·a).
    pub d_raw: f64,
    pub c_cable: f64,
    pub c_hat: f64,
    pub r: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub v_na: f64,
    pub v_k: f64,
    pub v_l: f64,
}

impl TWParams {
    /// Wave-frame parameters of a (constant-density) configuration.
    pub fn from_config(cfg: &ModelConfig, c: f64, nu_m: f64) -> TWParams {
        let nd = cfg.physical.to_nondim();
        TWParams {
            c,
            nu_c: 0.0,
            nu_m,
            nu_n: 0.0,
            nu_h: 0.0,
            f_c0: correlation_fn(0.0, cfg.noise.zeta),
            rho: cfg.rho_max,
            d_raw: 1.0 / (nd.r_a * std::f64::consts::PI * nd.a),
            c_cable: nd.c_m,
            c_hat: nd.c_hat,
            r: cfg.physical.r,
            g_na: cfg.physical.g_na,
            g_k: cfg.physical.g_k,
            g_l: cfg.physical.g_l,
            v_na: cfg.physical.v_na,
            v_k: cfg.physical.v_k,
            v_l: cfg.physical.v_l,
        }
    }
}

/// Gate drift correction polynomial X(1 − 3X + 2X²) = g(X)·g'(X).
#[inline]
pub fn gate_correction(x: f64) -> f64 {
    x * (1.0 - 3.0 * x + 2.0 * x * x)
}

/// Right-hand side of the six wave-frame ODEs.
pub fn tw_rhs(s: &TWState, p: &TWParams) -> TWState {
    let [v, w_hat, u, m, n, h] = *s;
    let n4 = n * n * n * n;
    let m3 = m * m * m;
    let head = p.g_k * n4 * (p.v_k - u) + p.g_na * h * m3 * (p.v_na - u)
        + p.g_l * (p.v_l - u)
        - (u - v) / p.r;
    let rm = rates_m(u);
    let rn = rates_n(u);
    let rh = rates_h(u);
    let corr = p.f_c0;
    [
        w_hat,
        (p.c_cable * p.c * w_hat + p.g_l * (v - p.v_l) - p.rho * (u - v) / p.r
            + p.nu_c * p.nu_c * corr * (65.0 + v))
            / p.d_raw,
        head / (p.c * p.c_hat),
        (rm.alpha * (1.0 - m) - rm.beta * m + p.nu_m * p.nu_m * corr * gate_correction(m)) / p.c,
        (rn.alpha * (1.0 - n) - rn.beta * n + p.nu_n * p.nu_n * corr * gate_correction(n)) / p.c,
        (rh.alpha * (1.0 - h) - rh.beta * h + p.nu_h * p.nu_h * corr * gate_correction(h)) / p.c,
    ]
}

/// Corrected fixed point of one gate at fixed voltage: the root of
/// α(1−X) − βX + ν²F_c(0)·X(1−3X+2X²) on [0,1].
fn corrected_gate(gate: Gate, u: f64, nu: f64, f_c0: f64) -> f64 {
    if nu == 0.0 {
        return gate_steady(gate, u);
    }
    let drift = |x: f64| {
        let r = crate::br::hh_rates(gate, u);
        r.alpha * (1.0 - x) - r.beta * x + nu * nu * f_c0 * gate_correction(x)
    };
    // drift(0) = α ≥ 0 and drift(1) = −β ≤ 0: bisection is safe.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if drift(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Equilibrium of the wave-frame system near the deterministic rest:
/// Ŵ = 0, gates at their (corrected) fixed points, and the cable/head
/// currents balanced by a 2×2 Newton iteration on (V, U).
pub fn rest_state(p: &TWParams) -> Result<TWState> {
    let gates = |u: f64| {
        (
            corrected_gate(Gate::M, u, p.nu_m, p.f_c0),
            corrected_gate(Gate::N, u, p.nu_n, p.f_c0),
            corrected_gate(Gate::H, u, p.nu_h, p.f_c0),
        )
    };
    let f = |v: f64, u: f64| {
        let (m, n, h) = gates(u);
        let n4 = n * n * n * n;
        let m3 = m * m * m;
        let f1 = p.g_l * (v - p.v_l) - p.rho * (u - v) / p.r + p.nu_c * p.nu_c * p.f_c0 * (65.0 + v);
        let f2 = p.g_k * n4 * (p.v_k - u) + p.g_na * h * m3 * (p.v_na - u)
            + p.g_l * (p.v_l - u)
            - (u - v) / p.r;
        (f1, f2)
    };
    let (mut v, mut u) = (-65.0, -65.0);
    for _ in 0..100 {
        let (f1, f2) = f(v, u);
        if f1.abs() < 1e-12 && f2.abs() < 1e-12 {
            break;
        }
        let eps = 1e-7;
        let (f1v, f2v) = f(v + eps, u);
        let (f1u, f2u) = f(v, u + eps);
        let j11 = (f1v - f1) / eps;
        let j12 = (f1u - f1) / eps;
        let j21 = (f2v - f2) / eps;
        let j22 = (f2u - f2) / eps;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return Err(Error::RootFind("singular Jacobian in wave-frame rest".into()));
        }
        v -= (f1 * j22 - f2 * j12) / det;
        u -= (f2 * j11 - f1 * j21) / det;
        if !v.is_finite() || !u.is_finite() {
            return Err(Error::RootFind("wave-frame rest left the finite domain".into()));
        }
    }
    let (f1, f2) = f(v, u);
    if f1.abs() > 1e-9 || f2.abs() > 1e-9 {
        return Err(Error::RootFind(format!(
            "wave-frame rest residuals {f1}, {f2}"
        )));
    }
    let (m, n, h) = gates(u);
    Ok([v, 0.0, u, m, n, h])
}

/// Componentwise scales for distances in the wave frame (mV for the
/// voltages, order-one for the gates).
const STATE_SCALE: TWState = [30.0, 60.0, 30.0, 0.3, 0.3, 0.3];

fn scaled_dist(a: &TWState, b: &TWState) -> f64 {
    let mut acc: f64 = 0.0;
    for i in 0..6 {
        let d = (a[i] - b[i]) / STATE_SCALE[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Adaptive Dormand-Prince RK5(4) step; returns (new state, error estimate).
fn dp45_step(s: &TWState, p: &TWParams, h: f64) -> (TWState, f64) {
    const A2: f64 = 1.0 / 5.0;
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ];
    const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    const B: [f64; 6] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ];
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let add = |s: &TWState, ks: &[(&TWState, f64)]| {
        let mut out = *s;
        for (k, w) in ks {
            for i in 0..6 {
                out[i] += h * w * k[i];
            }
        }
        out
    };
    let k1 = tw_rhs(s, p);
    let k2 = tw_rhs(&add(s, &[(&k1, A2)]), p);
    let k3 = tw_rhs(&add(s, &[(&k1, A3[0]), (&k2, A3[1])]), p);
    let k4 = tw_rhs(&add(s, &[(&k1, A4[0]), (&k2, A4[1]), (&k3, A4[2])]), p);
    let k5 = tw_rhs(
        &add(s, &[(&k1, A5[0]), (&k2, A5[1]), (&k3, A5[2]), (&k4, A5[3])]),
        p,
    );
    let k6 = tw_rhs(
        &add(
            s,
            &[
                (&k1, A6[0]),
                (&k2, A6[1]),
                (&k3, A6[2]),
                (&k4, A6[3]),
                (&k5, A6[4]),
            ],
        ),
        p,
    );
    let new = add(
        s,
        &[
            (&k1, B[0]),
            (&k3, B[2]),
            (&k4, B[3]),
            (&k5, B[4]),
            (&k6, B[5]),
        ],
    );
    let k7 = tw_rhs(&new, p);
    let mut err: f64 = 0.0;
    let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
    for i in 0..6 {
        let mut e = 0.0;
        for (k, w) in ks.iter().zip(E) {
            e += w * k[i];
        }
        err += (h * e / STATE_SCALE[i]).powi(2);
    }
    (new, err.sqrt())
}

/// Integrate the wave-frame system with adaptive steps, invoking the
/// monitor after every accepted step. The monitor can stop integration.
fn integrate<F: FnMut(f64, &TWState) -> bool>(
    s0: TWState,
    p: &TWParams,
    xi_end: f64,
    tol: f64,
    mut monitor: F,
) -> TWState {
    let mut s = s0;
    let mut xi = 0.0;
    let mut h: f64 = 1e-3;
    while xi < xi_end {
        h = h.min(xi_end - xi);
        let (new, err) = dp45_step(&s, p, h);
        if err <= tol || h < 1e-12 {
            xi += h;
            s = new;
            if !monitor(xi, &s) {
                break;
            }
            let grow = if err > 0.0 {
                0.9 * (tol / err).powf(0.2)
            } else {
                2.0
            };
            h *= grow.clamp(0.2, 2.0);
        } else {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.9);
        }
        h = h.min(0.5);
    }
    s
}

/// Outcome of one shot at a trial speed.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// Trajectory collapsed below rest after the pulse.
    Under,
    /// Trajectory re-excited or ran away above rest.
    Over,
    /// Stayed within the watch region for the whole interval.
    Lingering,
}

struct ShotOutcome {
    class: Shot,
    /// Closest scaled approach to rest after the pulse excursion.
    min_dist: f64,
}

/// Length of the ξ-interval over which the homoclinic orbit is
/// approximated (a large periodic orbit stands in for the pulse).
pub const XI_SPAN: f64 = 100.0;

/// Scaled distance to rest below which the far-end boundary condition is
/// considered met.
pub const REST_TOL: f64 = 1e-4;

fn launch_direction(rest: &TWState, p: &TWParams) -> Result<TWState> {
    // Power iteration on the flow map: repeatedly advance a small
    // perturbation and renormalize. Converges onto the dominant unstable
    // direction of the rest point when one exists.
    let delta = 1e-7;
    let mut dir: TWState = [1.0, 1.0, 1.0, 0.01, 0.01, 0.01];
    let norm = |v: &TWState| -> f64 {
        (0..6).map(|i| (v[i] / STATE_SCALE[i]).powi(2)).sum::<f64>().sqrt()
    };
    let n0 = norm(&dir);
    for i in 0..6 {
        dir[i] /= n0;
    }
    let mut growth = 0.0;
    for _ in 0..60 {
        let mut s = *rest;
        for i in 0..6 {
            s[i] += delta * dir[i] * STATE_SCALE[i];
        }
        let out = integrate(s, p, 0.5, 1e-12, |_, _| true);
        let mut diff = [0.0; 6];
        for i in 0..6 {
            diff[i] = out[i] - rest[i];
        }
        growth = norm(&diff) / delta;
        let n = norm(&diff);
        if n == 0.0 {
            return Err(Error::NoWave("perturbation vanished at the rest state".into()));
        }
        for i in 0..6 {
            dir[i] = diff[i] / n;
        }
    }
    if growth <= 1.0 {
        return Err(Error::NoWave(format!(
            "rest state has no unstable direction (growth {growth})"
        )));
    }
    // Orient along the depolarizing front: rising V.
    if dir[1] < 0.0 || (dir[1] == 0.0 && dir[0] < 0.0) {
        for d in &mut dir {
            *d = -*d;
        }
    }
    Ok(dir)
}

fn shoot_once(p: &TWParams, rest: &TWState, dir: &TWState, tol: f64) -> ShotOutcome {
    let delta = 1e-5;
    let mut s0 = *rest;
    for i in 0..6 {
        s0[i] += delta * dir[i] * STATE_SCALE[i];
    }
    let mut class = Shot::Lingering;
    let mut spiked = false;
    let mut min_dist = f64::INFINITY;
    let v_rest = rest[0];
    integrate(s0, p, XI_SPAN, tol, |_, s| {
        let v = s[0];
        if !v.is_finite() {
            class = if v.is_sign_negative() { Shot::Under } else { Shot::Over };
            return false;
        }
        if v > v_rest + 30.0 {
            if spiked && min_dist < 0.5 {
                // Re-excitation after having returned near rest.
                class = Shot::Over;
                return false;
            }
            spiked = true;
        }
        if spiked {
            let d = scaled_dist(s, rest);
            if d < min_dist {
                min_dist = d;
            }
        }
        if v < v_rest - 15.0 {
            class = Shot::Under;
            return false;
        }
        if v > v_rest + 500.0 {
            class = Shot::Over;
            return false;
        }
        true
    });
    ShotOutcome { class, min_dist }
}

/// Result of a shooting solve.
#[derive(Debug, Clone, Copy)]
pub struct ShootResult {
    pub c: f64,
    /// Whether the trajectory returned to within [`REST_TOL`] of rest.
    pub converged: bool,
    /// Closest scaled approach to rest at the returned speed.
    pub min_dist: f64,
}

/// Find the pulse speed by bisection on the trial speed: the fast branch
/// is bracketed around `c_guess` (the deterministic speed for ν = 0) and
/// the shot classification (collapse vs re-excitation) drives the search.
pub fn shoot_speed(p_base: &TWParams, nu_m: f64, c_guess: f64, tol: f64) -> Result<ShootResult> {
    let mut p = *p_base;
    p.nu_m = nu_m;
    let classify = |c: f64| -> Result<ShotOutcome> {
        let mut pc = p;
        pc.c = c;
        let rest = rest_state(&pc)?;
        let dir = launch_direction(&rest, &pc)?;
        Ok(shoot_once(&pc, &rest, &dir, tol))
    };

    // Scan outward from the guess for a classification change.
    let multipliers = [
        1.0, 0.9, 1.1, 0.8, 1.25, 0.7, 1.45, 0.6, 1.7, 0.5, 2.0, 0.42, 2.4, 0.35, 2.9,
    ];
    let mut seen: Vec<(f64, Shot)> = Vec::new();
    for mult in multipliers {
        let c = c_guess * mult;
        let out = classify(c)?;
        if out.class != Shot::Lingering {
            seen.push((c, out.class));
        }
        let mut bracket: Option<(f64, f64)> = None;
        for (ca, cla) in &seen {
            for (cb, clb) in &seen {
                if cla != clb && ca < cb {
                    let width = cb - ca;
                    match bracket {
                        Some((lo, hi)) if hi - lo <= width => {}
                        _ => bracket = Some((*ca, *cb)),
                    }
                }
            }
        }
        if let Some((mut lo, mut hi)) = bracket {
            // Found speeds with opposite outcomes: bisect between them.
            let lo_class = classify(lo)?.class;
            let mut best = ShootResult {
                c: 0.5 * (lo + hi),
                converged: false,
                min_dist: f64::INFINITY,
            };
            for _ in 0..70 {
                let mid = 0.5 * (lo + hi);
                let out = classify(mid)?;
                if out.min_dist < best.min_dist {
                    best = ShootResult {
                        c: mid,
                        converged: out.min_dist < REST_TOL,
                        min_dist: out.min_dist,
                    };
                }
                let side = if out.class == Shot::Lingering {
                    // Treat an undecided shot by its closest approach side.
                    lo_class
                } else {
                    out.class
                };
                if side == lo_class {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 * c_guess.abs().max(1.0) {
                    break;
                }
            }
            return Ok(best);
        }
    }
    Err(Error::NoWave(format!(
        "no classification change around c = {c_guess} (nu_m = {nu_m})"
    )))
}
