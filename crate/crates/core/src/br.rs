//! Baer-Rinzel model: a passive cable coupled through a spine density
//! ρ(x) to Hodgkin-Huxley spine heads. The density is either the constant
//! of the original continuum model (κ = 0) or a sum of windowed Gaussians
//! of width 1/√κ around the spine centres, which interpolates towards
//! discrete attachments as κ grows. Noise can drive the cable voltage or
//! the sodium-activation (m) dynamics.

use crate::cable;
use crate::config::{ModelConfig, ModelKind};
use crate::error::Error;
use crate::integrators::{self, Scratch, SdeSystem};
use crate::noise::{NoiseSource, NoiseTarget};
use crate::sim::{FieldSnapshot, FireEvent, Observer, RunRecord, StationTraces};
use crate::Result;

/// Sites with a density below this are treated as spine-free: their head
/// variables are frozen and receive no noise.
pub const RHO_ACTIVE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    M,
    N,
    H,
}

/// Voltage-dependent opening/closing rates of one gate (1/ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HHRates {
    pub alpha: f64,
    pub beta: f64,
}

#[inline]
fn vtrap(x: f64, scale: f64) -> f64 {
    // x / (1 − exp(−x/scale)) with the removable singularity at x = 0.
    if x.abs() < 1e-7 {
        scale / (1.0 - x / (2.0 * scale))
    } else {
        x / (1.0 - (-x / scale).exp())
    }
}

#[inline]
pub fn rates_m(u: f64) -> HHRates {
    HHRates {
        alpha: 0.1 * vtrap(u + 40.0, 10.0),
        beta: 4.0 * (-(u + 65.0) / 18.0).exp(),
    }
}

#[inline]
pub fn rates_h(u: f64) -> HHRates {
    HHRates {
        alpha: 0.07 * (-(u + 65.0) / 20.0).exp(),
        beta: 1.0 / (1.0 + (-(u + 35.0) / 10.0).exp()),
    }
}

#[inline]
pub fn rates_n(u: f64) -> HHRates {
    HHRates {
        alpha: 0.01 * vtrap(u + 55.0, 10.0),
        beta: 0.125 * (-(u + 65.0) / 80.0).exp(),
    }
}

/// Standard squid-axon rate functions (rest at −65 mV), matching the
/// 50 / −77 / −54.402 mV reversal potentials of the parameter table.
pub fn hh_rates(gate: Gate, u: f64) -> HHRates {
    match gate {
        Gate::M => rates_m(u),
        Gate::N => rates_n(u),
        Gate::H => rates_h(u),
    }
}

/// Steady state X∞ = α/(α+β) of a gate at fixed voltage.
pub fn gate_steady(gate: Gate, u: f64) -> f64 {
    let r = hh_rates(gate, u);
    r.alpha / (r.alpha + r.beta)
}

/// Multiplicative noise shape on the cable, zero at the −65 mV rest.
pub fn g_c(v: f64) -> f64 {
    -(65.0 + v)
}

/// Multiplicative noise shape on the m-gate, zero outside [0,1].
pub fn g_m(m: f64) -> f64 {
    if (0.0..=1.0).contains(&m) {
        m * (1.0 - m)
    } else {
        0.0
    }
}

/// Space-dependent spine density sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpineDensity {
    pub kappa: f64,
    pub rho_max: f64,
    pub d_spacing: f64,
    pub values: Vec<f64>,
}

/// ρ(x) = Σ_n ρ_max ξ_n exp(−κ(x−x_n)²) with ξ_n windowing each point to
/// its nearest spine centre. κ = 0 recovers the constant continuum
/// density; large κ concentrates it at the centres.
pub fn spine_density(
    x: &[f64],
    kappa: f64,
    rho_max: f64,
    d_spacing: f64,
    centers: &[f64],
) -> SpineDensity {
    assert!(!centers.is_empty(), "need at least one spine centre");
    let values = x
        .iter()
        .map(|&xi| {
            let n = ((xi / d_spacing - 0.5).round().max(0.0) as usize).min(centers.len() - 1);
            let dxc = xi - centers[n];
            rho_max * (-kappa * dxc * dxc).exp()
        })
        .collect();
    SpineDensity {
        kappa,
        rho_max,
        d_spacing,
        values,
    }
}

/// Add a Gaussian voltage bump to the cable (wave-launch stimulus).
pub fn stimulate(v: &mut [f64], x: &[f64], amp: f64, width: f64, center: f64) {
    if amp == 0.0 {
        return;
    }
    for (vi, &xi) in v.iter_mut().zip(x) {
        let s = (xi - center) / width;
        *vi += amp * (-s * s).exp();
    }
}

struct BrParams {
    grid_n: usize,
    dx: f64,
    /// Cable diffusion 1/(r_a·π·a), before dividing by C.
    d_raw: f64,
    c: f64,
    c_hat: f64,
    r: f64,
    g_na: f64,
    g_k: f64,
    g_l: f64,
    v_na: f64,
    v_k: f64,
    v_l: f64,
    rho: Vec<f64>,
    active: Vec<bool>,
    mu: f64,
    nu: f64,
    target: NoiseTarget,
}

impl BrParams {
    fn from_config(cfg: &ModelConfig) -> BrParams {
        let nd = cfg.physical.to_nondim();
        let grid_x: Vec<f64> = (0..cfg.disc.grid_n)
            .map(|i| i as f64 * cfg.disc.dx)
            .collect();
        let density = spine_density(
            &grid_x,
            cfg.kappa,
            cfg.rho_max,
            cfg.physical.d_spacing,
            &cfg.spine_positions(),
        );
        let active = density
            .values
            .iter()
            .map(|&rho| rho > RHO_ACTIVE_THRESHOLD)
            .collect();
        BrParams {
            grid_n: cfg.disc.grid_n,
            dx: cfg.disc.dx,
            d_raw: 1.0 / (nd.r_a * std::f64::consts::PI * nd.a),
            c: nd.c_m,
            c_hat: nd.c_hat,
            r: cfg.physical.r,
            g_na: cfg.physical.g_na,
            g_k: cfg.physical.g_k,
            g_l: cfg.physical.g_l,
            v_na: cfg.physical.v_na,
            v_k: cfg.physical.v_k,
            v_l: cfg.physical.v_l,
            rho: density.values,
            active,
            mu: cfg.noise.mu,
            nu: cfg.noise.nu,
            target: cfg.noise.target,
        }
    }

    /// Ionic + stem current of a spine head (the right side of Ĉ dU/dt).
    fn head_current(&self, u: f64, v: f64, m: f64, n: f64, h: f64) -> f64 {
        let n4 = n * n * n * n;
        let m3 = m * m * m;
        self.g_k * n4 * (self.v_k - u) + self.g_na * h * m3 * (self.v_na - u)
            + self.g_l * (self.v_l - u)
            - (u - v) / self.r
    }

    /// Uniform rest (V, U) for a given density value: cable and head
    /// currents both vanish with gates at steady state. 2x2 Newton with
    /// finite-difference Jacobian.
    fn rest_point(&self, rho: f64) -> Result<(f64, f64)> {
        let f = |v: f64, u: f64| {
            let m = gate_steady(Gate::M, u);
            let n = gate_steady(Gate::N, u);
            let h = gate_steady(Gate::H, u);
            let f1 = -self.g_l * (v - self.v_l) + rho * (u - v) / self.r;
            let f2 = self.head_current(u, v, m, n, h);
            (f1, f2)
        };
        let (mut v, mut u) = (-65.0, -65.0);
        for _ in 0..100 {
            let (f1, f2) = f(v, u);
            if f1.abs() < 1e-12 && f2.abs() < 1e-12 {
                return Ok((v, u));
            }
            let eps = 1e-6;
            let (f1v, f2v) = f(v + eps, u);
            let (f1u, f2u) = f(v, u + eps);
            let j11 = (f1v - f1) / eps;
            let j12 = (f1u - f1) / eps;
            let j21 = (f2v - f2) / eps;
            let j22 = (f2u - f2) / eps;
            let det = j11 * j22 - j12 * j21;
            if det.abs() < 1e-300 {
                return Err(Error::RootFind("singular Jacobian in rest solve".into()));
            }
            let dv = (f1 * j22 - f2 * j12) / det;
            let du = (f2 * j11 - f1 * j21) / det;
            v -= dv;
            u -= du;
            if !v.is_finite() || !u.is_finite() {
                return Err(Error::RootFind("rest solve left the finite domain".into()));
            }
        }
        let (f1, f2) = f(v, u);
        if f1.abs() < 1e-9 && f2.abs() < 1e-9 {
            Ok((v, u))
        } else {
            Err(Error::RootFind(format!(
                "rest residuals did not vanish: {f1}, {f2}"
            )))
        }
    }
}

/// Drift/diffusion over the flat state [V, U, m, n, h], each of grid
/// length. Head variables at spine-free nodes are frozen.
struct BrSystem<'a> {
    p: &'a BrParams,
}

impl SdeSystem for BrSystem<'_> {
    fn dim(&self) -> usize {
        5 * self.p.grid_n
    }

    fn drift(&self, _t: f64, s: &[f64], out: &mut [f64]) {
        let p = self.p;
        let g = p.grid_n;
        let (v, tail) = s.split_at(g);
        let (u, tail) = tail.split_at(g);
        let (m, tail) = tail.split_at(g);
        let (n, h) = tail.split_at(g);

        let (dv, dtail) = out.split_at_mut(g);
        let (du, dtail) = dtail.split_at_mut(g);
        let (dm, dtail) = dtail.split_at_mut(g);
        let (dn, dh) = dtail.split_at_mut(g);

        cable::laplacian_into(v, p.d_raw / p.c, p.dx, dv);
        let inv_c = 1.0 / p.c;
        let inv_chat = 1.0 / p.c_hat;
        for i in 0..g {
            dv[i] += inv_c * (-p.g_l * (v[i] - p.v_l) + p.rho[i] * (u[i] - v[i]) / p.r);
            if p.active[i] {
                du[i] = inv_chat * p.head_current(u[i], v[i], m[i], n[i], h[i]);
                let rm = rates_m(u[i]);
                let rn = rates_n(u[i]);
                let rh = rates_h(u[i]);
                dm[i] = rm.alpha * (1.0 - m[i]) - rm.beta * m[i];
                dn[i] = rn.alpha * (1.0 - n[i]) - rn.beta * n[i];
                dh[i] = rh.alpha * (1.0 - h[i]) - rh.beta * h[i];
            } else {
                du[i] = 0.0;
                dm[i] = 0.0;
                dn[i] = 0.0;
                dh[i] = 0.0;
            }
        }
    }

    fn diffusion(&self, _t: f64, s: &[f64], out: &mut [f64]) {
        let p = self.p;
        let g = p.grid_n;
        out.fill(0.0);
        match p.target {
            NoiseTarget::Cable => {
                let inv_c = 1.0 / p.c;
                for i in 0..g {
                    out[i] = inv_c * (p.mu + p.nu * g_c(s[i]));
                }
            }
            NoiseTarget::Spines => {
                // Noise enters only the m-dynamics; the other gates are
                // too sensitive to drive directly.
                let m_off = 2 * g;
                for i in 0..g {
                    if p.active[i] {
                        out[m_off + i] = p.mu + p.nu * g_m(s[m_off + i]);
                    }
                }
            }
        }
    }
}

/// Run one Baer-Rinzel realization: relax to rest (with a settling phase
/// when the density makes the rest state non-uniform), stimulate the
/// distal end at t = 0, then integrate with the configured noise.
pub fn run_realization(
    cfg: &ModelConfig,
    realization: u64,
    mut observer: Option<Observer<'_>>,
) -> Result<RunRecord> {
    if cfg.model != ModelKind::Br {
        return Err(Error::Validation {
            field: "model",
            msg: "Baer-Rinzel runner called with another model".into(),
        });
    }
    let p = BrParams::from_config(cfg);
    let g = p.grid_n;
    let dim = 5 * g;
    let dt = cfg.disc.dt;
    let n_steps = (cfg.disc.t_final / dt).ceil() as usize;
    let grid_x: Vec<f64> = (0..g).map(|i| i as f64 * p.dx).collect();

    // Per-node rest from the local density, gates at steady state.
    let mut state = vec![0.0; dim];
    {
        let (head, tail) = state.split_at_mut(2 * g);
        let (v, u) = head.split_at_mut(g);
        let (m, tail) = tail.split_at_mut(g);
        let (n, h) = tail.split_at_mut(g);
        for i in 0..g {
            let (vi, ui) = p.rest_point(p.rho[i])?;
            v[i] = vi;
            u[i] = ui;
            m[i] = gate_steady(Gate::M, ui);
            n[i] = gate_steady(Gate::N, ui);
            h[i] = gate_steady(Gate::H, ui);
        }
    }

    let mut scratch = Scratch::for_dim(dim);
    let sys_holder = BrSystem { p: &p };

    // Settling phase: the local rest ignores the Laplacian, which matters
    // once the density varies in space.
    if cfg.kappa > 0.0 && cfg.settle_time > 0.0 {
        let settle_steps = (cfg.settle_time / dt).ceil() as usize;
        for k in 0..settle_steps {
            integrators::euler_step(&sys_holder, k as f64 * dt, &mut state, dt, &mut scratch);
        }
    }

    // The bump goes on the cable and the co-located spine heads: the
    // cable alone cannot ignite the heads, since the stem time constant
    // far exceeds the lifetime of a cable transient against the ρ/r sink.
    {
        let (v, rest) = state.split_at_mut(g);
        stimulate(v, &grid_x, cfg.stim.amp, cfg.stim.width, cfg.stim.center);
        stimulate(
            &mut rest[0..g],
            &grid_x,
            cfg.stim.amp,
            cfg.stim.width,
            cfg.stim.center,
        );
    }

    let noise_on = !cfg.noise.is_off();
    let (mut source, target_off) = if noise_on {
        let rng = crate::sim::realization_rng(cfg.noise.seed, realization);
        match p.target {
            NoiseTarget::Cable => (
                Some(NoiseSource::new(
                    &cfg.noise,
                    &grid_x,
                    1.0 / p.dx,
                    cfg.physical.l,
                    rng,
                )),
                0,
            ),
            NoiseTarget::Spines => (
                Some(NoiseSource::new(&cfg.noise, &grid_x, 1.0, cfg.physical.l, rng)),
                2 * g,
            ),
        }
    } else {
        (None, 0)
    };
    let mut dw = vec![0.0; dim];

    let (x1, x2) = cfg.stations();
    let (i1, i2) = (cfg.node_at(x1), cfg.node_at(x2));
    let mut traces = StationTraces {
        dt,
        x1: grid_x[i1],
        x2: grid_x[i2],
        v1: Vec::with_capacity(n_steps + 1),
        v2: Vec::with_capacity(n_steps + 1),
    };

    let spine_x = cfg.spine_positions();
    let spine_nodes = cfg.spine_nodes();
    let mut fired = vec![false; spine_nodes.len()];
    let mut fire_log: Vec<FireEvent> = Vec::new();

    let emit = |t: f64, state: &[f64], observer: &mut Option<Observer<'_>>| {
        if let Some(obs) = observer.as_mut() {
            let (v, tail) = state.split_at(g);
            let (u, tail) = tail.split_at(g);
            let (m, tail) = tail.split_at(g);
            let (n, h) = tail.split_at(g);
            obs(
                t,
                &FieldSnapshot {
                    x: &grid_x,
                    v,
                    u: Some(u),
                    gates: Some((m, n, h)),
                },
            );
        }
    };

    traces.v1.push(state[i1]);
    traces.v2.push(state[i2]);
    emit(0.0, &state, &mut observer);

    let mut diverged = false;
    let mut t_end = 0.0;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        if let Some(src) = source.as_mut() {
            src.fill_increment(dt, &mut dw[target_off..target_off + g]);
            match cfg.noise.interpretation {
                crate::noise::Interpretation::Ito => {
                    integrators::em_step(&sys_holder, t, &mut state, &dw, dt, &mut scratch)?
                }
                crate::noise::Interpretation::Stratonovich => {
                    integrators::heun_step(&sys_holder, t, &mut state, &dw, dt, &mut scratch)?
                }
            }
        } else {
            integrators::euler_step(&sys_holder, t, &mut state, dt, &mut scratch);
        }
        let t_new = (k + 1) as f64 * dt;

        // Gates stay in [0,1] by clamping after the stochastic update.
        for x in &mut state[2 * g..] {
            *x = x.clamp(0.0, 1.0);
        }

        for (sp, &node) in spine_nodes.iter().enumerate() {
            if !fired[sp] && state[g + node] >= cfg.fire_level {
                fired[sp] = true;
                fire_log.push(FireEvent { spine: sp, t: t_new });
            }
        }

        if !state.iter().all(|x| x.is_finite()) {
            diverged = true;
            t_end = t_new;
            break;
        }

        traces.v1.push(state[i1]);
        traces.v2.push(state[i2]);
        emit(t_new, &state, &mut observer);
        t_end = t_new;
    }

    Ok(RunRecord {
        traces,
        fire_log,
        spine_x,
        diverged,
        t_end,
    })
}
