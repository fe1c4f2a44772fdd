//! Spike-diffuse-spike model: a passive cable coupled at discrete points
//! to leaky integrate-and-fire spine heads. A spine that reaches threshold
//! (outside its refractory window) injects a rectangular voltage pulse
//! into the cable, which diffuses and recruits the next spine — the wave
//! is saltatory.

use crate::cable;
use crate::config::{ModelConfig, ModelKind, ResetMode};
use crate::error::Error;
use crate::integrators::{self, Scratch, SdeSystem};
use crate::noise::{NoiseSource, NoiseTarget};
use crate::sim::{FieldSnapshot, FireEvent, Observer, RunRecord, StationTraces};
use crate::Result;

/// Multiplicative noise shape g(U) = U(1−U) on [0,1], zero otherwise;
/// keeps the driven voltage inside its nondimensional range.
pub fn g_if(u: f64) -> f64 {
    if (0.0..=1.0).contains(&u) {
        u * (1.0 - u)
    } else {
        0.0
    }
}

/// Sub-threshold spine drift dU/dt = V/(Ĉr) − εU. Threshold, reset and
/// refractoriness are event logic, not drift.
pub fn if_drift(u_n: f64, v_at_spine: f64, c_hat: f64, r: f64, epsilon: f64) -> f64 {
    v_at_spine / (c_hat * r) - epsilon * u_n
}

/// Rectangular action potential: η₀ while 0 ≤ t − T ≤ τ_s for any recent
/// firing time T. Overlapping pulses from one spine do not stack; the
/// injected potential saturates at η₀.
pub fn pulse_value(t: f64, fire_times: &[f64], eta_0: f64, tau_s: f64) -> f64 {
    let active = fire_times
        .iter()
        .any(|&ft| t >= ft && t - ft <= tau_s);
    if active {
        eta_0
    } else {
        0.0
    }
}

/// Integrate-and-fire spine-head state.
#[derive(Debug, Clone)]
pub struct IFSpines {
    pub u: Vec<f64>,
    pub last_fire: Vec<Option<f64>>,
    pub fire_log: Vec<FireEvent>,
}

impl IFSpines {
    pub fn resting(n: usize) -> Self {
        IFSpines {
            u: vec![0.0; n],
            last_fire: vec![None; n],
            fire_log: Vec::new(),
        }
    }

    fn fire(&mut self, spine: usize, t: f64, h: f64, reset: ResetMode) {
        self.u[spine] = match reset {
            ResetMode::SubtractThreshold => (self.u[spine] - h).max(0.0),
            ResetMode::ToZero => 0.0,
        };
        self.last_fire[spine] = Some(t);
        self.fire_log.push(FireEvent { spine, t });
    }
}

/// Firing times still young enough to inject a pulse; pruned each step.
#[derive(Debug, Clone)]
pub struct PulseTrain {
    active: Vec<Vec<f64>>,
}

impl PulseTrain {
    pub fn new(n: usize) -> Self {
        PulseTrain {
            active: vec![Vec::new(); n],
        }
    }

    pub fn push(&mut self, spine: usize, t: f64) {
        self.active[spine].push(t);
    }

    pub fn prune(&mut self, t: f64, tau_s: f64) {
        for list in &mut self.active {
            list.retain(|&ft| t - ft <= tau_s);
        }
    }

    pub fn value(&self, spine: usize, t: f64, eta_0: f64, tau_s: f64) -> f64 {
        pulse_value(t, &self.active[spine], eta_0, tau_s)
    }
}

/// Fire every spine at or above threshold whose refractory window has
/// passed; returns the indices that fired, already reset and logged.
pub fn fire_check(
    spines: &mut IFSpines,
    t: f64,
    h: f64,
    tau_r: f64,
    reset: ResetMode,
) -> Vec<usize> {
    let mut fired = Vec::new();
    for n in 0..spines.u.len() {
        if spines.u[n] >= h {
            let ready = match spines.last_fire[n] {
                None => true,
                Some(prev) => t - prev >= tau_r,
            };
            if ready {
                spines.fire(n, t, h, reset);
                fired.push(n);
            }
        }
    }
    fired
}

struct SdsParams {
    grid_n: usize,
    n_spines: usize,
    dx: f64,
    d_diff: f64,
    tau: f64,
    r_a: f64,
    r: f64,
    c_hat: f64,
    epsilon: f64,
    eta_0: f64,
    tau_s: f64,
    tau_r: f64,
    h: f64,
    mu: f64,
    nu: f64,
    target: NoiseTarget,
    spine_nodes: Vec<usize>,
}

impl SdsParams {
    fn from_config(cfg: &ModelConfig) -> SdsParams {
        let nd = cfg.physical.to_nondim();
        SdsParams {
            grid_n: cfg.disc.grid_n,
            n_spines: cfg.physical.n_spines,
            dx: cfg.disc.dx,
            d_diff: cfg.derived.d_diff,
            tau: cfg.derived.tau_m,
            r_a: nd.r_a,
            r: cfg.physical.r,
            c_hat: nd.c_hat,
            epsilon: cfg.derived.epsilon,
            eta_0: cfg.physical.eta_0,
            tau_s: cfg.physical.tau_s,
            tau_r: cfg.physical.tau_r,
            h: cfg.physical.h_thresh,
            mu: cfg.noise.mu,
            nu: cfg.noise.nu,
            target: cfg.noise.target,
            spine_nodes: cfg.spine_nodes(),
        }
    }
}

/// Drift/diffusion view of the coupled system over the flat state
/// [V(grid), U(spines)]. Pulse times are frozen for the duration of one
/// scheme step; events are applied afterwards.
struct SdsSystem<'a> {
    p: &'a SdsParams,
    pulses: &'a PulseTrain,
}

impl SdeSystem for SdsSystem<'_> {
    fn dim(&self) -> usize {
        self.p.grid_n + self.p.n_spines
    }

    fn drift(&self, t: f64, s: &[f64], out: &mut [f64]) {
        let p = self.p;
        let (v, u) = s.split_at(p.grid_n);
        let (dv, du) = out.split_at_mut(p.grid_n);
        cable::laplacian_into(v, p.d_diff, p.dx, dv);
        let inv_tau = 1.0 / p.tau;
        for (dvi, vi) in dv.iter_mut().zip(v) {
            *dvi -= vi * inv_tau;
        }
        let couple = p.d_diff * p.r_a / (p.r * p.dx);
        for (n, &node) in p.spine_nodes.iter().enumerate() {
            let v_hat = self.pulses.value(n, t, p.eta_0, p.tau_s);
            dv[node] += couple * (v_hat - v[node]);
            du[n] = if_drift(u[n], v[node], p.c_hat, p.r, p.epsilon);
        }
    }

    fn diffusion(&self, _t: f64, s: &[f64], out: &mut [f64]) {
        let p = self.p;
        out.fill(0.0);
        match p.target {
            NoiseTarget::Cable => {
                for i in 0..p.grid_n {
                    out[i] = p.mu + p.nu * g_if(s[i]);
                }
            }
            NoiseTarget::Spines => {
                for (n, &node) in p.spine_nodes.iter().enumerate() {
                    let _ = node;
                    let i = p.grid_n + n;
                    out[i] = p.mu + p.nu * g_if(s[i]);
                }
            }
        }
    }
}

/// Run one spike-diffuse-spike realization.
pub fn run_realization(
    cfg: &ModelConfig,
    realization: u64,
    mut observer: Option<Observer<'_>>,
) -> Result<RunRecord> {
    if cfg.model != ModelKind::Sds {
        return Err(Error::Validation {
            field: "model",
            msg: "spike-diffuse-spike runner called with another model".into(),
        });
    }
    let p = SdsParams::from_config(cfg);
    let dt = cfg.disc.dt;
    let n_steps = (cfg.disc.t_final / dt).ceil() as usize;
    let dim = p.grid_n + p.n_spines;

    let mut state = vec![0.0; dim];
    let mut spines = IFSpines::resting(p.n_spines);
    let mut pulses = PulseTrain::new(p.n_spines);

    let spine_x = cfg.spine_positions();
    let grid_x: Vec<f64> = (0..p.grid_n).map(|i| i as f64 * p.dx).collect();

    let noise_on = !cfg.noise.is_off();
    let (mut source, target_range) = if noise_on {
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
                0..p.grid_n,
            ),
            NoiseTarget::Spines => (
                Some(NoiseSource::new(&cfg.noise, &spine_x, 1.0, cfg.physical.l, rng)),
                p.grid_n..dim,
            ),
        }
    } else {
        (None, 0..0)
    };
    let mut dw = vec![0.0; dim];
    let mut scratch = Scratch::for_dim(dim);

    let (x1, x2) = cfg.stations();
    let (i1, i2) = (cfg.node_at(x1), cfg.node_at(x2));
    let mut traces = StationTraces {
        dt,
        x1: grid_x[i1],
        x2: grid_x[i2],
        v1: Vec::with_capacity(n_steps + 1),
        v2: Vec::with_capacity(n_steps + 1),
    };

    // Wave launch: force-fire the first (distal) spine at t = 0.
    if cfg.force_fire_first {
        spines.fire(0, 0.0, p.h, cfg.reset);
        pulses.push(0, 0.0);
    }

    traces.v1.push(state[i1]);
    traces.v2.push(state[i2]);
    if let Some(obs) = observer.as_mut() {
        let (v, u) = state.split_at(p.grid_n);
        obs(
            0.0,
            &FieldSnapshot {
                x: &grid_x,
                v,
                u: Some(u),
                gates: None,
            },
        );
    }

    let mut diverged = false;
    let mut t_end = 0.0;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        {
            let sys = SdsSystem {
                p: &p,
                pulses: &pulses,
            };
            if let Some(src) = source.as_mut() {
                src.fill_increment(dt, &mut dw[target_range.clone()]);
                match cfg.noise.interpretation {
                    crate::noise::Interpretation::Ito => {
                        integrators::em_step(&sys, t, &mut state, &dw, dt, &mut scratch)?
                    }
                    crate::noise::Interpretation::Stratonovich => {
                        integrators::heun_step(&sys, t, &mut state, &dw, dt, &mut scratch)?
                    }
                }
            } else {
                integrators::euler_step(&sys, t, &mut state, dt, &mut scratch);
            }
        }
        let t_new = (k + 1) as f64 * dt;

        // Events after the continuous update: clamp, then threshold logic.
        for n in 0..p.n_spines {
            let i = p.grid_n + n;
            spines.u[n] = state[i].clamp(0.0, 1.0);
        }
        for n in fire_check(&mut spines, t_new, p.h, p.tau_r, cfg.reset) {
            pulses.push(n, t_new);
        }
        pulses.prune(t_new, p.tau_s);
        for n in 0..p.n_spines {
            state[p.grid_n + n] = spines.u[n];
        }

        if !state.iter().all(|x| x.is_finite()) {
            diverged = true;
            t_end = t_new;
            break;
        }

        traces.v1.push(state[i1]);
        traces.v2.push(state[i2]);
        if let Some(obs) = observer.as_mut() {
            let (v, u) = state.split_at(p.grid_n);
            obs(
                t_new,
                &FieldSnapshot {
                    x: &grid_x,
                    v,
                    u: Some(u),
                    gates: None,
                },
            );
        }
        t_end = t_new;
    }

    Ok(RunRecord {
        traces,
        fire_log: spines.fire_log,
        spine_x,
        diverged,
        t_end,
    })
}
