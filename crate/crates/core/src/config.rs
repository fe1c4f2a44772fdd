//! Model parameters, nondimensionalization and experiment-file loading.
//!
//! Experiment files are plain `key = value` text (one pair per line, `#`
//! comments). Dimensional parameters are given in the units noted on each
//! field and are rescaled once at load time; the simulation state is always
//! nondimensional. Unset keys fall back to the defaults below.

use crate::error::Error;
use crate::noise::{Interpretation, NoiseConfig, NoiseKind, NoiseTarget};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Reference values that define the nondimensional scale of each
/// dimensional parameter: a field equal to its reference maps to 1.
pub mod reference {
    /// Transmembrane resistance (Ω·cm²).
    pub const R_M: f64 = 2500.0;
    /// Intracellular resistance (Ω·cm).
    pub const R_A: f64 = 70.0;
    /// Transmembrane capacitance (µF/cm²).
    pub const C_M: f64 = 1.0;
    /// Spine-head capacitance (µF/cm²).
    pub const C_HAT: f64 = 1.0;
    /// Spine-head membrane resistance (Ω·cm²).
    pub const R_HAT: f64 = 2500.0;
    /// Dendritic diameter (µm).
    pub const A: f64 = 0.36;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sds,
    Br,
}

/// How a spine voltage is reset when it fires (spike-diffuse-spike only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Subtract the firing threshold from the spine voltage.
    SubtractThreshold,
    /// Reset the spine voltage to zero.
    ToZero,
}

/// Which intensity a noise sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Nu,
    Mu,
}

/// Full physical parameter set. Dimensional fields carry the units of the
/// biological literature; the remaining fields are already nondimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Transmembrane resistance (Ω·cm²).
    pub r_m: f64,
    /// Intracellular resistance (Ω·cm).
    pub r_a: f64,
    /// Transmembrane capacitance (µF/cm²).
    pub c_m: f64,
    /// Spine-head capacitance (µF/cm²).
    pub c_hat: f64,
    /// Spine-head membrane resistance (Ω·cm²).
    pub r_hat: f64,
    /// Dendritic diameter (µm).
    pub a: f64,
    /// Cable length (nondimensional, electrotonic units).
    pub l: f64,
    /// Spine stem resistance (nondimensional).
    pub r: f64,
    /// Spine spacing (nondimensional).
    pub d_spacing: f64,
    /// Number of spines.
    pub n_spines: usize,
    /// Firing threshold of an integrate-and-fire spine head.
    pub h_thresh: f64,
    /// Refractory time after a spine fires.
    pub tau_r: f64,
    /// Duration of the rectangular action-potential pulse.
    pub tau_s: f64,
    /// Strength of the rectangular action-potential pulse.
    pub eta_0: f64,
    /// Maximal sodium conductance (mS/cm²).
    pub g_na: f64,
    /// Maximal potassium conductance (mS/cm²).
    pub g_k: f64,
    /// Maximal leak conductance (mS/cm²).
    pub g_l: f64,
    /// Sodium reversal potential (mV).
    pub v_na: f64,
    /// Potassium reversal potential (mV).
    pub v_k: f64,
    /// Leak reversal potential (mV).
    pub v_l: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            r_m: 2500.0,
            r_a: 70.0,
            c_m: 1.0,
            c_hat: 1.0,
            r_hat: 2500.0,
            a: 0.36,
            l: 81.0 * 0.8,
            r: 1.0,
            d_spacing: 0.8,
            n_spines: 81,
            h_thresh: 0.04,
            tau_r: 10.0,
            tau_s: 1.0,
            eta_0: 2.0,
            g_na: 120.0,
            g_k: 36.0,
            g_l: 0.3,
            v_na: 50.0,
            v_k: -77.0,
            v_l: -54.402,
        }
    }
}

impl PhysicalParams {
    /// Rescale the dimensional fields by their reference values. The
    /// already-nondimensional fields pass through unchanged, as do the
    /// Hodgkin-Huxley constants (those equations run in mV and ms).
    pub fn to_nondim(&self) -> PhysicalParams {
        PhysicalParams {
            r_m: self.r_m / reference::R_M,
            r_a: self.r_a / reference::R_A,
            c_m: self.c_m / reference::C_M,
            c_hat: self.c_hat / reference::C_HAT,
            r_hat: self.r_hat / reference::R_HAT,
            a: self.a / reference::A,
            ..self.clone()
        }
    }
}

/// Constants derived from the physical set; all nondimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Electrotonic length scale λ = √(a·R_m / 4R_a).
    pub lambda_e: f64,
    /// Membrane time constant τ = R_m·C_m.
    pub tau_m: f64,
    /// Cable diffusion coefficient D = λ²/τ.
    pub d_diff: f64,
    /// Integrate-and-fire leak rate ε = (1/Ĉ)(1/r + 1/r̂).
    pub epsilon: f64,
}

/// Evaluate the derived constants from the nondimensional parameter
/// ratios. The electrotonic scale is λ = √(d·r_m/4r_a) in physical units;
/// expressed in units of its reference value the constant factor cancels,
/// leaving λ = √(a·r_m/r_a) in ratios, and likewise τ = r_m·c_m and
/// D = λ²/τ. All three equal 1 at the reference parameter set.
pub fn nondimensionalize(p: &PhysicalParams) -> Result<DerivedParams> {
    for (field, v) in [
        ("r_m", p.r_m),
        ("r_a", p.r_a),
        ("c_m", p.c_m),
        ("c_hat", p.c_hat),
        ("r_hat", p.r_hat),
        ("a", p.a),
        ("r", p.r),
    ] {
        if !(v > 0.0) {
            return Err(Error::Validation {
                field,
                msg: format!("must be strictly positive, got {v}"),
            });
        }
    }
    let lambda_e = (p.a * p.r_m / p.r_a).sqrt();
    let tau_m = p.r_m * p.c_m;
    let d_diff = lambda_e * lambda_e / tau_m;
    let epsilon = (1.0 / p.c_hat) * (1.0 / p.r + 1.0 / p.r_hat);
    Ok(DerivedParams {
        lambda_e,
        tau_m,
        d_diff,
        epsilon,
    })
}

/// Spatial grid and time stepping for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Grid spacing (nondimensional length).
    pub dx: f64,
    /// Time step (nondimensional time).
    pub dt: f64,
    /// End time of the run.
    pub t_final: f64,
    /// Number of grid nodes; dx·(grid_n − 1) = L.
    pub grid_n: usize,
}

/// Wave-launch stimulus for the Baer-Rinzel model: a Gaussian voltage bump
/// added to the cable at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    /// Bump amplitude (mV).
    pub amp: f64,
    /// Bump width (nondimensional length).
    pub width: f64,
    /// Bump centre (nondimensional position).
    pub center: f64,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub physical: PhysicalParams,
    pub derived: DerivedParams,
    pub noise: NoiseConfig,
    pub disc: Discretization,
    /// Spine-stem width parameter of the space-dependent density (BR).
    pub kappa: f64,
    /// Peak spine density (BR).
    pub rho_max: f64,
    /// Measurement stations as fractions of the cable length.
    pub x1_frac: f64,
    pub x2_frac: f64,
    /// Propagation threshold; measured off the deterministic run when unset.
    pub theta_prop: Option<f64>,
    /// Spine-head voltage (mV) whose upward crossing marks a BR spine firing.
    pub fire_level: f64,
    pub stim: Stimulus,
    /// Force-fire the first spine at t = 0 to launch the SDS wave.
    pub force_fire_first: bool,
    /// Relaxation time before the stimulus when the BR rest state is not
    /// uniform (κ > 0).
    pub settle_time: f64,
    pub reset: ResetMode,
    /// Ensemble size M.
    pub realizations: usize,
    /// Worker threads for ensembles (0 = all available).
    pub workers: usize,
    /// Keep every k-th step in field dumps.
    pub dump_stride: usize,
    pub sweep_param: SweepParam,
    pub sweep_values: Vec<f64>,
    pub kappa_values: Vec<f64>,
    pub nu_m_values: Vec<f64>,
}

impl ModelConfig {
    /// Defaults for a given model. The SDS pulse triple (τ_R, τ_s, η₀), the
    /// stem resistance, the BR density and the stimulus were fixed by a
    /// calibration sweep so that the deterministic wave propagates with
    /// margin; they are recorded here, not taken from any published table.
    pub fn default_for(model: ModelKind) -> ModelConfig {
        let physical = PhysicalParams::default();
        let derived = nondimensionalize(&physical.to_nondim()).expect("defaults are valid");
        let mut cfg = ModelConfig {
            model,
            physical,
            derived,
            noise: NoiseConfig::default(),
            disc: Discretization {
                dx: 0.1,
                dt: 0.0,
                t_final: match model {
                    ModelKind::Sds => 150.0,
                    ModelKind::Br => 80.0,
                },
                grid_n: 0,
            },
            kappa: 0.0,
            rho_max: 10.0,
            x1_frac: 0.25,
            x2_frac: 0.75,
            theta_prop: None,
            fire_level: -20.0,
            stim: Stimulus {
                amp: 50.0,
                width: 2.0,
                center: 0.0,
            },
            force_fire_first: true,
            settle_time: 15.0,
            reset: ResetMode::SubtractThreshold,
            realizations: 100,
            workers: 0,
            dump_stride: 20,
            sweep_param: SweepParam::Nu,
            sweep_values: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            kappa_values: vec![0.0, 10.0, 100.0, 300.0, 670.0, 1000.0, 3000.0, 10000.0],
            nu_m_values: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        };
        if model == ModelKind::Br {
            cfg.physical.r = 0.5;
            cfg.disc.t_final = 110.0;
        }
        cfg.finalize();
        cfg
    }

    /// Recompute the derived constants and the dependent discretization
    /// fields (grid size from dx and L; default dt from the stability
    /// bound when unset).
    pub fn finalize(&mut self) {
        if let Ok(d) = nondimensionalize(&self.physical.to_nondim()) {
            self.derived = d;
        }
        if self.physical.l > 0.0 && self.disc.dx > 0.0 {
            let n = (self.physical.l / self.disc.dx).round().max(1.0) as usize + 1;
            self.disc.grid_n = n;
            self.disc.dx = self.physical.l / (n - 1) as f64;
        }
        // dt = 0 means "derive from the stability bound"; anything else,
        // including invalid negatives, is left for validation to judge.
        if self.disc.dt == 0.0 {
            let d = self.diffusivity();
            if d > 0.0 {
                let mut bound = self.disc.dx * self.disc.dx / (2.0 * d);
                if self.model == ModelKind::Br {
                    // The spine-head conductances impose a reaction-rate
                    // limit during the spike that the diffusion bound does
                    // not see; c_hat/g_total leaves a further factor 2
                    // below the explicit-Euler limit.
                    let nd = self.physical.to_nondim();
                    let g_total = self.physical.g_na
                        + self.physical.g_k
                        + self.physical.g_l
                        + 1.0 / self.physical.r;
                    bound = bound.min(nd.c_hat / g_total);
                }
                self.disc.dt = 0.9 * bound;
            }
        }
    }

    /// Cable diffusion coefficient of the active model (nondimensional).
    pub fn diffusivity(&self) -> f64 {
        let nd = self.physical.to_nondim();
        match self.model {
            ModelKind::Sds => self.derived.d_diff,
            ModelKind::Br => 1.0 / (nd.r_a * std::f64::consts::PI * nd.a * nd.c_m),
        }
    }

    /// Spine centres x_n = (n + ½)·L/N, kept off the sealed ends.
    pub fn spine_positions(&self) -> Vec<f64> {
        let n = self.physical.n_spines;
        let l = self.physical.l;
        (0..n).map(|i| (i as f64 + 0.5) * l / n as f64).collect()
    }

    /// Spine centres snapped to their nearest grid node.
    pub fn spine_nodes(&self) -> Vec<usize> {
        let last = self.disc.grid_n - 1;
        self.spine_positions()
            .iter()
            .map(|&x| ((x / self.disc.dx).round() as usize).min(last))
            .collect()
    }

    /// Grid node nearest to a position.
    pub fn node_at(&self, x: f64) -> usize {
        ((x / self.disc.dx).round() as usize).min(self.disc.grid_n - 1)
    }

    /// Measurement stations in nondimensional coordinates.
    pub fn stations(&self) -> (f64, f64) {
        (
            self.x1_frac * self.physical.l,
            self.x2_frac * self.physical.l,
        )
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::default_for(ModelKind::Sds)
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub msg: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.msg)
    }
}

/// Check every invariant, reporting rather than aborting. An empty list
/// means the configuration is runnable.
pub fn validate(cfg: &ModelConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    fn positive(out: &mut Vec<Violation>, field: &'static str, v: f64) {
        if !(v > 0.0) {
            out.push(Violation {
                field,
                msg: format!("must be strictly positive, got {v}"),
            });
        }
    }
    let p = &cfg.physical;
    positive(&mut out, "r_m", p.r_m);
    positive(&mut out, "r_a", p.r_a);
    positive(&mut out, "c_m", p.c_m);
    positive(&mut out, "c_hat", p.c_hat);
    positive(&mut out, "r_hat", p.r_hat);
    positive(&mut out, "a", p.a);
    positive(&mut out, "l", p.l);
    positive(&mut out, "r", p.r);
    positive(&mut out, "d_spacing", p.d_spacing);
    positive(&mut out, "g_na", p.g_na);
    positive(&mut out, "g_k", p.g_k);
    positive(&mut out, "g_l", p.g_l);
    positive(&mut out, "dx", cfg.disc.dx);
    positive(&mut out, "dt", cfg.disc.dt);
    positive(&mut out, "t_final", cfg.disc.t_final);

    if p.n_spines < 1 {
        out.push(Violation {
            field: "n_spines",
            msg: "at least one spine is required".into(),
        });
    }
    if !(p.v_k < p.v_l && p.v_l < p.v_na) {
        out.push(Violation {
            field: "v_l",
            msg: format!(
                "reversal potentials must satisfy v_k < v_l < v_na, got {} / {} / {}",
                p.v_k, p.v_l, p.v_na
            ),
        });
    }
    if !(p.h_thresh > 0.0 && p.h_thresh < 1.0) {
        out.push(Violation {
            field: "h_thresh",
            msg: format!("must lie in (0, 1), got {}", p.h_thresh),
        });
    }
    if !(p.tau_r >= 0.0) {
        out.push(Violation {
            field: "tau_r",
            msg: format!("must be nonnegative, got {}", p.tau_r),
        });
    }
    if !(p.tau_s >= 0.0) {
        out.push(Violation {
            field: "tau_s",
            msg: format!("must be nonnegative, got {}", p.tau_s),
        });
    }

    let n = &cfg.noise;
    if !(n.mu >= 0.0) {
        out.push(Violation {
            field: "mu",
            msg: format!("must be nonnegative, got {}", n.mu),
        });
    }
    if !(n.nu >= 0.0) {
        out.push(Violation {
            field: "nu",
            msg: format!("must be nonnegative, got {}", n.nu),
        });
    }
    if !(n.beta >= 0.0) {
        out.push(Violation {
            field: "beta",
            msg: format!("must be nonnegative, got {}", n.beta),
        });
    }
    if !(n.sigma >= 0.0) {
        out.push(Violation {
            field: "sigma",
            msg: format!("must be nonnegative, got {}", n.sigma),
        });
    }
    if n.kind == NoiseKind::QWienerSpatial && !(n.zeta > 0.0) {
        out.push(Violation {
            field: "zeta",
            msg: format!(
                "spatially correlated noise requires a positive correlation length, got {}",
                n.zeta
            ),
        });
    }
    if let Some(j) = n.j_modes {
        if j < 1 {
            out.push(Violation {
                field: "j_modes",
                msg: "at least one spectral mode is required".into(),
            });
        }
    }

    let d = &cfg.disc;
    if d.grid_n >= 2 && d.dx > 0.0 {
        let err = (d.dx * (d.grid_n - 1) as f64 - p.l).abs();
        if err > 1e-9 * p.l.max(1.0) {
            out.push(Violation {
                field: "grid_n",
                msg: format!("dx·(grid_n − 1) = {} does not match l = {}", d.dx * (d.grid_n - 1) as f64, p.l),
            });
        }
    } else if d.grid_n < 3 {
        out.push(Violation {
            field: "grid_n",
            msg: format!("need at least 3 grid nodes, got {}", d.grid_n),
        });
    }
    let diff = cfg.diffusivity();
    if d.dx > 0.0 && diff > 0.0 && d.dt > 0.0 {
        let bound = d.dx * d.dx / (2.0 * diff);
        if d.dt > bound * (1.0 + 1e-12) {
            out.push(Violation {
                field: "dt",
                msg: format!("dt = {} exceeds the explicit stability bound dx²/2D = {bound}", d.dt),
            });
        }
    }

    if !(cfg.kappa >= 0.0) {
        out.push(Violation {
            field: "kappa",
            msg: format!("must be nonnegative, got {}", cfg.kappa),
        });
    }
    if cfg.model == ModelKind::Br {
        positive(&mut out, "rho_max", cfg.rho_max);
    }
    if !(cfg.x1_frac > 0.0 && cfg.x1_frac < cfg.x2_frac && cfg.x2_frac < 1.0) {
        out.push(Violation {
            field: "x1_frac",
            msg: format!(
                "stations must satisfy 0 < x1_frac < x2_frac < 1, got {} / {}",
                cfg.x1_frac, cfg.x2_frac
            ),
        });
    }
    if cfg.realizations < 1 {
        out.push(Violation {
            field: "realizations",
            msg: "ensemble size must be at least 1".into(),
        });
    }
    if cfg.dump_stride < 1 {
        out.push(Violation {
            field: "dump_stride",
            msg: "stride must be at least 1".into(),
        });
    }
    out
}

fn parse_bool(v: &str, line: usize) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse {
            line,
            msg: format!("expected a boolean, got `{v}`"),
        }),
    }
}

fn parse_f64(v: &str, line: usize) -> Result<f64> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a number, got `{v}`"),
    })
}

fn parse_usize(v: &str, line: usize) -> Result<usize> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a nonnegative integer, got `{v}`"),
    })
}

fn parse_u64(v: &str, line: usize) -> Result<u64> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a nonnegative integer, got `{v}`"),
    })
}

fn parse_list(v: &str, line: usize) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_f64(s.trim(), line))
        .collect::<Result<Vec<_>>>()
}

/// Split an experiment file into (line number, key, value) triples.
fn parse_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{stripped}`"),
            });
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty key or value".into(),
            });
        }
        out.push((line, key, value));
    }
    Ok(out)
}

/// Load a configuration from experiment-file text. Unset keys take the
/// model's defaults; the result is validated before being returned.
pub fn load_config(text: &str) -> Result<ModelConfig> {
    let entries = parse_lines(text)?;

    // The model key decides the default set, so resolve it first.
    let mut model = ModelKind::Sds;
    for (line, key, value) in &entries {
        if key == "model" {
            model = match value.as_str() {
                "sds" => ModelKind::Sds,
                "br" => ModelKind::Br,
                other => {
                    return Err(Error::Parse {
                        line: *line,
                        msg: format!("unknown model `{other}` (expected sds or br)"),
                    })
                }
            };
        }
    }

    let mut cfg = ModelConfig::default_for(model);
    let mut dt_set = false;
    let mut l_set = false;
    let mut spacing = (cfg.physical.n_spines, cfg.physical.d_spacing);

    for (line, key, value) in entries {
        let line = line;
        let v = value.as_str();
        match key.as_str() {
            "model" => {}
            "r_m" => cfg.physical.r_m = parse_f64(v, line)?,
            "r_a" => cfg.physical.r_a = parse_f64(v, line)?,
            "c_m" => cfg.physical.c_m = parse_f64(v, line)?,
            "c_hat" => cfg.physical.c_hat = parse_f64(v, line)?,
            "r_hat" => cfg.physical.r_hat = parse_f64(v, line)?,
            "a" => cfg.physical.a = parse_f64(v, line)?,
            "l" => {
                cfg.physical.l = parse_f64(v, line)?;
                l_set = true;
            }
            "r" => cfg.physical.r = parse_f64(v, line)?,
            "d_spacing" => cfg.physical.d_spacing = parse_f64(v, line)?,
            "n_spines" => cfg.physical.n_spines = parse_usize(v, line)?,
            "h_thresh" => cfg.physical.h_thresh = parse_f64(v, line)?,
            "tau_r" => cfg.physical.tau_r = parse_f64(v, line)?,
            "tau_s" => cfg.physical.tau_s = parse_f64(v, line)?,
            "eta_0" => cfg.physical.eta_0 = parse_f64(v, line)?,
            "g_na" => cfg.physical.g_na = parse_f64(v, line)?,
            "g_k" => cfg.physical.g_k = parse_f64(v, line)?,
            "g_l" => cfg.physical.g_l = parse_f64(v, line)?,
            "v_na" => cfg.physical.v_na = parse_f64(v, line)?,
            "v_k" => cfg.physical.v_k = parse_f64(v, line)?,
            "v_l" => cfg.physical.v_l = parse_f64(v, line)?,
            "kappa" => cfg.kappa = parse_f64(v, line)?,
            "rho_max" => cfg.rho_max = parse_f64(v, line)?,
            "noise_kind" => {
                cfg.noise.kind = match v {
                    "white" => NoiseKind::White,
                    "ou_temporal" => NoiseKind::OuTemporal,
                    "q_wiener_spatial" => NoiseKind::QWienerSpatial,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown noise kind `{other}`"),
                        })
                    }
                }
            }
            "target" => {
                cfg.noise.target = match v {
                    "cable" => NoiseTarget::Cable,
                    "spines" => NoiseTarget::Spines,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown noise target `{other}`"),
                        })
                    }
                }
            }
            "interpretation" => {
                cfg.noise.interpretation = match v {
                    "ito" => Interpretation::Ito,
                    "stratonovich" => Interpretation::Stratonovich,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown interpretation `{other}`"),
                        })
                    }
                }
            }
            "mu" => cfg.noise.mu = parse_f64(v, line)?,
            "nu" => cfg.noise.nu = parse_f64(v, line)?,
            "beta" => cfg.noise.beta = parse_f64(v, line)?,
            "theta_ou" => cfg.noise.theta_ou = parse_f64(v, line)?,
            "sigma" => cfg.noise.sigma = parse_f64(v, line)?,
            "zeta" => cfg.noise.zeta = parse_f64(v, line)?,
            "j_modes" => cfg.noise.j_modes = Some(parse_usize(v, line)?),
            "shared_path" => cfg.noise.shared_path = parse_bool(v, line)?,
            "seed" => cfg.noise.seed = parse_u64(v, line)?,
            "dx" => cfg.disc.dx = parse_f64(v, line)?,
            "dt" => {
                cfg.disc.dt = parse_f64(v, line)?;
                dt_set = true;
            }
            "t_final" => cfg.disc.t_final = parse_f64(v, line)?,
            "x1_frac" => cfg.x1_frac = parse_f64(v, line)?,
            "x2_frac" => cfg.x2_frac = parse_f64(v, line)?,
            "theta_prop" => cfg.theta_prop = Some(parse_f64(v, line)?),
            "fire_level" => cfg.fire_level = parse_f64(v, line)?,
            "stim_amp" => cfg.stim.amp = parse_f64(v, line)?,
            "stim_width" => cfg.stim.width = parse_f64(v, line)?,
            "stim_center" => cfg.stim.center = parse_f64(v, line)?,
            "force_fire_first" => cfg.force_fire_first = parse_bool(v, line)?,
            "settle_time" => cfg.settle_time = parse_f64(v, line)?,
            "reset" => {
                cfg.reset = match v {
                    "subtract" => ResetMode::SubtractThreshold,
                    "zero" => ResetMode::ToZero,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown reset mode `{other}` (expected subtract or zero)"),
                        })
                    }
                }
            }
            "realizations" => cfg.realizations = parse_usize(v, line)?,
            "workers" => cfg.workers = parse_usize(v, line)?,
            "dump_stride" => cfg.dump_stride = parse_usize(v, line)?,
            "sweep_param" => {
                cfg.sweep_param = match v {
                    "nu" => SweepParam::Nu,
                    "mu" => SweepParam::Mu,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown sweep parameter `{other}` (expected nu or mu)"),
                        })
                    }
                }
            }
            "sweep_values" => cfg.sweep_values = parse_list(v, line)?,
            "kappa_values" => cfg.kappa_values = parse_list(v, line)?,
            "nu_m_values" => cfg.nu_m_values = parse_list(v, line)?,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
        spacing = (cfg.physical.n_spines, cfg.physical.d_spacing);
    }

    // Cable length defaults to the span of the equally spaced spines.
    if !l_set {
        cfg.physical.l = spacing.0 as f64 * spacing.1;
    }
    if !dt_set {
        cfg.disc.dt = 0.0; // recomputed from the stability bound
    }
    cfg.finalize();

    let violations = validate(&cfg);
    if let Some(first) = violations.first() {
        return Err(Error::Validation {
            field: first.field,
            msg: first.msg.clone(),
        });
    }
    Ok(cfg)
}

impl ModelConfig {
    /// Render the configuration as experiment-file text. Loading the output
    /// reproduces the configuration field for field.
    pub fn to_text(&self) -> String {
        let p = &self.physical;
        let n = &self.noise;
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv(&mut s, "model", match self.model {
            ModelKind::Sds => "sds".into(),
            ModelKind::Br => "br".into(),
        });
        kv(&mut s, "r_m", format!("{}", p.r_m));
        kv(&mut s, "r_a", format!("{}", p.r_a));
        kv(&mut s, "c_m", format!("{}", p.c_m));
        kv(&mut s, "c_hat", format!("{}", p.c_hat));
        kv(&mut s, "r_hat", format!("{}", p.r_hat));
        kv(&mut s, "a", format!("{}", p.a));
        kv(&mut s, "l", format!("{}", p.l));
        kv(&mut s, "r", format!("{}", p.r));
        kv(&mut s, "d_spacing", format!("{}", p.d_spacing));
        kv(&mut s, "n_spines", format!("{}", p.n_spines));
        kv(&mut s, "h_thresh", format!("{}", p.h_thresh));
        kv(&mut s, "tau_r", format!("{}", p.tau_r));
        kv(&mut s, "tau_s", format!("{}", p.tau_s));
        kv(&mut s, "eta_0", format!("{}", p.eta_0));
        kv(&mut s, "g_na", format!("{}", p.g_na));
        kv(&mut s, "g_k", format!("{}", p.g_k));
        kv(&mut s, "g_l", format!("{}", p.g_l));
        kv(&mut s, "v_na", format!("{}", p.v_na));
        kv(&mut s, "v_k", format!("{}", p.v_k));
        kv(&mut s, "v_l", format!("{}", p.v_l));
        kv(&mut s, "kappa", format!("{}", self.kappa));
        kv(&mut s, "rho_max", format!("{}", self.rho_max));
        kv(&mut s, "noise_kind", match n.kind {
            NoiseKind::White => "white".into(),
            NoiseKind::OuTemporal => "ou_temporal".into(),
            NoiseKind::QWienerSpatial => "q_wiener_spatial".into(),
        });
        kv(&mut s, "target", match n.target {
            NoiseTarget::Cable => "cable".into(),
            NoiseTarget::Spines => "spines".into(),
        });
        kv(&mut s, "interpretation", match n.interpretation {
            Interpretation::Ito => "ito".into(),
            Interpretation::Stratonovich => "stratonovich".into(),
        });
        kv(&mut s, "mu", format!("{}", n.mu));
        kv(&mut s, "nu", format!("{}", n.nu));
        kv(&mut s, "beta", format!("{}", n.beta));
        kv(&mut s, "theta_ou", format!("{}", n.theta_ou));
        kv(&mut s, "sigma", format!("{}", n.sigma));
        kv(&mut s, "zeta", format!("{}", n.zeta));
        if let Some(j) = n.j_modes {
            kv(&mut s, "j_modes", format!("{j}"));
        }
        kv(&mut s, "shared_path", format!("{}", n.shared_path));
        kv(&mut s, "seed", format!("{}", n.seed));
        kv(&mut s, "dx", format!("{}", self.disc.dx));
        kv(&mut s, "dt", format!("{}", self.disc.dt));
        kv(&mut s, "t_final", format!("{}", self.disc.t_final));
        kv(&mut s, "x1_frac", format!("{}", self.x1_frac));
        kv(&mut s, "x2_frac", format!("{}", self.x2_frac));
        if let Some(theta) = self.theta_prop {
            kv(&mut s, "theta_prop", format!("{theta}"));
        }
        kv(&mut s, "fire_level", format!("{}", self.fire_level));
        kv(&mut s, "stim_amp", format!("{}", self.stim.amp));
        kv(&mut s, "stim_width", format!("{}", self.stim.width));
        kv(&mut s, "stim_center", format!("{}", self.stim.center));
        kv(&mut s, "force_fire_first", format!("{}", self.force_fire_first));
        kv(&mut s, "settle_time", format!("{}", self.settle_time));
        kv(&mut s, "reset", match self.reset {
            ResetMode::SubtractThreshold => "subtract".into(),
            ResetMode::ToZero => "zero".into(),
        });
        kv(&mut s, "realizations", format!("{}", self.realizations));
        kv(&mut s, "workers", format!("{}", self.workers));
        kv(&mut s, "dump_stride", format!("{}", self.dump_stride));
        kv(&mut s, "sweep_param", match self.sweep_param {
            SweepParam::Nu => "nu".into(),
            SweepParam::Mu => "mu".into(),
        });
        let list = |vals: &[f64]| {
            vals.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        if !self.sweep_values.is_empty() {
            kv(&mut s, "sweep_values", list(&self.sweep_values));
        }
        if !self.kappa_values.is_empty() {
            kv(&mut s, "kappa_values", list(&self.kappa_values));
        }
        if !self.nu_m_values.is_empty() {
            kv(&mut s, "nu_m_values", list(&self.nu_m_values));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_table_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg.physical.r_m, 2500.0);
        assert_eq!(cfg.physical.g_na, 120.0);
        assert_eq!(cfg.physical.n_spines, 81);
        assert_eq!(cfg.physical.h_thresh, 0.04);
    }

    #[test]
    fn zero_nu_is_accepted() {
        let cfg = load_config("nu = 0\n").unwrap();
        assert_eq!(cfg.noise.nu, 0.0);
        assert_eq!(cfg.noise.mu, 0.0);
    }

    #[test]
    fn negative_dt_is_rejected() {
        let err = load_config("dt = -0.1\n").unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "dt"),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_names_line() {
        let err = load_config("mu = 0.1\nthis is not a pair\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_reported() {
        let err = load_config("no_such_key = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn bracketed_values_give_unit_constants() {
        let d = nondimensionalize(&PhysicalParams::default().to_nondim()).unwrap();
        assert!((d.lambda_e - 1.0).abs() < 1e-12);
        assert!((d.tau_m - 1.0).abs() < 1e-12);
        assert!((d.d_diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nondimensionalize_on_unit_ratios() {
        let mut p = PhysicalParams::default();
        p.r_m = 1.0;
        p.r_a = 1.0;
        p.c_m = 1.0;
        p.a = 1.0;
        let d = nondimensionalize(&p).unwrap();
        assert!((d.tau_m - 1.0).abs() < 1e-12);
        assert!((d.lambda_e - 1.0).abs() < 1e-12);
        assert!((d.d_diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_formula() {
        let mut p = PhysicalParams::default();
        p.c_hat = 1.0;
        p.r = 1.0;
        p.r_hat = 1.0;
        let d = nondimensionalize(&p).unwrap();
        assert_eq!(d.epsilon, 2.0);
    }

    #[test]
    fn doubling_r_m_scales_tau_and_lambda_but_not_d() {
        let base = nondimensionalize(&PhysicalParams::default()).unwrap();
        let mut p = PhysicalParams::default();
        p.r_m *= 2.0;
        let d = nondimensionalize(&p).unwrap();
        assert!((d.tau_m / base.tau_m - 2.0).abs() < 1e-12);
        assert!((d.lambda_e / base.lambda_e - 2f64.sqrt()).abs() < 1e-12);
        assert!((d.d_diff / base.d_diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_input_is_an_error() {
        let mut p = PhysicalParams::default();
        p.r_a = 0.0;
        assert!(nondimensionalize(&p).is_err());
    }

    #[test]
    fn validate_default_is_clean() {
        assert!(validate(&ModelConfig::default()).is_empty());
        assert!(validate(&ModelConfig::default_for(ModelKind::Br)).is_empty());
    }

    #[test]
    fn validate_flags_zero_zeta_for_spatial_noise() {
        let mut cfg = ModelConfig::default();
        cfg.noise.kind = NoiseKind::QWienerSpatial;
        cfg.noise.zeta = 0.0;
        let v = validate(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "zeta");
    }

    #[test]
    fn validate_flags_out_of_range_threshold() {
        let mut cfg = ModelConfig::default();
        cfg.physical.h_thresh = 1.5;
        let v = validate(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "h_thresh");
    }

    #[test]
    fn validate_is_total_on_nan() {
        let mut cfg = ModelConfig::default();
        cfg.physical.r_m = f64::NAN;
        cfg.disc.dt = f64::NAN;
        let v = validate(&cfg);
        assert!(v.iter().any(|x| x.field == "r_m"));
        assert!(v.iter().any(|x| x.field == "dt"));
    }

    #[test]
    fn text_round_trip_is_field_identical() {
        let mut cfg = ModelConfig::default_for(ModelKind::Br);
        cfg.noise.kind = NoiseKind::QWienerSpatial;
        cfg.noise.zeta = 2.4;
        cfg.noise.nu = 0.15;
        cfg.noise.seed = 12345;
        cfg.theta_prop = Some(-12.5);
        cfg.kappa = 670.0;
        cfg.finalize();
        let text = cfg.to_text();
        let back = load_config(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn default_dt_respects_stability_margin() {
        let cfg = ModelConfig::default();
        let bound = cfg.disc.dx * cfg.disc.dx / (2.0 * cfg.diffusivity());
        assert!((cfg.disc.dt - 0.9 * bound).abs() < 1e-15);

        // The Baer-Rinzel default is further capped by the spine-head
        // conductance rate.
        let br = ModelConfig::default_for(ModelKind::Br);
        let g_total = br.physical.g_na + br.physical.g_k + br.physical.g_l + 1.0 / br.physical.r;
        assert!((br.disc.dt - 0.9 / g_total).abs() < 1e-12);
        assert!(br.disc.dt < br.disc.dx * br.disc.dx / (2.0 * br.diffusivity()));
    }

    #[test]
    fn spines_snap_onto_grid_and_stay_off_the_ends() {
        let cfg = ModelConfig::default();
        let nodes = cfg.spine_nodes();
        assert_eq!(nodes.len(), 81);
        assert!(nodes[0] > 0);
        assert!(*nodes.last().unwrap() < cfg.disc.grid_n - 1);
        let xs = cfg.spine_positions();
        for (x, k) in xs.iter().zip(&nodes) {
            assert!((x - *k as f64 * cfg.disc.dx).abs() < 0.5 * cfg.disc.dx + 1e-12);
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = load_config("# comment\n\nmu = 0.2 # trailing\n").unwrap();
        assert_eq!(cfg.noise.mu, 0.2);
    }
}
