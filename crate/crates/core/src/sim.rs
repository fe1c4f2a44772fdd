//! Shared realization plumbing: run records, station traces, field
//! observers and per-realization RNG streams.

use crate::config::{ModelConfig, ModelKind};
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One spine firing (or, for Hodgkin-Huxley heads, the first upstroke
/// crossing of the detection level).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireEvent {
    pub spine: usize,
    pub t: f64,
}

/// Cable voltage sampled every step at the two measurement stations.
#[derive(Debug, Clone)]
pub struct StationTraces {
    /// Sampling interval (the simulation step).
    pub dt: f64,
    pub x1: f64,
    pub x2: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

/// Everything a realization leaves behind for measurement.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub traces: StationTraces,
    /// Firing events ordered by time.
    pub fire_log: Vec<FireEvent>,
    /// Spine centre positions, matching the indices in `fire_log`.
    pub spine_x: Vec<f64>,
    pub diverged: bool,
    /// Time reached (equals t_final unless the run diverged).
    pub t_end: f64,
}

/// View of the full state offered to field observers each step.
pub struct FieldSnapshot<'a> {
    pub x: &'a [f64],
    pub v: &'a [f64],
    /// Spine-head voltages: one per spine (SDS) or per node (BR).
    pub u: Option<&'a [f64]>,
    pub gates: Option<(&'a [f64], &'a [f64], &'a [f64])>,
}

pub type Observer<'a> = &'a mut dyn FnMut(f64, &FieldSnapshot<'_>);

/// One RNG stream per realization: the master seed picks the key, the
/// realization index picks the ChaCha stream, so ensembles are
/// reproducible regardless of scheduling.
pub fn realization_rng(master_seed: u64, realization: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(realization.wrapping_add(1));
    rng
}

/// Run one realization of the configured model.
pub fn run_realization(
    cfg: &ModelConfig,
    realization: u64,
    observer: Option<Observer<'_>>,
) -> Result<RunRecord> {
    match cfg.model {
        ModelKind::Sds => crate::sds::run_realization(cfg, realization, observer),
        ModelKind::Br => crate::br::run_realization(cfg, realization, observer),
    }
}

/// Run the noise-free counterpart of a configuration (the deterministic
/// reference used for rescaling speeds).
pub fn run_deterministic(cfg: &ModelConfig, observer: Option<Observer<'_>>) -> Result<RunRecord> {
    let mut det = cfg.clone();
    det.noise.mu = 0.0;
    det.noise.nu = 0.0;
    run_realization(&det, 0, observer)
}
