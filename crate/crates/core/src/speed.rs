//! Travelling-wave speed measurement: threshold crossings at two stations,
//! propagation-failure and sequential-firing classification, and
//! Monte-Carlo ensemble aggregation.

use crate::config::ModelConfig;
use crate::error::Error;
use crate::sim::{self, FireEvent, RunRecord};
use crate::Result;
use rayon::prelude::*;
use serde::Serialize;

/// Speed measurement of one realization.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedResult {
    /// Raw speed (x₂−x₁)/(t₂−t₁); absent when the wave failed.
    pub c_noisy: Option<f64>,
    /// Speed rescaled by the deterministic reference, so 1 means unchanged.
    pub c_rescaled: Option<f64>,
    pub propagated: bool,
    pub sequential: bool,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    /// RNG stream index of the realization.
    pub realization_seed: u64,
}

impl SpeedResult {
    /// Counted into ensemble statistics only when the wave both crossed
    /// the far station and kept its spines in spatial order.
    pub fn is_valid(&self) -> bool {
        self.propagated && self.sequential
    }
}

/// Ensemble aggregate over the valid realizations.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub mean_c: f64,
    pub sd_c: f64,
    pub n_failed: usize,
    pub n_nonsequential: usize,
    pub m: usize,
}

/// Ensemble output: the aggregate, the deterministic reference and the
/// per-realization measurements.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub stats: EnsembleStats,
    pub c_det: f64,
    pub theta: f64,
    pub results: Vec<SpeedResult>,
}

/// First time a uniformly sampled trace reaches `theta`, linearly
/// interpolated between samples. `None` when it never crosses.
pub fn detect_crossing(trace: &[f64], dt: f64, theta: f64) -> Result<Option<f64>> {
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    if trace[0] >= theta {
        return Ok(Some(0.0));
    }
    for k in 1..trace.len() {
        if trace[k] >= theta {
            let frac = (theta - trace[k - 1]) / (trace[k] - trace[k - 1]);
            return Ok(Some(((k - 1) as f64 + frac) * dt));
        }
    }
    Ok(None)
}

/// c = (x₂ − x₁)/(t₂ − t₁) for a wave crossing the two stations.
pub fn measure_speed(x1: f64, x2: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(x2 > x1) {
        return Err(Error::Validation {
            field: "x2",
            msg: format!("stations must be ordered, got x1={x1}, x2={x2}"),
        });
    }
    if !(t2 > t1) {
        return Err(Error::Validation {
            field: "t2",
            msg: format!("invalid crossing order: t1={t1}, t2={t2}"),
        });
    }
    Ok((x2 - x1) / (t2 - t1))
}

/// Does the trace at the far station ever reach the threshold?
pub fn check_propagation(v_at_x2: &[f64], theta: f64) -> bool {
    v_at_x2.iter().any(|&v| v >= theta)
}

/// True when every listed spine fired and their first firings are in
/// strictly increasing time order along the cable (distal to proximal).
/// Ties count as non-sequential.
pub fn check_sequential(fire_log: &[FireEvent], window_spines: &[usize]) -> bool {
    if window_spines.is_empty() {
        return true;
    }
    let max_idx = window_spines.iter().max().unwrap() + 1;
    let mut first = vec![f64::INFINITY; max_idx];
    for e in fire_log {
        if e.spine < max_idx && e.t < first[e.spine] {
            first[e.spine] = e.t;
        }
    }
    let mut prev = f64::NEG_INFINITY;
    for &sp in window_spines {
        let t = first[sp];
        if !t.is_finite() || t <= prev {
            return false;
        }
        prev = t;
    }
    true
}

/// Spine indices whose centres lie inside the measurement window.
pub fn spines_in_window(spine_x: &[f64], x1: f64, x2: f64) -> Vec<usize> {
    spine_x
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= x1 && x <= x2)
        .map(|(i, _)| i)
        .collect()
}

/// Population standard deviation via the second moment,
/// √(E(c²) − (E c)²).
pub fn sd_moments(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    (m2 - mean * mean).max(0.0).sqrt()
}

/// Population standard deviation computed in two passes around the mean.
pub fn sd_two_pass(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Measure one realization against a fixed threshold and deterministic
/// reference speed.
pub fn measure_record(
    rec: &RunRecord,
    theta: f64,
    c_det: Option<f64>,
    realization: u64,
) -> SpeedResult {
    let tr = &rec.traces;
    let mut out = SpeedResult {
        c_noisy: None,
        c_rescaled: None,
        propagated: false,
        sequential: false,
        t1: None,
        t2: None,
        realization_seed: realization,
    };
    if rec.diverged {
        return out;
    }
    let window = spines_in_window(&rec.spine_x, tr.x1, tr.x2);
    out.sequential = check_sequential(&rec.fire_log, &window);
    if !check_propagation(&tr.v2, theta) {
        return out;
    }
    let t1 = detect_crossing(&tr.v1, tr.dt, theta).ok().flatten();
    let t2 = detect_crossing(&tr.v2, tr.dt, theta).ok().flatten();
    let (Some(t1), Some(t2)) = (t1, t2) else {
        return out;
    };
    out.t1 = Some(t1);
    out.t2 = Some(t2);
    match measure_speed(tr.x1, tr.x2, t1, t2) {
        Ok(c) => {
            out.propagated = true;
            out.c_noisy = Some(c);
            out.c_rescaled = c_det.map(|cd| c / cd);
        }
        Err(_) => {
            // Crossing order inverted: counted as a propagation failure.
            out.propagated = false;
        }
    }
    out
}

/// Deterministic reference: speed, threshold and the reference record.
pub struct DeterministicReference {
    pub c_det: f64,
    pub theta: f64,
    pub record: RunRecord,
}

/// Run the noise-free system and measure it. The threshold defaults to
/// halfway between rest and the deterministic peak at the far station,
/// high enough that noise alone cannot reach it.
pub fn deterministic_reference(cfg: &ModelConfig) -> Result<DeterministicReference> {
    let record = sim::run_deterministic(cfg, None)?;
    if record.diverged {
        return Err(Error::Diverged { t: record.t_end });
    }
    let tr = &record.traces;
    let rest = tr.v2[0];
    let peak = tr.v2.iter().cloned().fold(f64::MIN, f64::max);
    let theta = cfg.theta_prop.unwrap_or(rest + 0.5 * (peak - rest));
    if !(peak > rest) || !check_propagation(&tr.v2, theta) {
        return Err(Error::NoWave(
            "deterministic run does not reach the far station".into(),
        ));
    }
    let t1 = detect_crossing(&tr.v1, tr.dt, theta)?
        .ok_or_else(|| Error::NoWave("deterministic run misses the near station".into()))?;
    let t2 = detect_crossing(&tr.v2, tr.dt, theta)?
        .ok_or_else(|| Error::NoWave("deterministic run misses the far station".into()))?;
    let window = spines_in_window(&record.spine_x, tr.x1, tr.x2);
    if !check_sequential(&record.fire_log, &window) {
        return Err(Error::NoWave(
            "deterministic run is not a sequential travelling wave".into(),
        ));
    }
    let c_det = measure_speed(tr.x1, tr.x2, t1, t2)?;
    Ok(DeterministicReference {
        c_det,
        theta,
        record,
    })
}

/// Run M independent realizations and aggregate the valid ones. The
/// result depends only on (configuration, master seed, M), not on the
/// number of workers.
pub fn ensemble_speed(cfg: &ModelConfig, m: usize) -> Result<EnsembleOutcome> {
    if m < 1 {
        return Err(Error::Validation {
            field: "realizations",
            msg: "ensemble size must be at least 1".into(),
        });
    }
    let reference = deterministic_reference(cfg)?;
    ensemble_speed_with_reference(cfg, m, &reference)
}

/// Ensemble run against an already-computed deterministic reference.
pub fn ensemble_speed_with_reference(
    cfg: &ModelConfig,
    m: usize,
    reference: &DeterministicReference,
) -> Result<EnsembleOutcome> {
    let run_one = |idx: u64| -> Result<SpeedResult> {
        let rec = sim::run_realization(cfg, idx, None)?;
        Ok(measure_record(
            &rec,
            reference.theta,
            Some(reference.c_det),
            idx,
        ))
    };
    let results: Result<Vec<SpeedResult>> = if cfg.workers == 1 {
        (0..m as u64).map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Validation {
                field: "workers",
                msg: e.to_string(),
            })?;
        pool.install(|| (0..m as u64).into_par_iter().map(run_one).collect())
    };
    let results = results?;

    let valid: Vec<f64> = results
        .iter()
        .filter(|r| r.is_valid())
        .filter_map(|r| r.c_rescaled)
        .collect();
    let n_failed = results.iter().filter(|r| !r.propagated).count();
    let n_nonsequential = results
        .iter()
        .filter(|r| r.propagated && !r.sequential)
        .count();
    if valid.is_empty() {
        return Err(Error::EmptyEnsemble {
            failed: n_failed,
            nonsequential: n_nonsequential,
            total: m,
        });
    }
    let mean_c = valid.iter().sum::<f64>() / valid.len() as f64;
    let sd_c = sd_moments(&valid);
    Ok(EnsembleOutcome {
        stats: EnsembleStats {
            mean_c,
            sd_c,
            n_failed,
            n_nonsequential,
            m,
        },
        c_det: reference.c_det,
        theta: reference.theta,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;

    #[test]
    fn no_crossing_on_a_flat_trace() {
        let trace = vec![0.0; 50];
        assert_eq!(detect_crossing(&trace, 0.1, 0.01).unwrap(), None);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(detect_crossing(&[], 0.1, 0.5).is_err());
    }

    #[test]
    fn step_crossing_is_interpolated() {
        let mut trace = vec![0.0; 10];
        for v in trace.iter_mut().skip(4) {
            *v = 1.0;
        }
        let dt = 0.5;
        let t = detect_crossing(&trace, dt, 0.25).unwrap().unwrap();
        assert!(t > 3.0 * dt && t < 4.0 * dt, "t = {t}");
        assert!((t - (3.0 + 0.25) * dt).abs() < 1e-12);
    }

    #[test]
    fn crossing_at_start() {
        let t = detect_crossing(&[1.0, 1.0], 0.1, 0.5).unwrap().unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn speed_formula_and_errors() {
        assert_eq!(measure_speed(10.0, 20.0, 5.0, 10.0).unwrap(), 2.0);
        assert!(measure_speed(10.0, 20.0, 10.0, 10.0).is_err());
        assert!(measure_speed(10.0, 20.0, 12.0, 10.0).is_err());
        assert!(measure_speed(20.0, 10.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn propagation_check() {
        assert!(check_propagation(&[0.0, 0.4, 0.2], 0.3));
        assert!(!check_propagation(&[0.0, 0.1], 0.3));
        // Degenerate threshold: nonnegative traces always pass.
        assert!(check_propagation(&[0.0, 0.0], 0.0));
    }

    fn ev(spine: usize, t: f64) -> FireEvent {
        FireEvent { spine, t }
    }

    #[test]
    fn sequential_ordering() {
        let log = vec![ev(0, 1.0), ev(1, 2.0), ev(2, 3.0)];
        assert!(check_sequential(&log, &[0, 1, 2]));

        let out_of_order = vec![ev(0, 1.0), ev(2, 1.5), ev(1, 2.0)];
        assert!(!check_sequential(&out_of_order, &[0, 1, 2]));

        // Simultaneous firing fails the strict ordering.
        let tie = vec![ev(0, 1.0), ev(1, 1.0), ev(2, 2.0)];
        assert!(!check_sequential(&tie, &[0, 1, 2]));

        // A silent spine in the window fails too.
        let missing = vec![ev(0, 1.0), ev(2, 2.0)];
        assert!(!check_sequential(&missing, &[0, 1, 2]));

        // Later re-firings do not disturb the first-fire order.
        let refire = vec![ev(0, 1.0), ev(1, 2.0), ev(0, 2.5), ev(2, 3.0)];
        assert!(check_sequential(&refire, &[0, 1, 2]));
    }

    #[test]
    fn window_selection() {
        let xs = vec![0.5, 1.5, 2.5, 3.5];
        assert_eq!(spines_in_window(&xs, 1.0, 3.0), vec![1, 2]);
        assert_eq!(spines_in_window(&xs, 1.5, 2.5), vec![1, 2]);
    }

    #[test]
    fn sd_routes_agree() {
        let xs = [1.02, 0.98, 1.01, 0.97, 1.04, 1.0];
        assert!((sd_moments(&xs) - sd_two_pass(&xs)).abs() < 1e-12);
        assert!(sd_moments(&[2.0, 2.0, 2.0]) == 0.0);
    }

    fn small_sds() -> crate::config::ModelConfig {
        load_config("model = sds\nn_spines = 9\nl = 7.2\nt_final = 30\ndx = 0.1\n").unwrap()
    }

    #[test]
    fn deterministic_ensemble_is_exactly_one() {
        let cfg = small_sds();
        let out = ensemble_speed(&cfg, 5).unwrap();
        assert_eq!(out.stats.m, 5);
        assert_eq!(out.stats.n_failed, 0);
        assert_eq!(out.stats.n_nonsequential, 0);
        assert!((out.stats.mean_c - 1.0).abs() < 1e-12);
        assert_eq!(out.stats.sd_c, 0.0);
        for r in &out.results {
            assert!(r.is_valid());
            assert_eq!(r.c_rescaled, Some(1.0));
            assert!(r.t2.unwrap() > r.t1.unwrap());
        }
    }

    #[test]
    fn deterministic_crossings_increase_along_the_cable() {
        // Record full fields and check the front passes nodes in order.
        let cfg = small_sds();
        let mut times = Vec::new();
        {
            let mut frames: Vec<(f64, Vec<f64>)> = Vec::new();
            let mut obs = |t: f64, snap: &crate::sim::FieldSnapshot<'_>| {
                frames.push((t, snap.v.to_vec()));
            };
            crate::sim::run_deterministic(&cfg, Some(&mut obs)).unwrap();
            let theta = 0.05;
            let n = frames[0].1.len();
            for node in (10..n - 10).step_by(8) {
                let trace: Vec<f64> = frames.iter().map(|(_, v)| v[node]).collect();
                let t = detect_crossing(&trace, cfg.disc.dt, theta).unwrap();
                times.push(t.expect("wave passes every interior node"));
            }
        }
        for w in times.windows(2) {
            assert!(w[0] < w[1], "crossing times not monotone: {times:?}");
        }
    }

    #[test]
    fn parallel_and_serial_ensembles_agree() {
        let mut cfg = small_sds();
        cfg.noise.nu = 0.1;
        cfg.noise.seed = 7;
        cfg.workers = 1;
        let serial = ensemble_speed(&cfg, 8).unwrap();
        cfg.workers = 2;
        let parallel = ensemble_speed(&cfg, 8).unwrap();
        assert_eq!(serial.stats.mean_c.to_bits(), parallel.stats.mean_c.to_bits());
        assert_eq!(serial.stats.sd_c.to_bits(), parallel.stats.sd_c.to_bits());
    }

    #[test]
    fn all_failed_ensemble_is_signalled() {
        let mut cfg = small_sds();
        // An impossible threshold guarantees failure for every realization.
        cfg.theta_prop = Some(5.0);
        cfg.noise.nu = 0.01;
        let err = ensemble_speed(&cfg, 3);
        assert!(err.is_err());
        // The deterministic reference itself cannot cross; the error is a
        // no-wave signal rather than an ensemble aggregate.
        match err.unwrap_err() {
            Error::NoWave(_) | Error::EmptyEnsemble { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }
}
