//! Stochastic driving terms: white, Ornstein-Uhlenbeck and spatially
//! correlated Q-Wiener increments, with reproducible seeding.
//!
//! The spatially correlated field is built as a truncated spectral sum
//! over the Neumann cosine modes of the domain,
//! W(x,t) = Σ_j w_j^{1/2} e_j(x) b_j(t), and is white in time. Its spatial
//! covariance is the Gaussian kernel F_c(x−x') = (1/2ζ)exp(−π(x−x')²/4ζ²),
//! which integrates to one so the ζ → 0 limit recovers space-time white
//! noise.

use crate::error::Error;
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    OuTemporal,
    QWienerSpatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    Cable,
    Spines,
}

/// Stochastic-integral convention; decides the numerical scheme
/// (Euler-Maruyama for Ito, stochastic Heun for Stratonovich).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    Ito,
    Stratonovich,
}

/// Noise settings of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    /// Additive intensity µ.
    pub mu: f64,
    /// Multiplicative intensity ν.
    pub nu: f64,
    /// Ornstein-Uhlenbeck mean-reversion rate β.
    pub beta: f64,
    /// Ornstein-Uhlenbeck long-run mean θ.
    pub theta_ou: f64,
    /// Ornstein-Uhlenbeck volatility σ.
    pub sigma: f64,
    /// Spatial correlation length ζ of the Q-Wiener field.
    pub zeta: f64,
    /// Spectral truncation index J; `None` picks the smallest J whose
    /// weight falls below 1e-8.
    pub j_modes: Option<usize>,
    pub interpretation: Interpretation,
    pub target: NoiseTarget,
    pub seed: u64,
    /// Drive every site with one shared path instead of independent ones
    /// (white or Ornstein-Uhlenbeck kinds only).
    pub shared_path: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            kind: NoiseKind::White,
            mu: 0.0,
            nu: 0.0,
            beta: 1.0,
            theta_ou: 0.0,
            sigma: 1.0,
            zeta: 2.4,
            j_modes: None,
            interpretation: Interpretation::Ito,
            target: NoiseTarget::Spines,
            seed: 0,
        shared_path: false,
        }
    }
}

impl NoiseConfig {
    /// A run is deterministic when both intensities vanish.
    pub fn is_off(&self) -> bool {
        self.mu == 0.0 && self.nu == 0.0
    }
}

/// State of one Ornstein-Uhlenbeck path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUState {
    pub k: f64,
    pub beta: f64,
    pub theta_ou: f64,
    pub sigma: f64,
}

impl OUState {
    pub fn new(beta: f64, theta_ou: f64, sigma: f64) -> Self {
        OUState {
            k: theta_ou,
            beta,
            theta_ou,
            sigma,
        }
    }
}

/// Advance dK = β(θ − K)dt + σ db by one Euler-Maruyama step.
pub fn ou_step<R: Rng>(s: &OUState, dt: f64, rng: &mut R) -> OUState {
    debug_assert!(dt > 0.0);
    let xi: f64 = rng.sample(StandardNormal);
    OUState {
        k: s.k + s.beta * (s.theta_ou - s.k) * dt + s.sigma * dt.sqrt() * xi,
        ..*s
    }
}

/// Eigenvalues of the covariance operator as published for this
/// construction: λ_j = exp(−π j² ζ² / 2L²).
pub fn lambda_j(j: usize, zeta: f64, l: f64) -> f64 {
    let j = j as f64;
    (-PI * j * j * zeta * zeta / (2.0 * l * l)).exp()
}

/// Spatial correlation kernel F_c(x) = (1/2ζ) exp(−πx²/4ζ²).
pub fn correlation_fn(x: f64, zeta: f64) -> f64 {
    debug_assert!(zeta > 0.0);
    (1.0 / (2.0 * zeta)) * (-PI * x * x / (4.0 * zeta * zeta)).exp()
}

/// Spectral weight used when sampling the field. The realized covariance
/// of the cosine sum is fixed by the weights through the kernel's Fourier
/// transform at the mode wavenumber πj/L, so matching F_c requires
/// exp(−πj²ζ²/L²) — which is `lambda_j` evaluated at √2·ζ.
pub fn sampling_weight(j: usize, zeta: f64, l: f64) -> f64 {
    let j = j as f64;
    (-PI * j * j * zeta * zeta / (l * l)).exp()
}

/// Smallest truncation index whose sampling weight drops below 1e-8.
pub fn default_truncation(zeta: f64, l: f64) -> usize {
    let j = (l / zeta) * (8.0 * 10f64.ln() / PI).sqrt();
    (j.ceil() as usize).max(1)
}

/// Per-site increment samples covering one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub values: Vec<f64>,
    pub dt: f64,
}

/// Independent per-site white increments N(0, dt·var_scale). Pass
/// `var_scale = 1` for discrete sites (one Brownian path per spine) and
/// `var_scale = 1/dx` for space-time white noise sampled on a grid.
pub fn white_increment<R: Rng>(n: usize, dt: f64, var_scale: f64, rng: &mut R) -> NoiseIncrement {
    debug_assert!(dt > 0.0);
    let sd = (dt * var_scale).sqrt();
    let values = (0..n)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    NoiseIncrement { values, dt }
}

/// One N(0, dt) sample copied to every site: a noise path constant in space.
pub fn white_increment_shared<R: Rng>(n: usize, dt: f64, rng: &mut R) -> NoiseIncrement {
    debug_assert!(dt > 0.0);
    let v = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
    NoiseIncrement {
        values: vec![v; n],
        dt,
    }
}

/// Truncated Q-Wiener field sampled at a fixed set of positions.
#[derive(Debug, Clone)]
pub struct QWienerState {
    pub zeta: f64,
    pub l: f64,
    /// Truncation index J; modes run j = 0..=J.
    pub j_max: usize,
    /// Brownian accumulators b_j(t).
    pub brownians: Vec<f64>,
    /// Published eigenvalues λ_j of Q at this ζ.
    pub eigen: Vec<f64>,
    /// √weight_j · e_j(x_i), row-major (J+1) × n_sites.
    modes: Vec<f64>,
    n_sites: usize,
}

impl QWienerState {
    /// Precompute the mode table on the given sites. `j_max = None`
    /// truncates where the spectral weight falls below 1e-8.
    pub fn new(zeta: f64, l: f64, sites: &[f64], j_max: Option<usize>) -> Self {
        assert!(zeta > 0.0 && l > 0.0, "q-wiener noise needs zeta > 0 and l > 0");
        let j_max = j_max.unwrap_or_else(|| default_truncation(zeta, l));
        let n_sites = sites.len();
        let mut modes = Vec::with_capacity((j_max + 1) * n_sites);
        for j in 0..=j_max {
            let w = sampling_weight(j, zeta, l).sqrt();
            if j == 0 {
                let e0 = (1.0 / l).sqrt();
                modes.extend(sites.iter().map(|_| w * e0));
            } else {
                let amp = w * (2.0 / l).sqrt();
                let k = PI * j as f64 / l;
                modes.extend(sites.iter().map(|&x| amp * (k * x).cos()));
            }
        }
        QWienerState {
            zeta,
            l,
            j_max,
            brownians: vec![0.0; j_max + 1],
            eigen: (0..=j_max).map(|j| lambda_j(j, zeta, l)).collect(),
            modes,
            n_sites,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Spectral weights actually used for sampling.
    pub fn weights(&self) -> Vec<f64> {
        (0..=self.j_max)
            .map(|j| sampling_weight(j, self.zeta, self.l))
            .collect()
    }

    /// Advance every Brownian accumulator by √dt·ξ_j and write the field
    /// increment ΔW(x_i) = Σ_j √w_j e_j(x_i) Δb_j into `out`.
    pub fn increment<R: Rng>(&mut self, dt: f64, rng: &mut R, out: &mut [f64]) {
        debug_assert!(dt > 0.0);
        assert_eq!(out.len(), self.n_sites, "increment buffer length");
        out.fill(0.0);
        let sq = dt.sqrt();
        for (j, b) in self.brownians.iter_mut().enumerate() {
            let db = sq * rng.sample::<f64, _>(StandardNormal);
            *b += db;
            let row = &self.modes[j * self.n_sites..(j + 1) * self.n_sites];
            for (o, m) in out.iter_mut().zip(row) {
                *o += m * db;
            }
        }
    }

    /// Theoretical variance of ΔW(x_i)/√dt at each site from the truncated
    /// sum itself (useful to separate truncation from sampling error).
    pub fn spectral_variance(&self) -> Vec<f64> {
        let mut var = vec![0.0; self.n_sites];
        for j in 0..=self.j_max {
            let row = &self.modes[j * self.n_sites..(j + 1) * self.n_sites];
            for (v, m) in var.iter_mut().zip(row) {
                *v += m * m;
            }
        }
        var
    }
}

/// Unbiased sample covariance per site pair, row-major n×n.
pub fn estimate_covariance(samples: &[NoiseIncrement]) -> Result<Vec<f64>> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance estimation needs at least 2 samples, got {m}"
        )));
    }
    let n = samples[0].values.len();
    for s in samples {
        if s.values.len() != n {
            return Err(Error::Shape {
                what: "covariance samples",
                expected: n,
                got: s.values.len(),
            });
        }
    }
    let mut mean = vec![0.0; n];
    for s in samples {
        for (acc, v) in mean.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    for acc in &mut mean {
        *acc /= m as f64;
    }
    let mut cov = vec![0.0; n * n];
    for s in samples {
        for i in 0..n {
            let di = s.values[i] - mean[i];
            for k in i..n {
                cov[i * n + k] += di * (s.values[k] - mean[k]);
            }
        }
    }
    let norm = 1.0 / (m as f64 - 1.0);
    for i in 0..n {
        for k in i..n {
            let v = cov[i * n + k] * norm;
            cov[i * n + k] = v;
            cov[k * n + i] = v;
        }
    }
    Ok(cov)
}

/// Generator of the per-step increments for one realization. A source is
/// single-threaded; parallel realizations each own their own source.
pub struct NoiseSource {
    kind: NoiseKind,
    shared_path: bool,
    var_scale: f64,
    ou: Vec<OUState>,
    qw: Option<QWienerState>,
    rng: ChaCha8Rng,
    n_sites: usize,
    draws: u64,
}

impl NoiseSource {
    /// `sites` are the positions receiving noise; `var_scale` is the
    /// per-site variance factor for white noise (1/dx on a grid, 1 for
    /// discrete spines); `l` is the domain length for the spectral field.
    pub fn new(cfg: &NoiseConfig, sites: &[f64], var_scale: f64, l: f64, rng: ChaCha8Rng) -> Self {
        let n_sites = sites.len();
        let ou = match cfg.kind {
            NoiseKind::OuTemporal => {
                let n = if cfg.shared_path { 1 } else { n_sites };
                vec![OUState::new(cfg.beta, cfg.theta_ou, cfg.sigma); n]
            }
            _ => Vec::new(),
        };
        let qw = match cfg.kind {
            NoiseKind::QWienerSpatial => Some(QWienerState::new(cfg.zeta, l, sites, cfg.j_modes)),
            _ => None,
        };
        NoiseSource {
            kind: cfg.kind,
            shared_path: cfg.shared_path,
            var_scale,
            ou,
            qw,
            rng,
            n_sites,
            draws: 0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Normal draws consumed so far (for stream-position accounting).
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Write the per-site increments for one step of length dt into `out`.
    pub fn fill_increment(&mut self, dt: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_sites, "increment buffer length");
        match self.kind {
            NoiseKind::White => {
                if self.shared_path {
                    let v = dt.sqrt() * self.rng.sample::<f64, _>(StandardNormal);
                    self.draws += 1;
                    out.fill(v);
                } else {
                    let sd = (dt * self.var_scale).sqrt();
                    for o in out.iter_mut() {
                        *o = sd * self.rng.sample::<f64, _>(StandardNormal);
                    }
                    self.draws += self.n_sites as u64;
                }
            }
            NoiseKind::OuTemporal => {
                if self.shared_path {
                    let prev = self.ou[0].k;
                    self.ou[0] = ou_step(&self.ou[0], dt, &mut self.rng);
                    self.draws += 1;
                    out.fill(self.ou[0].k - prev);
                } else {
                    for (o, s) in out.iter_mut().zip(self.ou.iter_mut()) {
                        let prev = s.k;
                        *s = ou_step(s, dt, &mut self.rng);
                        *o = s.k - prev;
                    }
                    self.draws += self.n_sites as u64;
                }
            }
            NoiseKind::QWienerSpatial => {
                let qw = self.qw.as_mut().expect("q-wiener state present");
                qw.increment(dt, &mut self.rng, out);
                self.draws += qw.j_max as u64 + 1;
            }
        }
    }

    /// Allocating variant of [`fill_increment`].
    pub fn increment(&mut self, dt: f64) -> NoiseIncrement {
        let mut values = vec![0.0; self.n_sites];
        self.fill_increment(dt, &mut values);
        NoiseIncrement { values, dt }
    }
}
