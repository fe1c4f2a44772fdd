//! Single-step SDE schemes over drift/diffusion supplied by the models:
//! Euler-Maruyama for the Ito convention, stochastic Heun (predictor-
//! corrector with the same increment) for Stratonovich.

use crate::error::Error;
use crate::Result;

/// A model exposes its state as a flat vector and supplies pure drift and
/// diffusion evaluations. The diffusion output is a componentwise
/// multiplier (µ + ν·g(sᵢ) on noise-target components, zero elsewhere)
/// that scales the supplied increment.
pub trait SdeSystem {
    fn dim(&self) -> usize;
    fn drift(&self, t: f64, s: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, s: &[f64], out: &mut [f64]);
}

/// Reusable buffers so the steppers stay allocation-free.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    f0: Vec<f64>,
    g0: Vec<f64>,
    pred: Vec<f64>,
    f1: Vec<f64>,
    g1: Vec<f64>,
}

impl Scratch {
    pub fn for_dim(dim: usize) -> Self {
        Scratch {
            f0: vec![0.0; dim],
            g0: vec![0.0; dim],
            pred: vec![0.0; dim],
            f1: vec![0.0; dim],
            g1: vec![0.0; dim],
        }
    }

    fn ensure(&mut self, dim: usize) {
        if self.f0.len() != dim {
            *self = Scratch::for_dim(dim);
        }
    }
}

fn check_shape(state: &[f64], dw: &[f64]) -> Result<()> {
    if state.len() != dw.len() {
        return Err(Error::Shape {
            what: "noise increment",
            expected: state.len(),
            got: dw.len(),
        });
    }
    Ok(())
}

/// Deterministic explicit Euler step (no noise term, no random draw).
pub fn euler_step<S: SdeSystem>(sys: &S, t: f64, state: &mut [f64], dt: f64, scratch: &mut Scratch) {
    scratch.ensure(state.len());
    sys.drift(t, state, &mut scratch.f0);
    for (s, f) in state.iter_mut().zip(&scratch.f0) {
        *s += dt * f;
    }
}

/// Euler-Maruyama: left-endpoint evaluation of drift and diffusion,
/// s' = s + f(t,s)·dt + g(t,s)·dW.
pub fn em_step<S: SdeSystem>(
    sys: &S,
    t: f64,
    state: &mut [f64],
    dw: &[f64],
    dt: f64,
    scratch: &mut Scratch,
) -> Result<()> {
    check_shape(state, dw)?;
    scratch.ensure(state.len());
    sys.drift(t, state, &mut scratch.f0);
    sys.diffusion(t, state, &mut scratch.g0);
    for i in 0..state.len() {
        state[i] += dt * scratch.f0[i] + scratch.g0[i] * dw[i];
    }
    Ok(())
}

/// Stochastic Heun: an Euler-Maruyama predictor followed by a corrector
/// that averages both drift and diffusion between the two endpoints,
/// reusing the same increment. Converges to the Stratonovich solution.
pub fn heun_step<S: SdeSystem>(
    sys: &S,
    t: f64,
    state: &mut [f64],
    dw: &[f64],
    dt: f64,
    scratch: &mut Scratch,
) -> Result<()> {
    check_shape(state, dw)?;
    scratch.ensure(state.len());
    sys.drift(t, state, &mut scratch.f0);
    sys.diffusion(t, state, &mut scratch.g0);
    for i in 0..state.len() {
        scratch.pred[i] = state[i] + dt * scratch.f0[i] + scratch.g0[i] * dw[i];
    }
    let t1 = t + dt;
    sys.drift(t1, &scratch.pred, &mut scratch.f1);
    sys.diffusion(t1, &scratch.pred, &mut scratch.g1);
    for i in 0..state.len() {
        state[i] += 0.5 * dt * (scratch.f0[i] + scratch.f1[i])
            + 0.5 * (scratch.g0[i] + scratch.g1[i]) * dw[i];
    }
    Ok(())
}
