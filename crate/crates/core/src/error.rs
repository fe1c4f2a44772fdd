//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Experiment file could not be parsed; carries the 1-based line number.
    #[error("malformed experiment file at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A parameter violated a model invariant.
    #[error("invalid value for `{field}`: {msg}")]
    Validation { field: &'static str, msg: String },

    /// Array lengths disagreed where they must match.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// State became non-finite; the realization is recorded as failed.
    #[error("state diverged (non-finite) at t = {t}")]
    Diverged { t: f64 },

    /// A statistical estimator was handed too few samples.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Every realization of an ensemble failed to propagate.
    #[error("empty ensemble: {failed} failed, {nonsequential} non-sequential of {total}")]
    EmptyEnsemble {
        failed: usize,
        nonsequential: usize,
        total: usize,
    },

    /// The shooting solver found no sign change over its speed bracket.
    #[error("no travelling wave found: {0}")]
    NoWave(String),

    /// A root-finding iteration failed to converge.
    #[error("root-finder did not converge: {0}")]
    RootFind(String),
}
