use thiserror::Error;

/// Errors surfaced by the lab.
///
/// Numerical *verdicts* (an escaping trajectory, a failed inequality margin)
/// are ordinary report data, not errors; only structural failures of an
/// operation land here.
#[derive(Debug, Clone, Error)]
pub enum LabError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("weight scales violate the required ordering (A = {a}, B = {b}; need A >= B^2, B >= 2)")]
    ScaleOrderViolation { a: f64, b: f64 },

    #[error("eigensolver failed to converge: {0}")]
    NonConvergence(String),

    #[error("field amplitude {amplitude} exceeded the escape ceiling {ceiling} at t = {t}")]
    BlowupDetected { t: f64, amplitude: f64, ceiling: f64 },

    #[error("need at least {needed} uniformly spaced samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("bracket endpoints both exit on the same side ({side:+}); not a crossing bracket")]
    BracketFailure { side: i32 },

    #[error("boundary shell norm {norm} exceeded the contamination threshold {threshold} at t = {t}")]
    BoundaryContamination { t: f64, norm: f64, threshold: f64 },
}
