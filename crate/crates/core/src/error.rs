//! Error taxonomy shared by every module in the crate.
//!
//! The variants distinguish three very different failure classes:
//!
//! * **caller mistakes** (`InvalidParameter`, `Domain`, `LengthMismatch`) —
//!   the request itself is malformed;
//! * **mathematical verdicts** (`DivergenceSuspected`, `NoValidStartTime`,
//!   `Truncation`) — the computation ran fine and the answer is "this object
//!   does not exist / is not representable at the requested tolerance";
//! * **numerical resource failures** (`QuadratureBudget`, `StepUnderflow`) —
//!   the algorithm gave up before reaching its target accuracy.
//!
//! Mathematical verdicts carry enough payload (partial values, partial
//! series) for a caller to report something quantitative instead of a bare
//! failure.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All error conditions produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or option value violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation was requested outside the valid domain of the object.
    #[error("domain error: {0}")]
    Domain(String),

    /// An improper integral is (or behaves as) non-convergent.  `partial`
    /// holds the value accumulated over the probed range so callers can
    /// still report a magnitude.
    #[error("divergence suspected: {reason} (partial value {partial:.6e})")]
    DivergenceSuspected { reason: String, partial: f64 },

    /// No time satisfies the gauge start-time thresholds.
    #[error("no valid start time: {0}")]
    NoValidStartTime(String),

    /// The series did not reach the requested tail tolerance within the
    /// hard term cap.  The partially built series stays accessible.
    #[error(
        "series truncation failure: tail estimate {tail_estimate:.3e} > tolerance {tol:.3e} \
         after {k_used} terms"
    )]
    Truncation {
        k_used: usize,
        tail_estimate: f64,
        tol: f64,
        partial: Box<crate::gauge::GaugeSeries>,
    },

    /// Adaptive quadrature exhausted its panel budget before converging.
    #[error("quadrature budget exhausted: {0}")]
    QuadratureBudget(String),

    /// A mode has (numerically) zero reference energy, so ratios are undefined.
    #[error("degenerate mode: {0}")]
    DegenerateMode(String),

    /// The step controller drove the step size below the representable floor.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); problem too stiff for the tolerance")]
    StepUnderflow { t: f64, h: f64 },

    /// Paired slices have inconsistent lengths.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// A requested quantity depends on a column or evaluator that could not
    /// be built for this potential (for example a divergent prerequisite).
    #[error("unavailable: {0}")]
    Unavailable(String),
}

impl Error {
    /// True when the error is a mathematical verdict rather than a caller or
    /// resource failure; verdict errors map to "determinate negative result"
    /// in reporting layers.
    pub fn is_verdict(&self) -> bool {
        matches!(
            self,
            Error::DivergenceSuspected { .. }
                | Error::NoValidStartTime(_)
                | Error::Truncation { .. }
        )
    }
}
