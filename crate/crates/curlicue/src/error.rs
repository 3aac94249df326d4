use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the operation's domain, e.g. alpha outside (0, 1].
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid argument (empty prefix, zero digit budget, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An index past the end of the available digits/entries/levels.
    #[error("range error: {0}")]
    Range(String),

    /// The finite expansion of a rational ran out before the requested step.
    #[error("expansion exhausted: {0}")]
    Exhausted(String),

    /// The expansion ran out before the R-denominators exceeded N.
    #[error("denominator budget exceeded: {0}")]
    DenominatorBudget(String),

    /// A summation would exceed the configured term budget.
    #[error("term budget exceeded: {0}")]
    Budget(String),

    /// An internal cross-check between two exact routes failed.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// Too many samples had to be skipped for the experiment to be trusted.
    #[error("statistical abort: {0}")]
    StatisticalAbort(String),
}
