use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("{function}: argument {arg} outside the domain (must be > 0)")]
    Domain { function: &'static str, arg: f64 },
    #[error("{function}: intermediate magnitude overflows double precision; use the log-domain path")]
    Overflow { function: &'static str },
}

/// Rejection of a [`ChannelParams`](crate::ChannelParams) naming the first violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("n_elements must be ≥ 1")]
    NoElements,
    #[error("{0} must be a positive integer")]
    NotPositiveInteger(&'static str),
    #[error("{0} must be a finite positive real")]
    NotPositive(&'static str),
    #[error("index_sum {index_sum} out of range 0..={max}")]
    IndexSumOutOfRange { index_sum: u32, max: u32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature hit the subdivision limit: estimate {value:e}, error {abs_error:e}")]
    SubdivisionLimit { value: f64, abs_error: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdfError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("invalid series configuration: {0}")]
    Config(String),
    #[error(
        "series did not converge after {blocks} blocks: partial sum {partial_sum:e}, last block {last_block:e}"
    )]
    NonConvergence {
        partial_sum: f64,
        blocks: u32,
        last_block: f64,
    },
    #[error(
        "cancellation alarm after {blocks} blocks: condition {condition:e} exceeds budget {budget:e} (partial sum {partial_sum:e})"
    )]
    CancellationAlarm {
        condition: f64,
        budget: f64,
        blocks: u32,
        partial_sum: f64,
    },
    #[error("phase series is singular at theta = {theta}")]
    Singular { theta: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("value {value:e} is negative beyond the truncation tolerance")]
    Negative { value: f64 },
}

impl PdfError {
    /// True for failures of the series itself (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            PdfError::NonConvergence { .. }
                | PdfError::CancellationAlarm { .. }
                | PdfError::Singular { .. }
                | PdfError::Quadrature(_)
                | PdfError::Special(SpecialError::Overflow { .. })
                | PdfError::Negative { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("requested {requested} samples exceeds the in-memory budget of {budget}; stream instead")]
    OverBudget { requested: usize, budget: usize },
    #[error("count must be ≥ 1")]
    EmptyRequest,
    #[error("histogram needs at least 10 bins, got {0}")]
    TooFewBins(usize),
    #[error("degenerate sample range: all values equal {0}")]
    DegenerateRange(f64),
    #[error("invalid histogram range [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("curve grid does not contain bin center {center} (bin {bin})")]
    GridMismatch { bin: usize, center: f64 },
    #[error(transparent)]
    Pdf(#[from] PdfError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}
