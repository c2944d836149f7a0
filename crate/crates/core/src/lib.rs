//! Statistics of the RIS-assisted composite channel
//! `h = Σ_k |h1_k||h2_k| + h_d` with Nakagami hops and a Rayleigh direct path:
//! series densities, Monte Carlo sampling, and the checks that tie them
//! together.

pub mod channel;
pub mod dd;
pub mod error;
pub mod moments;
pub mod montecarlo;
pub mod pdf;
pub mod quad;
pub mod special;
pub mod validation;

pub use channel::{effective_u, validate, ChannelParams, ComplexChannelValue, RawChannelParams};
pub use error::{PdfError, ParamError, QuadError, SampleError, SpecialError, ValidationError};
pub use moments::{
    build_inner_sum_table, cascade_moment, coherent_moment, element_weights, weighted_gamma_sum,
    GammaPlacement, InnerSumTable,
};
pub use montecarlo::{
    ecdf, freedman_diaconis_bins, histogram, sample_composite, sample_composite_with_budget,
    sample_nakagami_envelope, stream_composite, BatchSummary, BinRule, Ecdf, EmpiricalDensity,
    HistogramAccumulator, MomentAccumulator, Projection, ProjectionMoments, SampleBatch,
};
pub use pdf::{
    curve, curve_2d, pdf_envelope, pdf_envelope_numeric, pdf_imag, pdf_joint, pdf_phase,
    pdf_phase_numeric, pdf_phase_series, pdf_polar, pdf_real, pdf_real_convolution,
    EnvelopeCoefficients, Evaluator, Method, PdfCurve, PdfKind, PhaseReading, PointDiagnostics,
    PrecisionMode, SeriesConfig, SeriesValue,
};
pub use validation::{
    ks_statistic, normalization_audit, reference_grid, sup_norm_report, validate_point,
    NormalizationAudit, PointReport, PointValidation, ProjectionReport, TabulatedCdf,
    ValidationReport,
};
pub use special::{gamma_ratio, ln_gamma, pochhammer, reg_2f1_at_2, ExtendedAccumulator};

/// Crate version, embedded in every output for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
