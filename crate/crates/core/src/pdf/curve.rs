use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::PdfError;

use super::{Evaluator, SeriesConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdfKind {
    Real,
    Imag,
    Joint,
    Polar,
    Envelope,
    Phase,
}

impl PdfKind {
    pub fn is_bivariate(self) -> bool {
        matches!(self, PdfKind::Joint | PdfKind::Polar)
    }

    pub fn name(self) -> &'static str {
        match self {
            PdfKind::Real => "real",
            PdfKind::Imag => "imag",
            PdfKind::Joint => "joint",
            PdfKind::Polar => "polar",
            PdfKind::Envelope => "envelope",
            PdfKind::Phase => "phase",
        }
    }
}

/// How a point's reported value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Closed,
    /// Quadrature of the real-part mixture.
    Convolution,
    /// Quadrature marginalization of the polar density.
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub terms_used: u64,
    /// Last series block relative to the sum; NaN when the series failed.
    pub tail_estimate: f64,
    pub method: Method,
    /// Whether the series converged at this point (true for closed forms).
    pub converged: bool,
    /// Value before clamping negatives to zero.
    pub raw_value: f64,
    pub clamped: bool,
    /// Series value when it converged.
    pub series_value: Option<f64>,
    /// Quadrature cross-check, where one was computed.
    pub numeric_value: Option<f64>,
    /// Series and quadrature differ beyond tolerance.
    pub disagreement: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdfCurve {
    pub which: PdfKind,
    pub grid: Vec<f64>,
    /// Second coordinate for the bivariate densities.
    pub grid2: Option<Vec<f64>>,
    pub values: Vec<f64>,
    pub params: ChannelParams,
    pub config: SeriesConfig,
    pub diagnostics: Vec<PointDiagnostics>,
}

/// Relative agreement required between the envelope series and its
/// marginalization, checked where the density exceeds `ENVELOPE_FLOOR`.
pub const ENVELOPE_AGREEMENT: f64 = 1e-4;
pub const ENVELOPE_FLOOR: f64 = 1e-6;

fn closed(value: f64) -> PointDiagnostics {
    PointDiagnostics {
        terms_used: 0,
        tail_estimate: 0.0,
        method: Method::Closed,
        converged: true,
        raw_value: value,
        clamped: false,
        series_value: None,
        numeric_value: None,
        disagreement: false,
        error: None,
    }
}

fn finish(mut d: PointDiagnostics) -> (f64, PointDiagnostics) {
    let v = if d.raw_value < 0.0 {
        d.clamped = true;
        0.0
    } else {
        d.raw_value
    };
    (v, d)
}

impl Evaluator {
    /// Real part under the curve policy: series, else convolution.
    pub fn real_point(&self, x: f64) -> Result<PointDiagnostics, PdfError> {
        match self.real_series(x) {
            Ok(v) => Ok(PointDiagnostics {
                terms_used: v.terms,
                tail_estimate: v.tail_estimate,
                method: Method::Series,
                converged: true,
                raw_value: v.value,
                clamped: false,
                series_value: Some(v.value),
                numeric_value: None,
                disagreement: false,
                error: None,
            }),
            Err(e) if e.is_numeric() => {
                let c = self.real_convolution(x)?;
                Ok(PointDiagnostics {
                    terms_used: 0,
                    tail_estimate: f64::NAN,
                    method: Method::Convolution,
                    converged: false,
                    raw_value: c,
                    clamped: false,
                    series_value: None,
                    numeric_value: Some(c),
                    disagreement: false,
                    error: Some(e.to_string()),
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn envelope_point(&self, r: f64) -> Result<PointDiagnostics, PdfError> {
        let numeric = self.envelope_numeric(r)?;
        match self.envelope_series(r) {
            Ok(v) => {
                let disagreement = numeric > ENVELOPE_FLOOR
                    && (v.value - numeric).abs() > ENVELOPE_AGREEMENT * numeric;
                Ok(PointDiagnostics {
                    terms_used: v.terms,
                    tail_estimate: v.tail_estimate,
                    method: Method::Series,
                    converged: true,
                    raw_value: v.value,
                    clamped: false,
                    series_value: Some(v.value),
                    numeric_value: Some(numeric),
                    disagreement,
                    error: None,
                })
            }
            Err(e) if e.is_numeric() => Ok(PointDiagnostics {
                terms_used: 0,
                tail_estimate: f64::NAN,
                method: Method::Numeric,
                converged: false,
                raw_value: numeric,
                clamped: false,
                series_value: None,
                numeric_value: Some(numeric),
                disagreement: false,
                error: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    }

    pub fn phase_point(&self, theta: f64) -> Result<PointDiagnostics, PdfError> {
        let numeric = self.phase_numeric(theta)?;
        match self.phase_series(theta) {
            Ok(v) => {
                let disagreement = (v.value - numeric).abs() > self.config.rel_tol * numeric.abs();
                Ok(PointDiagnostics {
                    terms_used: v.terms,
                    tail_estimate: v.tail_estimate,
                    method: if disagreement { Method::Numeric } else { Method::Series },
                    converged: true,
                    raw_value: if disagreement { numeric } else { v.value },
                    clamped: false,
                    series_value: Some(v.value),
                    numeric_value: Some(numeric),
                    disagreement,
                    error: None,
                })
            }
            Err(e) if e.is_numeric() => Ok(PointDiagnostics {
                terms_used: 0,
                tail_estimate: f64::NAN,
                method: Method::Numeric,
                converged: false,
                raw_value: numeric,
                clamped: false,
                series_value: None,
                numeric_value: Some(numeric),
                disagreement: false,
                error: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    }

    fn point(&self, which: PdfKind, a: f64, b: f64) -> Result<PointDiagnostics, PdfError> {
        match which {
            PdfKind::Real => self.real_point(a),
            PdfKind::Imag => Ok(closed(self.imag(a))),
            PdfKind::Envelope => self.envelope_point(a),
            PdfKind::Phase => self.phase_point(a),
            PdfKind::Joint => {
                let mut d = self.real_point(a)?;
                d.raw_value = d.raw_value.max(0.0) * self.imag(b);
                Ok(d)
            }
            PdfKind::Polar => {
                if !(a >= 0.0) {
                    return Err(PdfError::Domain(format!("r = {a} must be ≥ 0")));
                }
                if !(b > -std::f64::consts::PI && b <= std::f64::consts::PI) {
                    return Err(PdfError::Domain(format!("theta = {b} outside (-π, π]")));
                }
                let mut d = self.real_point(a * b.cos())?;
                d.raw_value = a * d.raw_value.max(0.0) * self.imag(a * b.sin());
                Ok(d)
            }
        }
    }

    /// Evaluates every point; per-point failures land in the diagnostics.
    pub fn curve_points(&self, which: PdfKind, grid: &[f64], grid2: Option<&[f64]>) -> PdfCurve {
        let results: Vec<(f64, PointDiagnostics)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let b = grid2.map_or(0.0, |g| g[i]);
                match self.point(which, grid[i], b) {
                    Ok(d) => finish(d),
                    Err(e) => (
                        f64::NAN,
                        PointDiagnostics {
                            terms_used: 0,
                            tail_estimate: f64::NAN,
                            method: Method::Numeric,
                            converged: false,
                            raw_value: f64::NAN,
                            clamped: false,
                            series_value: None,
                            numeric_value: None,
                            disagreement: false,
                            error: Some(e.to_string()),
                        },
                    ),
                }
            })
            .collect();
        let (values, diagnostics) = results.into_iter().unzip();
        PdfCurve {
            which,
            grid: grid.to_vec(),
            grid2: grid2.map(<[f64]>::to_vec),
            values,
            params: self.params,
            config: self.config,
            diagnostics,
        }
    }
}

/// Evaluates a univariate density on a strictly increasing grid.
pub fn curve(
    which: PdfKind,
    grid: &[f64],
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<PdfCurve, PdfError> {
    if which.is_bivariate() {
        return Err(PdfError::Domain(format!("{} needs a two-dimensional grid", which.name())));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PdfError::Domain("grid must be strictly increasing".into()));
    }
    let ev = Evaluator::new(params, config)?;
    Ok(ev.curve_points(which, grid, None))
}

/// Evaluates a bivariate density on lexicographically increasing pairs.
pub fn curve_2d(
    which: PdfKind,
    points: &[(f64, f64)],
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<PdfCurve, PdfError> {
    if !which.is_bivariate() {
        return Err(PdfError::Domain(format!("{} takes a one-dimensional grid", which.name())));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1))) {
        return Err(PdfError::Domain("grid must be strictly increasing".into()));
    }
    let ev = Evaluator::new(params, config)?;
    let (a, b): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    Ok(ev.curve_points(which, &a, Some(&b)))
}

impl PdfCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Points where the series did not converge.
    pub fn unconverged(&self) -> usize {
        self.diagnostics.iter().filter(|d| !d.converged).count()
    }

    /// Frozen columns: `abscissa[,abscissa2],value,terms_used,tail_estimate`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let two = self.grid2.is_some();
        if two {
            writeln!(out, "abscissa,abscissa2,value,terms_used,tail_estimate")?;
        } else {
            writeln!(out, "abscissa,value,terms_used,tail_estimate")?;
        }
        for (i, (&x, &v)) in self.grid.iter().zip(&self.values).enumerate() {
            let d = &self.diagnostics[i];
            if let Some(g2) = &self.grid2 {
                writeln!(out, "{x},{},{v},{},{}", g2[i], d.terms_used, d.tail_estimate)?;
            } else {
                writeln!(out, "{x},{v},{},{}", d.terms_used, d.tail_estimate)?;
            }
        }
        Ok(())
    }

    /// JSON with the curve, its diagnostics and full provenance.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "artifact_version": crate::VERSION,
            "which": self.which,
            "params": self.params,
            "config": self.config,
            "grid": self.grid,
            "grid2": self.grid2,
            "values": self.values.iter().map(|v| finite_or_null(*v)).collect::<Vec<_>>(),
            "diagnostics": self.diagnostics.iter().map(|d| serde_json::json!({
                "terms_used": d.terms_used,
                "tail_estimate": finite_or_null(d.tail_estimate),
                "method": d.method,
                "converged": d.converged,
                "raw_value": finite_or_null(d.raw_value),
                "clamped": d.clamped,
                "series_value": d.series_value.map(finite_or_null),
                "numeric_value": d.numeric_value.map(finite_or_null),
                "disagreement": d.disagreement,
                "error": d.error,
            })).collect::<Vec<_>>(),
        })
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::Value::Null
    }
}
