//! Densities of the composite channel: real part, imaginary part, joint
//! Cartesian and polar forms, envelope and phase.
//!
//! The series forms are evaluated with block-wise truncation and a
//! cancellation alarm. Each series also has a quadrature counterpart
//! (`*_convolution`, `*_numeric`) built on the same moment law, which serves
//! as a cross-check and as the fallback used by [`curve`].

mod curve;
mod kernel;
mod series;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::dd::{Dd, Scaled};
use crate::error::PdfError;
use crate::moments::{GammaPlacement, InnerSumTable};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};

pub use curve::{curve, curve_2d, Method, PdfCurve, PdfKind, PointDiagnostics};
pub use kernel::rayleigh_gauss;

use kernel::Mixture;
use series::{Component, SeriesInput};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionMode {
    /// Terms rounded to f64 and summed in f64.
    Standard,
    /// Terms and sums carried in double-double.
    #[default]
    Extended,
}

impl PrecisionMode {
    /// Significant decimal digits the accumulator can absorb.
    pub fn digits(self) -> f64 {
        match self {
            PrecisionMode::Standard => 14.0,
            PrecisionMode::Extended => 30.0,
        }
    }
}

/// Coefficients of the envelope series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeCoefficients {
    /// Re-derived angular integral, `2 (2^q Γ(q+½))² ₂F̃₁(-2p, q+½; 2q+1; 2)`
    /// with the `1/q!` of the exponential and prefactor `r/(πσ²)`.
    #[default]
    Derived,
    /// `2^q Γ(q+½) ₂F̃₁(...)` without `1/q!`, prefactor `r/(πσ)`.
    AsPrinted,
}

/// Reading of the phase series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReading {
    /// `1/(2π sin²θ) Σ T(ℓ,p; σ cot|θ|) Γ(p/2+1)`.
    #[default]
    SineCorrected,
    /// `1/(2π) Σ T(ℓ,p; cot θ) Γ(p/2+1)`.
    AsPrinted,
}

impl PhaseReading {
    pub fn name(self) -> &'static str {
        match self {
            PhaseReading::SineCorrected => "sine_corrected",
            PhaseReading::AsPrinted => "as_printed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Target relative tail error.
    pub rel_tol: f64,
    pub max_ell: u32,
    pub max_q: u32,
    pub precision_mode: PrecisionMode,
    #[serde(default)]
    pub gamma_placement: GammaPlacement,
    #[serde(default)]
    pub envelope_coefficients: EnvelopeCoefficients,
    #[serde(default)]
    pub phase_reading: PhaseReading,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            rel_tol: 1e-6,
            max_ell: 400,
            max_q: 2000,
            precision_mode: PrecisionMode::Extended,
            gamma_placement: GammaPlacement::PerMultiIndex,
            envelope_coefficients: EnvelopeCoefficients::Derived,
            phase_reading: PhaseReading::SineCorrected,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<(), PdfError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(PdfError::Config(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_ell < 1 || self.max_q < 1 {
            return Err(PdfError::Config("max_ell and max_q must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Largest tolerated `Σ|term| / |Σ term|`.
    pub fn cancellation_budget(&self) -> f64 {
        10f64.powf(self.precision_mode.digits() + self.rel_tol.log10())
    }
}

/// A converged series evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    /// Density value, before any clamping.
    pub value: f64,
    /// `ℓ`-blocks summed.
    pub blocks: u32,
    pub terms: u64,
    /// Last block relative to the sum.
    pub tail_estimate: f64,
    /// `Σ|term| / |Σ term|`.
    pub condition: f64,
}

/// Shared precomputation for one parameter set.
#[derive(Clone, Debug)]
pub struct Evaluator {
    params: ChannelParams,
    config: SeriesConfig,
    table: InnerSumTable,
    comps: Vec<Component>,
    mixture: Mixture,
    quad: QuadOptions,
}

impl Evaluator {
    pub fn new(params: &ChannelParams, config: &SeriesConfig) -> Result<Self, PdfError> {
        let params = crate::channel::validate(*params)?;
        config.validate()?;
        let table = InnerSumTable::new(&params, config.gamma_placement);
        let comps: Vec<Component> = table
            .components()
            .into_iter()
            .map(|(u, w)| Component::new(u, w))
            .collect();
        let mixture = Mixture::new(&comps);
        Ok(Evaluator {
            params,
            config: *config,
            table,
            comps,
            mixture,
            quad: QuadOptions::with_tol(1e-16, 1e-10),
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn config(&self) -> &SeriesConfig {
        &self.config
    }

    pub fn table(&self) -> &InnerSumTable {
        &self.table
    }

    fn sigma_sq(&self) -> f64 {
        self.params.sigma_h_sq
    }

    fn input(&self, x: f64, include_odd: bool, bound: f64) -> SeriesInput<'_> {
        SeriesInput {
            comps: &self.comps,
            s: self.params.cascade_scale(),
            sigma_sq: self.sigma_sq(),
            x,
            include_odd,
            bound,
        }
    }

    fn check_sign(&self, mut v: SeriesValue) -> Result<SeriesValue, PdfError> {
        if v.value < -self.config.rel_tol {
            return Err(PdfError::Negative { value: v.value });
        }
        if v.value == -0.0 {
            v.value = 0.0;
        }
        Ok(v)
    }

    /// Real-part density from the series.
    pub fn real_series(&self, x: f64) -> Result<SeriesValue, PdfError> {
        if !x.is_finite() {
            return Err(PdfError::Domain(format!("x = {x}")));
        }
        let mut v = series::evaluate(&self.config, &self.input(x, true, 1.0), |_| Ok(Scaled::new(Dd::ONE)))?;
        v.value /= (PI * self.sigma_sq()).sqrt();
        self.check_sign(v)
    }

    /// Real-part density by quadrature over the Gamma mixture.
    pub fn real_convolution(&self, x: f64) -> Result<f64, PdfError> {
        if !x.is_finite() {
            return Err(PdfError::Domain(format!("x = {x}")));
        }
        kernel::real_by_convolution(
            &self.mixture,
            self.params.cascade_scale(),
            self.sigma_sq(),
            x,
            self.quad,
        )
    }

    /// Imaginary-part density; exact Gaussian.
    pub fn imag(&self, y: f64) -> f64 {
        pdf_imag(y, &self.params)
    }

    fn polar_from_real<F>(&self, r: f64, theta: f64, real: F) -> Result<f64, PdfError>
    where
        F: Fn(f64) -> Result<f64, PdfError>,
    {
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(r * real(r * theta.cos())? * self.imag(r * theta.sin()))
    }

    /// Envelope density from the triple series.
    pub fn envelope_series(&self, r: f64) -> Result<SeriesValue, PdfError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(PdfError::Domain(format!("r = {r} must be ≥ 0")));
        }
        if r == 0.0 {
            return Ok(SeriesValue {
                value: 0.0,
                blocks: 0,
                terms: 0,
                tail_estimate: 0.0,
                condition: 1.0,
            });
        }
        let sigma_sq = self.sigma_sq();
        let z = r * r / sigma_sq;
        let printed = self.config.envelope_coefficients == EnvelopeCoefficients::AsPrinted;
        let budget = self.config.cancellation_budget();
        let inner_tol = self.config.rel_tol * 1e-4;
        let max_q = self.config.max_q;
        // c(p') = (½)_{p'} / p'!
        let mut c = Dd::ONE;
        let mut next_pp = 0u32;
        let angular = |p: u32| -> Result<Scaled, PdfError> {
            if p % 2 == 1 {
                return Ok(Scaled::ZERO);
            }
            let pp = p / 2;
            debug_assert_eq!(pp, next_pp);
            if pp > 0 {
                c = c.mul_f64(pp as f64 - 0.5).div_f64(pp as f64);
            }
            next_pp = pp + 1;
            let mut t = if printed {
                c * Dd::SQRT_PI
            } else {
                (c * Dd::PI).mul_f64(2.0)
            };
            let mut sum = Dd::ZERO;
            let mut abs = 0.0;
            let mut streak = 0;
            for q in 0..=max_q {
                sum += t;
                abs += t.hi.abs();
                if t.hi.abs() <= inner_tol * sum.hi.abs() {
                    streak += 1;
                    if streak >= 3 {
                        let cond = abs / sum.hi.abs();
                        if cond > budget {
                            return Err(PdfError::CancellationAlarm {
                                condition: cond,
                                budget,
                                blocks: q + 1,
                                partial_sum: sum.to_f64(),
                            });
                        }
                        return Ok(Scaled::new(sum));
                    }
                } else {
                    streak = 0;
                }
                let qf = q as f64;
                let ratio = if printed {
                    -z / (2.0 * (qf + 1.0 + pp as f64))
                } else {
                    -z * (2.0 * qf + 1.0) / (2.0 * (qf + 1.0) * (qf + 1.0 + pp as f64))
                };
                t = t.mul_f64(ratio);
                if !abs.is_finite() {
                    break;
                }
            }
            Err(PdfError::NonConvergence {
                partial_sum: sum.to_f64(),
                blocks: max_q + 1,
                last_block: t.to_f64().abs(),
            })
        };
        let mut v = series::evaluate(&self.config, &self.input(r, false, 2.0 * PI), angular)?;
        v.value *= if printed {
            r / (PI * sigma_sq.sqrt())
        } else {
            r / (PI * sigma_sq)
        };
        self.check_sign(v)
    }

    /// `∫_{-π}^{π} f_{|h|,∠h}(r, θ) dθ` with the real part from the
    /// convolution form.
    pub fn envelope_numeric(&self, r: f64) -> Result<f64, PdfError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(PdfError::Domain(format!("r = {r} must be ≥ 0")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let opts = QuadOptions::with_tol(1e-16, 1e-8);
        let mut err = None;
        let f = |t: f64| match self.polar_from_real(r, t, |x| self.real_convolution(x)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        // even in θ
        let half = integrate(f, 0.0, PI, opts)?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(2.0 * half.value)
    }

    /// Phase density from the double series.
    pub fn phase_series(&self, theta: f64) -> Result<SeriesValue, PdfError> {
        check_theta(theta)?;
        let (sin, cos) = theta.sin_cos();
        if theta == 0.0 || theta.abs() == PI || sin == 0.0 {
            return Err(PdfError::Singular { theta });
        }
        let sigma = self.sigma_sq().sqrt();
        let (x, pre) = match self.config.phase_reading {
            PhaseReading::SineCorrected => (sigma * cos / sin.abs(), 1.0 / (2.0 * PI * sin * sin)),
            PhaseReading::AsPrinted => (cos / sin, 1.0 / (2.0 * PI)),
        };
        // Γ(p/2 + 1), built two steps at a time
        let mut gammas: Vec<Scaled> = Vec::new();
        let weight = |p: u32| -> Result<Scaled, PdfError> {
            let g = match p {
                0 => Scaled::new(Dd::ONE),
                1 => Scaled::new(Dd::SQRT_PI.mul_f64(0.5)),
                _ => gammas[p as usize - 2].mul_f64(0.5 * p as f64),
            };
            gammas.push(g);
            Ok(g)
        };
        let mut v = series::evaluate(&self.config, &self.input(x, true, 1.0), weight)?;
        v.value *= pre;
        self.check_sign(v)
    }

    /// `∫_0^∞ f_{|h|,∠h}(r, θ) dr` with the real part from the convolution form.
    pub fn phase_numeric(&self, theta: f64) -> Result<f64, PdfError> {
        check_theta(theta)?;
        let opts = QuadOptions::with_tol(1e-16, 1e-8);
        let mut err = None;
        let f = |r: f64| match self.polar_from_real(r, theta, |x| self.real_convolution(x)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let v = integrate_to_infinity(f, 0.0, opts)?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(v.value)
    }

    /// `f_{h_r}(x) f_{h_i}(y)` with the series real part.
    pub fn joint(&self, x: f64, y: f64) -> Result<f64, PdfError> {
        Ok(self.real_series(x)?.value.max(0.0) * self.imag(y))
    }

    /// `r f_{h_r,h_i}(r cos θ, r sin θ)` with the series real part.
    pub fn polar(&self, r: f64, theta: f64) -> Result<f64, PdfError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(PdfError::Domain(format!("r = {r} must be ≥ 0")));
        }
        check_theta(theta)?;
        self.polar_from_real(r, theta, |x| Ok(self.real_series(x)?.value.max(0.0)))
    }

    /// The phase value the curve reports: the series when it converges and
    /// agrees with the marginalization, the marginalization otherwise.
    pub fn phase_resolved(&self, theta: f64) -> Result<f64, PdfError> {
        let numeric = self.phase_numeric(theta)?;
        match self.phase_series(theta) {
            Ok(v) if (v.value - numeric).abs() <= self.config.rel_tol * numeric.abs() => Ok(v.value),
            _ => Ok(numeric),
        }
    }
}

fn check_theta(theta: f64) -> Result<(), PdfError> {
    if !(theta.is_finite() && theta > -PI && theta <= PI) {
        return Err(PdfError::Domain(format!("theta = {theta} outside (-π, π]")));
    }
    Ok(())
}

/// `(πσ²)^{-1/2} exp(-y²/σ²)`.
pub fn pdf_imag(y: f64, params: &ChannelParams) -> f64 {
    let s2 = params.sigma_h_sq;
    (-y * y / s2).exp() / (PI * s2).sqrt()
}

/// Real-part density from the series; errors when it does not converge.
pub fn pdf_real(x: f64, params: &ChannelParams, config: &SeriesConfig) -> Result<f64, PdfError> {
    Ok(Evaluator::new(params, config)?.real_series(x)?.value.max(0.0))
}

/// Real-part density by quadrature of the same moment law.
pub fn pdf_real_convolution(
    x: f64,
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<f64, PdfError> {
    Evaluator::new(params, config)?.real_convolution(x)
}

pub fn pdf_joint(x: f64, y: f64, params: &ChannelParams, config: &SeriesConfig) -> Result<f64, PdfError> {
    Evaluator::new(params, config)?.joint(x, y)
}

pub fn pdf_polar(
    r: f64,
    theta: f64,
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<f64, PdfError> {
    Evaluator::new(params, config)?.polar(r, theta)
}

pub fn pdf_envelope(r: f64, params: &ChannelParams, config: &SeriesConfig) -> Result<f64, PdfError> {
    Ok(Evaluator::new(params, config)?.envelope_series(r)?.value.max(0.0))
}

pub fn pdf_envelope_numeric(
    r: f64,
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<f64, PdfError> {
    Evaluator::new(params, config)?.envelope_numeric(r)
}

/// Phase density; falls back to the marginalization where the series is
/// singular, fails, or disagrees with it.
pub fn pdf_phase(theta: f64, params: &ChannelParams, config: &SeriesConfig) -> Result<f64, PdfError> {
    Evaluator::new(params, config)?.phase_resolved(theta)
}

pub fn pdf_phase_series(
    theta: f64,
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<f64, PdfError> {
    Ok(Evaluator::new(params, config)?.phase_series(theta)?.value.max(0.0))
}

pub fn pdf_phase_numeric(
    theta: f64,
    params: &ChannelParams,
    config: &SeriesConfig,
) -> Result<f64, PdfError> {
    Evaluator::new(params, config)?.phase_numeric(theta)
}
