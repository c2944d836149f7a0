//! Parameterization of the phase-aligned composite channel
//! `h = Σ_k |h1_k||h2_k| + h_d`.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Statistical model of the composite channel.
///
/// `m1`, `m2` are the Nakagami shapes of the transmitter→surface and
/// surface→receiver hops, `omega1`, `omega2` their mean powers, and
/// `sigma_h_sq` the variance of the circular Gaussian direct path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelParams")]
pub struct ChannelParams {
    pub n_elements: u32,
    pub m1: u32,
    pub m2: u32,
    pub omega1: f64,
    pub omega2: f64,
    pub sigma_h_sq: f64,
}

/// Unchecked numeric form, as read from JSON or command-line flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawChannelParams {
    pub n_elements: f64,
    pub m1: f64,
    pub m2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub sigma_h_sq: f64,
}

impl TryFrom<RawChannelParams> for ChannelParams {
    type Error = ParamError;

    fn try_from(raw: RawChannelParams) -> Result<Self, ParamError> {
        fn positive_int(v: f64, name: &'static str) -> Result<u32, ParamError> {
            if v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(ParamError::NotPositiveInteger(name))
            }
        }
        if !(raw.n_elements >= 1.0) {
            return Err(ParamError::NoElements);
        }
        let params = ChannelParams {
            n_elements: positive_int(raw.n_elements, "n_elements")?,
            m1: positive_int(raw.m1, "m1")?,
            m2: positive_int(raw.m2, "m2")?,
            omega1: raw.omega1,
            omega2: raw.omega2,
            sigma_h_sq: raw.sigma_h_sq,
        };
        validate(params)
    }
}

impl From<ChannelParams> for RawChannelParams {
    fn from(p: ChannelParams) -> Self {
        RawChannelParams {
            n_elements: p.n_elements as f64,
            m1: p.m1 as f64,
            m2: p.m2 as f64,
            omega1: p.omega1,
            omega2: p.omega2,
            sigma_h_sq: p.sigma_h_sq,
        }
    }
}

/// Returns the params unchanged if every invariant holds.
pub fn validate(params: ChannelParams) -> Result<ChannelParams, ParamError> {
    if params.n_elements < 1 {
        return Err(ParamError::NoElements);
    }
    if params.m1 < 1 {
        return Err(ParamError::NotPositiveInteger("m1"));
    }
    if params.m2 < 1 {
        return Err(ParamError::NotPositiveInteger("m2"));
    }
    for (v, name) in [
        (params.omega1, "omega1"),
        (params.omega2, "omega2"),
        (params.sigma_h_sq, "sigma_h_sq"),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ParamError::NotPositive(name));
        }
    }
    Ok(params)
}

impl ChannelParams {
    pub fn new(
        n_elements: u32,
        m1: u32,
        m2: u32,
        omega1: f64,
        omega2: f64,
        sigma_h_sq: f64,
    ) -> Result<Self, ParamError> {
        validate(ChannelParams {
            n_elements,
            m1,
            m2,
            omega1,
            omega2,
            sigma_h_sq,
        })
    }

    /// Unit powers (`Ω1 = Ω2 = σ_h² = 1`), the setting of the reference grid.
    pub fn unit_power(n_elements: u32, m1: u32, m2: u32) -> Result<Self, ParamError> {
        Self::new(n_elements, m1, m2, 1.0, 1.0, 1.0)
    }

    /// `Ω1 Ω2 / (m1 m2)`, the scale of the squared cascade moment.
    pub fn cascade_scale(&self) -> f64 {
        self.omega1 * self.omega2 / (self.m1 as f64 * self.m2 as f64)
    }

    /// Largest attainable `Σ i_k`, i.e. `N (m1 - 1)`.
    pub fn max_index_sum(&self) -> u32 {
        self.n_elements * (self.m1 - 1)
    }
}

/// `u = N (m1 + m2 - 1) - Σ i_k`.
pub fn effective_u(params: &ChannelParams, index_sum: u32) -> Result<u32, ParamError> {
    let max = params.max_index_sum();
    if index_sum > max {
        return Err(ParamError::IndexSumOutOfRange { index_sum, max });
    }
    Ok(params.n_elements * (params.m1 + params.m2 - 1) - index_sum)
}

/// One realization of the composite channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexChannelValue {
    pub re: f64,
    pub im: f64,
}

impl ComplexChannelValue {
    pub fn new(re: f64, im: f64) -> Self {
        ComplexChannelValue { re, im }
    }

    pub fn magnitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Phase in `(-π, π]`.
    pub fn phase(&self) -> f64 {
        let t = self.im.atan2(self.re);
        if t == -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            t
        }
    }
}
