//! Direct evaluation of the real-part density as a one-dimensional integral.
//!
//! Under the inner-sum moment law the cascade term is `X = √(s B E)` with
//! `E ~ Exp(1)` and `B` drawn from the signed Gamma mixture
//! `G(b) = Σ_j w_j b^{u_j-1} e^{-b} / Γ(u_j)`. Conditioned on `B = b`, `X` is
//! Rayleigh with mean square `s b`, and its sum with the in-phase direct path
//! has the closed form [`rayleigh_gauss`]. The series is the formal power
//! expansion of this integral.

use std::f64::consts::PI;

use crate::dd::Scaled;
use crate::error::PdfError;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::special::ln_gamma;

use super::series::Component;

/// `√π e^{y²} erfc(y)` for `y ≥ 3`, by the Laplace continued fraction; returns
/// the tail `K` with `√π erfcx(y) = 1/(y + K)`.
fn erfcx_tail(y: f64) -> f64 {
    let mut t = y;
    for n in (2..=80).rev() {
        t = y + 0.5 * n as f64 / t;
    }
    0.5 / t
}

/// Density at `x` of `R + N(0, σ²/2)` where `R` is Rayleigh with `E[R²] = Ω`.
pub fn rayleigh_gauss(x: f64, omega: f64, sigma_sq: f64) -> f64 {
    let gauss = (-x * x / sigma_sq).exp() / (PI * sigma_sq).sqrt();
    if omega <= 1e-14 * sigma_sq {
        return gauss;
    }
    let a = 1.0 / omega + 1.0 / sigma_sq;
    let mu = x / (sigma_sq * a);
    let z = mu * a.sqrt();
    let pre = 2.0 / (omega * (PI * sigma_sq).sqrt());
    if z >= -3.0 {
        pre * ((-x * x / sigma_sq).exp() / (2.0 * a)
            + mu * PI.sqrt() / (2.0 * a.sqrt())
                * (-x * x / (sigma_sq + omega)).exp()
                * libm::erfc(-z))
    } else {
        // the two terms cancel to leading order; 1 - y√π erfcx(y) = K/(y+K)
        let y = -z;
        let k = erfcx_tail(y);
        pre * (-x * x / sigma_sq).exp() / (2.0 * a) * (k / (y + k))
    }
}

/// The signed mixture `G(b)`, stored as `b^{u_min-1} e^{-b}/Γ(u_min)` times
/// a polynomial whose coefficients carry the Gamma ratios.
#[derive(Clone, Debug)]
pub(crate) struct Mixture {
    u_min: u32,
    u_max: u32,
    ln_gamma_min: f64,
    coefs: Vec<Scaled>,
}

impl Mixture {
    pub fn new(comps: &[Component]) -> Self {
        let u_min = comps.iter().map(|c| c.u).min().unwrap_or(1);
        let u_max = comps.iter().map(|c| c.u).max().unwrap_or(1);
        let mut coefs = vec![Scaled::ZERO; (u_max - u_min + 1) as usize];
        for c in comps {
            let k = c.u - u_min;
            // w / (u_min)_k
            let mut v = c.weight;
            for i in 0..k {
                v = v.div_f64(u_min as f64 + i as f64);
            }
            coefs[k as usize] = coefs[k as usize].add(v);
        }
        Mixture {
            u_min,
            u_max,
            ln_gamma_min: ln_gamma(u_min as f64).expect("u ≥ 1"),
            coefs,
        }
    }

    pub fn density(&self, b: f64) -> f64 {
        if b < 0.0 {
            return 0.0;
        }
        let mut acc = Scaled::ZERO;
        for c in self.coefs.iter().rev() {
            acc = acc.mul_f64(b).add(*c);
        }
        if acc.is_zero() {
            return 0.0;
        }
        let ln_b = if self.u_min == 1 {
            0.0
        } else if b == 0.0 {
            return 0.0;
        } else {
            (self.u_min - 1) as f64 * b.ln()
        };
        let ln = acc.ln_abs() + ln_b - b - self.ln_gamma_min;
        ln.exp().copysign(acc.to_f64())
    }

    /// Break points bracketing where the Gamma components carry their mass.
    pub fn breaks(&self) -> (Vec<f64>, f64) {
        let lo_u = self.u_min as f64;
        let hi_u = self.u_max as f64;
        let lo = (lo_u - 12.0 * lo_u.sqrt() - 5.0).max(0.0);
        let hi = hi_u + 12.0 * hi_u.sqrt() + 20.0;
        let mut breaks = vec![0.0];
        if lo > 0.0 {
            breaks.push(lo);
        }
        let panels = 8;
        for i in 1..=panels {
            breaks.push(lo + (hi - lo) * i as f64 / panels as f64);
        }
        (breaks, hi)
    }
}

pub(crate) fn real_by_convolution(
    mixture: &Mixture,
    s: f64,
    sigma_sq: f64,
    x: f64,
    opts: QuadOptions,
) -> Result<f64, PdfError> {
    let f = |b: f64| mixture.density(b) * rayleigh_gauss(x, s * b, sigma_sq);
    let (breaks, hi) = mixture.breaks();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(f, w[0], w[1], opts)?.value;
    }
    total += integrate_to_infinity(f, hi, opts)?.value;
    Ok(total)
}
