//! Block-truncated evaluation of the double series
//! `Σ_ℓ Σ_{p=0}^{2ℓ} Σ_j w_j T_j(ℓ, p) · weight(p)` with
//!
//! `T_j(ℓ,p) = (-1)^{ℓ+p} C(2ℓ,p)/ℓ! · s^{ℓ-p/2} x^p σ^{-2ℓ}
//!             · Γ(ℓ+1-p/2) Γ(ℓ-p/2+u_j) / Γ(u_j)`.
//!
//! Terms are produced by exact ratio recurrences in double-double with a
//! separate binary exponent, so nothing overflows before the cancellation
//! alarm has a chance to fire.

use crate::dd::{Dd, Scaled};
use crate::error::PdfError;

use super::{PrecisionMode, SeriesConfig, SeriesValue};

/// One `s`-group of the inner sum.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Component {
    pub u: u32,
    pub weight: Scaled,
    /// `Γ(u+½)/Γ(u)`
    pub half_ratio: Dd,
}

impl Component {
    pub fn new(u: u32, weight: Scaled) -> Self {
        // Γ(u+½)/Γ(u) = ½ Π_{k=1}^{u-1} (k+½)/k
        let mut r = Dd::from_f64(0.5);
        for k in 1..u {
            r = r.mul_f64(k as f64 + 0.5).div_f64(k as f64);
        }
        Component {
            u,
            weight,
            half_ratio: r * Dd::SQRT_PI,
        }
    }
}

pub(crate) struct SeriesInput<'a> {
    pub comps: &'a [Component],
    pub s: f64,
    pub sigma_sq: f64,
    pub x: f64,
    pub include_odd: bool,
    /// A priori bound on `|raw sum|`, used by the early cancellation abort.
    pub bound: f64,
}

enum Acc {
    Standard(f64),
    Extended(Dd),
}

impl Acc {
    fn new(mode: PrecisionMode) -> Self {
        match mode {
            PrecisionMode::Standard => Acc::Standard(0.0),
            PrecisionMode::Extended => Acc::Extended(Dd::ZERO),
        }
    }

    fn add(&mut self, t: Scaled) -> f64 {
        match self {
            Acc::Standard(v) => {
                let t = t.to_f64();
                *v += t;
                t.abs()
            }
            Acc::Extended(v) => {
                let t = t.to_dd();
                *v += t;
                t.hi.abs()
            }
        }
    }

    fn add_acc(&mut self, other: &Acc) {
        match (self, other) {
            (Acc::Standard(a), Acc::Standard(b)) => *a += b,
            (Acc::Extended(a), Acc::Extended(b)) => *a += *b,
            _ => unreachable!("mixed precision modes"),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Acc::Standard(v) => *v,
            Acc::Extended(v) => v.to_f64(),
        }
    }
}

/// Runs the series. `weight(p)` supplies the per-`p` factor (zero to skip).
pub(crate) fn evaluate<W>(
    cfg: &SeriesConfig,
    input: &SeriesInput<'_>,
    mut weight: W,
) -> Result<SeriesValue, PdfError>
where
    W: FnMut(u32) -> Result<Scaled, PdfError>,
{
    let budget = cfg.cancellation_budget();
    let SeriesInput { s, sigma_sq, x, .. } = *input;
    let odd = input.include_odd && x != 0.0;
    let step = -s / sigma_sq;
    let x2 = Dd::from_f64(x) * Dd::from_f64(x);
    let s_dd = Dd::from_f64(s);

    let mut even: Vec<Scaled> = input.comps.iter().map(|c| c.weight).collect();
    // T_j(1,1) = w_j √(πs) x/σ² Γ(u+½)/Γ(u)
    let odd_start = Dd::from_f64(s).sqrt() * Dd::SQRT_PI * Dd::from_f64(x) / Dd::from_f64(sigma_sq);
    let mut odd_chain: Vec<Scaled> = input
        .comps
        .iter()
        .map(|c| c.weight.mul_dd(odd_start * c.half_ratio))
        .collect();

    let mut weights: Vec<Scaled> = Vec::new();
    let mut total = Acc::new(cfg.precision_mode);
    let mut abs_sum = 0.0;
    let mut streak = 0;
    let mut terms = 0u64;
    let mut last_block = 0.0;

    for ell in 0..=cfg.max_ell {
        let top = if ell == 0 { 0 } else { 2 * ell };
        while weights.len() <= top as usize {
            let p = weights.len() as u32;
            weights.push(weight(p)?);
        }
        let mut block = Acc::new(cfg.precision_mode);
        let mut block_abs = 0.0;
        let l = ell as f64;
        for (j, comp) in input.comps.iter().enumerate() {
            let u = comp.u as f64;
            let mut t = even[j];
            block_abs += block.add(t.mul(weights[0]));
            terms += 1;
            if x != 0.0 {
                let mut p = 2;
                while p <= top {
                    let pf = p as f64;
                    let num = x2.mul_f64(2.0 * (2.0 * l - pf + 1.0));
                    let den = s_dd.mul_f64(pf * (pf - 1.0) * (l - 0.5 * pf + u));
                    t = t.mul_dd(num / den);
                    if !weights[p as usize].is_zero() {
                        block_abs += block.add(t.mul(weights[p as usize]));
                    }
                    terms += 1;
                    p += 2;
                }
            }
            if odd && ell >= 1 {
                let mut t = odd_chain[j];
                block_abs += block.add(t.mul(weights[1]));
                terms += 1;
                let mut p = 3;
                while p < top {
                    let pf = p as f64;
                    let num = x2.mul_f64(2.0 * (2.0 * l - pf + 1.0));
                    let den = s_dd.mul_f64(pf * (pf - 1.0) * (l - 0.5 * pf + u));
                    t = t.mul_dd(num / den);
                    if !weights[p as usize].is_zero() {
                        block_abs += block.add(t.mul(weights[p as usize]));
                    }
                    terms += 1;
                    p += 2;
                }
            }
            // advance the p = 0 and p = 1 chains to ℓ + 1
            even[j] = even[j].mul_dd(Dd::from_f64(step).mul_f64(l + u));
            if ell >= 1 {
                odd_chain[j] = odd_chain[j]
                    .mul_dd(Dd::from_f64(step).mul_f64((l + 0.5) * (l - 0.5 + u)).div_f64(l));
            }
        }
        total.add_acc(&block);
        abs_sum += block_abs;
        let sum = total.value();
        last_block = block.value().abs();
        if !abs_sum.is_finite() || abs_sum > budget * input.bound {
            return Err(PdfError::CancellationAlarm {
                condition: abs_sum / sum.abs(),
                budget,
                blocks: ell + 1,
                partial_sum: sum,
            });
        }
        if last_block <= cfg.rel_tol * sum.abs() {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= 3 {
            let condition = abs_sum / sum.abs();
            if condition > budget {
                return Err(PdfError::CancellationAlarm {
                    condition,
                    budget,
                    blocks: ell + 1,
                    partial_sum: sum,
                });
            }
            return Ok(SeriesValue {
                value: sum,
                blocks: ell + 1,
                terms,
                tail_estimate: last_block / sum.abs(),
                condition,
            });
        }
    }
    Err(PdfError::NonConvergence {
        partial_sum: total.value(),
        blocks: cfg.max_ell + 1,
        last_block,
    })
}
