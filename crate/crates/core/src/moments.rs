//! The multi-index inner sum shared by every density expression, reduced
//! from `m1^N` nested terms to an `N`-fold convolution over `s = Σ i_k`.
//!
//! Each summand factorizes over the surface elements except through
//! `u = N(m1+m2-1) - s`, so grouping by `s` is exact. Brute-force
//! enumeration lives only in the tests.

use serde::{Deserialize, Serialize};

use crate::channel::{effective_u, ChannelParams};
use crate::dd::{Dd, Scaled};
use crate::error::SpecialError;
use crate::special::{gamma_ratio, pochhammer_dd};

/// Where the `1/Γ(u)` factor of the inner sum sits.
///
/// `PerMultiIndex` divides once per multi-index; `PerElement` is the literal
/// typesetting with `Γ(u)` inside the product over `k`, i.e. `Γ(u)^N`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPlacement {
    #[default]
    PerMultiIndex,
    PerElement,
}

impl GammaPlacement {
    pub fn name(self) -> &'static str {
        match self {
            GammaPlacement::PerMultiIndex => "per_multi_index",
            GammaPlacement::PerElement => "per_element",
        }
    }
}

fn element_weights_dd(params: &ChannelParams) -> Vec<Dd> {
    let m1 = params.m1;
    let m2 = params.m2 as f64;
    (0..m1)
        .map(|i| {
            pochhammer_dd(m2, m1 - 1 - i) * pochhammer_dd(1.0 - m2, i)
                / (pochhammer_dd(1.0, m1 - 1 - i) * pochhammer_dd(1.0, i))
        })
        .collect()
}

/// Per-element weights `(m2)_{m1-1-i} (1-m2)_i / ((m1-1-i)! i!)`, `i = 0..m1`.
///
/// These are the coefficients of `(1+h)_{m1-1} / (m1-1)!` in the basis
/// `(m2+h)_j / (m2)_j`, so they always sum to one.
pub fn element_weights(params: &ChannelParams) -> Vec<f64> {
    element_weights_dd(params).into_iter().map(Dd::to_f64).collect()
}

/// The weights with `(m1-1)!` in place of `(m1-1-i)!`. Identical for
/// `m1 <= 2`; for larger `m1` they no longer sum to one.
pub fn element_weights_uncorrected(params: &ChannelParams) -> Vec<f64> {
    let m1 = params.m1;
    let m2 = params.m2 as f64;
    let fact = pochhammer_dd(1.0, m1 - 1);
    (0..m1)
        .map(|i| {
            (pochhammer_dd(m2, m1 - 1 - i) * pochhammer_dd(1.0 - m2, i)
                / (fact * pochhammer_dd(1.0, i)))
            .to_f64()
        })
        .collect()
}

/// Coefficients of the inner sum grouped by `s = Σ i_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSumTable {
    coefficients: Vec<f64>,
    weights: Vec<Scaled>,
    params: ChannelParams,
    placement: GammaPlacement,
}

/// Builds the table with the single-`1/Γ(u)` placement.
pub fn build_inner_sum_table(params: &ChannelParams) -> InnerSumTable {
    InnerSumTable::new(params, GammaPlacement::PerMultiIndex)
}

impl InnerSumTable {
    pub fn new(params: &ChannelParams, placement: GammaPlacement) -> Self {
        let w = element_weights_dd(params);
        let mut acc = vec![Dd::ONE];
        for _ in 0..params.n_elements {
            let mut next = vec![Dd::ZERO; acc.len() + w.len() - 1];
            for (a, &x) in acc.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                for (b, &y) in w.iter().enumerate() {
                    next[a + b] += x * y;
                }
            }
            acc = next;
        }
        let weights = acc
            .iter()
            .enumerate()
            .map(|(s, &c)| {
                let mut weight = Scaled::new(c);
                if placement == GammaPlacement::PerElement {
                    let u = effective_u(params, s as u32).expect("s within table");
                    let inv = Dd::ONE / pochhammer_dd(1.0, u - 1);
                    for _ in 1..params.n_elements {
                        weight = weight.mul_dd(inv);
                    }
                }
                weight
            })
            .collect();
        InnerSumTable {
            coefficients: acc.iter().map(|c| c.to_f64()).collect(),
            weights,
            params: *params,
            placement,
        }
    }

    /// Convolution coefficients indexed by `s`, independent of placement.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn placement(&self) -> GammaPlacement {
        self.placement
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `u(s)`.
    pub fn u(&self, s: usize) -> u32 {
        self.params.n_elements * (self.params.m1 + self.params.m2 - 1) - s as u32
    }

    /// Weight multiplying `Γ(a+u)/Γ(u)` for index `s`, including the
    /// extra `Γ(u)^{1-N}` of the per-element placement.
    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s].to_f64()
    }

    /// `(u(s), weight)` pairs with zero coefficients dropped, in double-double.
    pub(crate) fn components(&self) -> Vec<(u32, Scaled)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(s, &w)| (self.u(s), w))
            .collect()
    }

    /// Total weight, `Σ_s weight(s)`: one for the per-multi-index placement.
    pub fn total_weight(&self) -> f64 {
        let mut acc = Dd::ZERO;
        for w in &self.weights {
            acc += w.to_dd();
        }
        acc.to_f64()
    }
}

/// `Σ_s weight(s) · Γ(a + u(s)) / Γ(u(s))`.
pub fn weighted_gamma_sum(table: &InnerSumTable, a: f64) -> Result<f64, SpecialError> {
    let mut acc = Dd::ZERO;
    for s in 0..table.len() {
        let w = table.weights[s];
        if w.is_zero() {
            continue;
        }
        let u = table.u(s) as f64;
        let ratio = gamma_ratio(&[a + u], &[u])?;
        acc += w.mul_f64(ratio).to_dd();
    }
    Ok(acc.to_f64())
}

/// `ν`-th moment of the cascade sum under the inner-sum moment law,
/// `(Ω1Ω2/(m1m2))^{ν/2} Γ(1+ν/2) Σ_s c_s Γ(ν/2+u)/Γ(u)`; the same factor the
/// real-part series uses with `ν = 2ℓ - p`.
pub fn cascade_moment(params: &ChannelParams, nu: f64) -> Result<f64, SpecialError> {
    cascade_moment_with(&build_inner_sum_table(params), nu)
}

pub fn cascade_moment_with(table: &InnerSumTable, nu: f64) -> Result<f64, SpecialError> {
    if nu.is_nan() || nu < 0.0 {
        return Err(SpecialError::Domain {
            function: "cascade_moment",
            arg: nu,
        });
    }
    let half = 0.5 * nu;
    let s = table.params.cascade_scale();
    let w = weighted_gamma_sum(table, half)?;
    Ok(s.powf(half) * gamma_ratio(&[1.0 + half], &[1.0])? * w)
}

/// Mean and variance of the cascade law (normalized by its total weight).
pub fn cascade_mean_variance(table: &InnerSumTable) -> Result<(f64, f64), SpecialError> {
    let m0 = cascade_moment_with(table, 0.0)?;
    let m1 = cascade_moment_with(table, 1.0)? / m0;
    let m2 = cascade_moment_with(table, 2.0)? / m0;
    Ok((m1, (m2 - m1 * m1).max(0.0)))
}

/// Exact integer-order moment `E[(Σ_k |h1_k||h2_k|)^n]` of the phase-aligned
/// cascade sum, by binomial convolution of the single-product Nakagami
/// moments.
pub fn coherent_moment(params: &ChannelParams, order: u32) -> f64 {
    let n = order as usize;
    let s = params.cascade_scale();
    let (m1, m2) = (params.m1 as f64, params.m2 as f64);
    let single: Vec<f64> = (0..=n)
        .map(|k| {
            let h = 0.5 * k as f64;
            s.powf(h)
                * gamma_ratio(&[m1 + h], &[m1]).expect("positive")
                * gamma_ratio(&[m2 + h], &[m2]).expect("positive")
        })
        .collect();
    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    let mut sum = single.clone();
    for _ in 1..params.n_elements {
        sum = (0..=n)
            .map(|j| {
                let mut acc = Dd::ZERO;
                for k in 0..=j {
                    acc += Dd::from_f64(binom(j, k)).mul_f64(sum[k]).mul_f64(single[j - k]);
                }
                acc.to_f64()
            })
            .collect();
    }
    sum[n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::pochhammer;

    fn params(n: u32, m1: u32, m2: u32) -> ChannelParams {
        ChannelParams::unit_power(n, m1, m2).unwrap()
    }

    /// Enumerates all m1^N multi-indices directly.
    fn brute_force(p: &ChannelParams) -> Vec<f64> {
        let m1 = p.m1 as usize;
        let n = p.n_elements as usize;
        let mut out = vec![0.0; n * (m1 - 1) + 1];
        let weight = |i: usize| {
            let i = i as u32;
            pochhammer(p.m2 as f64, p.m1 - 1 - i) * pochhammer(1.0 - p.m2 as f64, i)
                / (pochhammer(1.0, p.m1 - 1 - i) * pochhammer(1.0, i))
        };
        let total = m1.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut prod = 1.0;
            let mut s = 0;
            for _ in 0..n {
                let i = c % m1;
                c /= m1;
                prod *= weight(i);
                s += i;
            }
            out[s] += prod;
        }
        out
    }

    #[test]
    fn element_weight_examples() {
        assert_eq!(element_weights(&params(1, 1, 1)), vec![1.0]);
        assert_eq!(element_weights(&params(1, 2, 2)), vec![2.0, -1.0]);
        assert_eq!(element_weights(&params(1, 2, 1)), vec![1.0, 0.0]);
        assert_eq!(element_weights(&params(1, 3, 2)), vec![3.0, -2.0, 0.0]);
    }

    #[test]
    fn uncorrected_weights_lose_mass_beyond_m1_two() {
        for m2 in 1..=4 {
            assert_eq!(element_weights_uncorrected(&params(1, 2, m2)), element_weights(&params(1, 2, m2)));
        }
        let sum: f64 = element_weights_uncorrected(&params(1, 3, 2)).iter().sum();
        assert_eq!(sum, 2.0);
    }

    #[test]
    fn table_examples() {
        let t = build_inner_sum_table(&params(3, 1, 4));
        assert_eq!(t.coefficients(), &[1.0]);
        let t = build_inner_sum_table(&params(2, 2, 2));
        assert_eq!(t.coefficients(), &[4.0, -4.0, 1.0]);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn table_matches_enumeration() {
        for n in 1..=5 {
            for m1 in 1..=3 {
                for m2 in 1..=3 {
                    let p = params(n, m1, m2);
                    let fast = build_inner_sum_table(&p);
                    let slow = brute_force(&p);
                    assert_eq!(fast.len(), (n * (m1 - 1) + 1) as usize);
                    let scale: f64 = slow.iter().map(|c| c.abs()).fold(0.0, f64::max);
                    for (a, b) in fast.coefficients().iter().zip(&slow) {
                        assert!(
                            (a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a - b).abs() <= 1e-15 * scale,
                            "N={n} m1={m1} m2={m2}: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn table_is_normalized() {
        for (n, m1, m2) in [(5, 2, 3), (10, 2, 2), (4, 3, 1), (7, 3, 3)] {
            let t = build_inner_sum_table(&params(n, m1, m2));
            assert!((t.total_weight() - 1.0).abs() < 1e-12);
        }
        let lit = InnerSumTable::new(&params(5, 1, 1), GammaPlacement::PerElement);
        // Γ(5)^{-4}
        assert!((lit.total_weight() - 24f64.powi(-4)).abs() < 1e-20);
    }

    #[test]
    fn weighted_gamma_sum_identities() {
        let t = build_inner_sum_table(&params(4, 2, 3));
        let sum: f64 = t.coefficients().iter().sum();
        assert!((weighted_gamma_sum(&t, 0.0).unwrap() - sum).abs() < 1e-12);
        let with_u: f64 = t
            .coefficients()
            .iter()
            .enumerate()
            .map(|(s, c)| c * t.u(s) as f64)
            .sum();
        assert!((weighted_gamma_sum(&t, 1.0).unwrap() / with_u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_gamma_sum_half_integer() {
        // N=1, m1=m2=2: 2 Γ(3.5)/Γ(3) - Γ(2.5)/Γ(2)
        let t = build_inner_sum_table(&params(1, 2, 2));
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let g35 = 15.0 / 8.0 * sqrt_pi;
        let g25 = 3.0 / 4.0 * sqrt_pi;
        let want = 2.0 * g35 / 2.0 - g25;
        let got = weighted_gamma_sum(&t, 0.5).unwrap();
        assert!((got / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn single_element_moments_match_nakagami_product() {
        for m1 in 1..=3 {
            for m2 in 1..=3 {
                let p = ChannelParams::new(1, m1, m2, 1.3, 0.7, 1.0).unwrap();
                for nu in [0.0, 1.0, 2.0, 3.0, 4.0, 2.5] {
                    let h = nu / 2.0;
                    let want = (1.3 / m1 as f64).powf(h)
                        * (0.7 / m2 as f64).powf(h)
                        * gamma_ratio(&[m1 as f64 + h, m2 as f64 + h], &[m1 as f64, m2 as f64])
                            .unwrap();
                    let got = cascade_moment(&p, nu).unwrap();
                    assert!(
                        (got / want - 1.0).abs() < 1e-10,
                        "m1={m1} m2={m2} nu={nu}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn cascade_moment_basics() {
        let p = params(1, 1, 1);
        assert!((cascade_moment(&p, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((cascade_moment(&p, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(cascade_moment(&p, -1.0).is_err());
    }

    #[test]
    fn moment_law_differs_from_aligned_sum_beyond_one_element() {
        let one = params(1, 2, 3);
        for k in 1..=4 {
            let a = cascade_moment(&one, k as f64).unwrap();
            let b = coherent_moment(&one, k);
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        let two = params(2, 1, 1);
        assert!((cascade_moment(&two, 2.0).unwrap() - 2.0).abs() < 1e-12);
        let quarter_pi = std::f64::consts::FRAC_PI_4;
        let aligned = 2.0 + 2.0 * quarter_pi * quarter_pi;
        assert!((coherent_moment(&two, 2) - aligned).abs() < 1e-12);
    }

    #[test]
    fn role_swap_symmetry_of_moments() {
        // Swapping the two hops leaves the cascade law unchanged.
        for (n, m1, m2) in [(1, 1, 3), (2, 2, 3), (3, 1, 2), (4, 3, 2)] {
            let a = ChannelParams::new(n, m1, m2, 0.6, 1.7, 1.0).unwrap();
            let b = ChannelParams::new(n, m2, m1, 1.7, 0.6, 1.0).unwrap();
            for nu in [0.5, 1.0, 2.0, 3.0, 5.0] {
                let x = cascade_moment(&a, nu).unwrap();
                let y = cascade_moment(&b, nu).unwrap();
                assert!((x / y - 1.0).abs() < 1e-9, "{n} {m1} {m2} nu={nu}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn lyapunov_log_convexity() {
        for (n, m1, m2) in [(2, 1, 1), (3, 2, 3), (5, 2, 2), (10, 1, 3)] {
            let p = params(n, m1, m2);
            for nu in [1.0, 1.5, 2.0, 3.0, 4.0] {
                for delta in [0.25, 0.5, 1.0] {
                    let mid = cascade_moment(&p, nu).unwrap();
                    let lo = cascade_moment(&p, nu - delta).unwrap();
                    let hi = cascade_moment(&p, nu + delta).unwrap();
                    assert!(mid * mid <= lo * hi * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn moment_increases_with_order_when_mean_at_least_one() {
        let p = params(5, 2, 3);
        assert!(cascade_moment(&p, 1.0).unwrap() >= 1.0);
        let mut prev = cascade_moment(&p, 0.0).unwrap();
        for k in 1..12 {
            let m = cascade_moment(&p, 0.5 * k as f64).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn m1_one_collapses_to_single_term() {
        for n in [1, 3, 7] {
            let p = params(n, 1, 2);
            let t = build_inner_sum_table(&p);
            assert_eq!(t.coefficients(), &[1.0]);
            // Γ(1+ν/2) Γ(N m2 + ν/2) / Γ(N m2) with scale 1/m2
            let u = (n * 2) as f64;
            for nu in [1.0, 2.0, 3.0] {
                let h = nu / 2.0;
                let want = 0.5f64.powf(h) * gamma_ratio(&[1.0 + h, u + h], &[1.0, u]).unwrap();
                assert!((cascade_moment(&p, nu).unwrap() / want - 1.0).abs() < 1e-13);
            }
        }
    }
}
