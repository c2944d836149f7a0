//! Agreement metrics between analytic densities and Monte Carlo estimates,
//! plus normalization audits.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{PdfError, ValidationError};
use crate::moments::{cascade_mean_variance, GammaPlacement, InnerSumTable};
use crate::montecarlo::{histogram, sample_composite, BinRule, Ecdf, EmpiricalDensity, Projection};
use crate::pdf::{Evaluator, PdfCurve, PdfKind, SeriesConfig};
use crate::quad::{integrate, integrate_panels, QuadOptions};

pub const DEFAULT_THRESHOLD: f64 = 5.0;
/// Below this many samples the SE envelope is too wide to fail anything.
pub const LOW_POWER_COUNT: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub center: f64,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    /// `|analytic - empirical| / std_error`.
    pub z: f64,
    /// False when both the expected and the observed count are below
    /// [`MIN_BIN_COUNT`]; such bins do not enter `D*`.
    pub counted: bool,
}

/// Bins where neither the expected nor the observed count reaches this are
/// left out of `D*`: the normal approximation behind the z-score fails there,
/// and the two outermost bins of a range-fitted histogram hold the sample
/// extremes by construction.
pub const MIN_BIN_COUNT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub metric: String,
    /// Max studentized deviation over bins.
    pub d_star: f64,
    pub threshold: f64,
    pub pass: bool,
    pub worst_bin: Option<usize>,
    pub count: u64,
    pub bins: Vec<BinComparison>,
    pub warnings: Vec<String>,
}

/// Tolerance used when matching curve abscissae to bin centers.
fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Studentized sup-norm between a curve sampled at the bin centers and the
/// histogram. The standard error of each bin is the one the analytic
/// density predicts; bins it gives zero mass use the empirical SE.
pub fn sup_norm_report(curve: &PdfCurve, empirical: &EmpiricalDensity) -> Result<ValidationReport, ValidationError> {
    sup_norm_report_with(curve, empirical, DEFAULT_THRESHOLD)
}

pub fn sup_norm_report_with(
    curve: &PdfCurve,
    empirical: &EmpiricalDensity,
    threshold: f64,
) -> Result<ValidationReport, ValidationError> {
    let n = empirical.count as f64;
    let mut bins = Vec::with_capacity(empirical.bins());
    let mut j = 0;
    for (i, center) in empirical.centers().into_iter().enumerate() {
        while j < curve.grid.len() && curve.grid[j] < center && !same_point(curve.grid[j], center) {
            j += 1;
        }
        if j == curve.grid.len() || !same_point(curve.grid[j], center) {
            return Err(ValidationError::GridMismatch { bin: i, center });
        }
        let analytic = curve.values[j];
        let width = empirical.width(i);
        let p = analytic * width;
        let se = if p > 0.0 && p < 1.0 {
            (p * (1.0 - p) / n).sqrt() / width
        } else {
            empirical.std_errors[i]
        };
        let diff = (analytic - empirical.densities[i]).abs();
        let counted = p * n >= MIN_BIN_COUNT || empirical.densities[i] * width * n >= MIN_BIN_COUNT || analytic.is_nan();
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        bins.push(BinComparison {
            center,
            analytic,
            empirical: empirical.densities[i],
            std_error: se,
            z: if analytic.is_nan() { f64::INFINITY } else { z },
            counted,
        });
    }
    let (worst_bin, d_star) = bins
        .iter()
        .enumerate()
        .filter(|(_, b)| b.counted)
        .map(|(i, b)| (i, b.z))
        .fold((None, 0.0), |acc, (i, z)| if z > acc.1 { (Some(i), z) } else { acc });
    let mut warnings = Vec::new();
    if empirical.count < LOW_POWER_COUNT {
        warnings.push(format!(
            "only {} samples: standard-error envelopes are too wide for a meaningful failure",
            empirical.count
        ));
    }
    Ok(ValidationReport {
        metric: "studentized_sup_norm".into(),
        d_star,
        threshold,
        pass: d_star <= threshold,
        worst_bin,
        count: empirical.count,
        bins,
        warnings,
    })
}

/// CDF of a density tabulated by panel-wise quadrature, interpolated with
/// cubic Hermite polynomials between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl TabulatedCdf {
    /// `lower_mass` is the probability below `nodes[0]`.
    pub fn new<F>(pdf: F, nodes: Vec<f64>, lower_mass: f64) -> Result<Self, ValidationError>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let opts = QuadOptions::with_tol(1e-14, 1e-8);
        let pieces: Vec<Result<f64, ValidationError>> = nodes
            .par_windows(2)
            .map(|w| Ok(integrate(&pdf, w[0], w[1], opts)?.value))
            .collect();
        let mut cdf = Vec::with_capacity(nodes.len());
        let mut acc = lower_mass;
        cdf.push(acc);
        for p in pieces {
            acc += p?;
            cdf.push(acc);
        }
        let dens = nodes.par_iter().map(|&x| pdf(x)).collect();
        Ok(TabulatedCdf {
            nodes,
            cdf,
            pdf: dens,
        })
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("at least one node")
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.cdf[0];
        }
        if x >= self.nodes[n - 1] {
            return self.cdf[n - 1];
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * self.cdf[i] + h10 * h * self.pdf[i] + h01 * self.cdf[i + 1] + h11 * h * self.pdf[i + 1])
            .clamp(0.0, 1.0)
    }
}

/// `sup_x |F_n(x) - F(x)|`, attained at the sample points.
pub fn ks_statistic<F: Fn(f64) -> f64>(analytic_cdf: F, ecdf: &Ecdf) -> f64 {
    let xs = ecdf.sorted();
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut k = i;
        while k < xs.len() && xs[k] == x {
            k += 1;
        }
        let f = analytic_cdf(x);
        d = d.max((k as f64 / n - f).abs()).max((f - i as f64 / n).abs());
        i = k;
    }
    d
}

/// Asymptotic 1% critical value `1.63/√n`.
pub fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub pdf: PdfKind,
    pub gamma_placement: GammaPlacement,
    pub integral: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationAudit {
    pub entries: Vec<AuditEntry>,
    /// Placements whose every entry passes.
    pub passing_placements: Vec<GammaPlacement>,
}

/// Flag any deviation beyond this as a truncation or reading failure.
pub const AUDIT_FLAG: f64 = 1e-3;

/// Support of the real part located from the analytic law's own moments:
/// `(mean, sd)` of `h_r`.
pub fn real_part_location(table: &InnerSumTable) -> Result<(f64, f64), PdfError> {
    let (m, v) = cascade_mean_variance(table)?;
    Ok((m, (v + 0.5 * table.params().sigma_h_sq).sqrt()))
}

fn panels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Integral of the curve-policy value of `which` over its support.
pub fn integrate_density(ev: &Evaluator, which: PdfKind) -> Result<f64, ValidationError> {
    let (m, sd) = real_part_location(ev.table())?;
    let opts = QuadOptions::with_tol(1e-14, 1e-9);
    let sigma = ev.params().sigma_h_sq.sqrt();
    let pick = |d: Result<crate::pdf::PointDiagnostics, PdfError>| d.map(|d| d.raw_value).unwrap_or(f64::NAN);
    let value = match which {
        PdfKind::Imag => {
            integrate_panels(|y| ev.imag(y), &panels(-12.0 * sigma, 12.0 * sigma, 8), opts)?.value
        }
        PdfKind::Real => {
            let lo = (m - 12.0 * sd).min(-12.0 * sigma);
            integrate_panels(|x| pick(ev.real_point(x)), &panels(lo, m + 12.0 * sd, 16), opts)?.value
        }
        PdfKind::Envelope => {
            let hi = m + 12.0 * sd + 12.0 * sigma;
            integrate_panels(|r| pick(ev.envelope_point(r)), &panels(0.0, hi, 16), opts)?.value
        }
        PdfKind::Phase => {
            integrate_panels(|t| pick(ev.phase_point(t)), &panels(-PI, PI, 16), opts)?.value
        }
        PdfKind::Joint | PdfKind::Polar => {
            return Err(PdfError::Domain("bivariate densities are audited through their marginals".into()).into())
        }
    };
    Ok(value)
}

/// Integrates the real, imaginary, envelope and phase densities under both
/// Γ(u) placements.
pub fn normalization_audit(params: &ChannelParams, config: &SeriesConfig) -> Result<NormalizationAudit, ValidationError> {
    let mut entries = Vec::new();
    let mut passing = Vec::new();
    for placement in [GammaPlacement::PerMultiIndex, GammaPlacement::PerElement] {
        let cfg = SeriesConfig {
            gamma_placement: placement,
            ..*config
        };
        let ev = Evaluator::new(params, &cfg)?;
        let mut all = true;
        for (which, tol) in [
            (PdfKind::Real, 1e-4),
            (PdfKind::Imag, 1e-10),
            (PdfKind::Envelope, 1e-4),
            (PdfKind::Phase, 1e-4),
        ] {
            let integral = integrate_density(&ev, which)?;
            let deviation = (integral - 1.0).abs();
            let pass = deviation <= tol;
            all &= pass;
            entries.push(AuditEntry {
                pdf: which,
                gamma_placement: placement,
                integral,
                deviation,
                tolerance: tol,
                pass,
            });
        }
        if all {
            passing.push(placement);
        }
    }
    Ok(NormalizationAudit {
        entries,
        passing_placements: passing,
    })
}

/// Quadrature mean `∫ x f(x) dx / ∫ f(x) dx` of a curve by the trapezoid rule.
pub fn curve_mean(curve: &PdfCurve) -> f64 {
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 1..curve.grid.len() {
        let h = curve.grid[i] - curve.grid[i - 1];
        let (a, b) = (curve.values[i - 1], curve.values[i]);
        m0 += 0.5 * h * (a + b);
        m1 += 0.5 * h * (a * curve.grid[i - 1] + b * curve.grid[i]);
    }
    m1 / m0
}

/// Grid variance `∫ (x-μ)² f / ∫ f`, trapezoid rule.
pub fn curve_variance(curve: &PdfCurve) -> f64 {
    let mu = curve_mean(curve);
    let (mut m0, mut m2) = (0.0, 0.0);
    for i in 1..curve.grid.len() {
        let h = curve.grid[i] - curve.grid[i - 1];
        let (a, b) = (curve.values[i - 1], curve.values[i]);
        let (da, db) = (curve.grid[i - 1] - mu, curve.grid[i] - mu);
        m0 += 0.5 * h * (a + b);
        m2 += 0.5 * h * (a * da * da + b * db * db);
    }
    m2 / m0
}

pub fn curve_peak(curve: &PdfCurve) -> f64 {
    curve.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::HistogramAccumulator;

    #[test]
    fn ks_of_exact_cdf_on_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let e = Ecdf::from_values(xs).unwrap();
        let d = ks_statistic(|x: f64| x.clamp(0.0, 1.0), &e);
        assert!((d - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn tabulated_cdf_of_gaussian() {
        let nodes = panels(-8.0, 8.0, 800);
        let c = TabulatedCdf::new(|x: f64| (-x * x / 2.0).exp() / (2.0 * PI).sqrt(), nodes, 0.0).unwrap();
        assert!((c.total() - 1.0).abs() < 1e-12);
        assert!((c.eval(0.0) - 0.5).abs() < 1e-12);
        // Φ(1)
        assert!((c.eval(1.0) - 0.841_344_746_068_542_9).abs() < 1e-9);
        assert_eq!(c.eval(-100.0), 0.0);
    }

    #[test]
    fn sparse_edge_bins_do_not_count() {
        // one stray sample in a bin the density gives almost no mass
        let mut h = HistogramAccumulator::new(0.0, 1.0, 10).unwrap();
        for k in 0..100_000 {
            h.add(0.05 + 0.1 * (k % 9) as f64);
        }
        h.add(0.95);
        let emp = h.finish();
        let mut values: Vec<f64> = emp.densities.clone();
        values[9] = 1e-9;
        let centers = emp.centers();
        let curve = PdfCurve {
            which: PdfKind::Real,
            grid: centers.clone(),
            grid2: None,
            values,
            params: ChannelParams::unit_power(1, 1, 1).unwrap(),
            config: SeriesConfig::default(),
            diagnostics: vec![],
        };
        let r = sup_norm_report(&curve, &emp).unwrap();
        assert!(!r.bins[9].counted);
        assert!(r.bins[9].z > 100.0);
        assert!(r.pass, "D* = {}", r.d_star);
        // a well-populated bin the density misses still counts
        let mut off = curve.clone();
        off.values[4] *= 0.5;
        assert!(!sup_norm_report(&off, &emp).unwrap().pass);
    }

    #[test]
    fn grid_mismatch_detected() {
        let mut h = HistogramAccumulator::new(0.0, 1.0, 10).unwrap();
        h.add(0.5);
        let emp = h.finish();
        let curve = PdfCurve {
            which: PdfKind::Real,
            grid: vec![0.05, 0.15],
            grid2: None,
            values: vec![0.0, 0.0],
            params: ChannelParams::unit_power(1, 1, 1).unwrap(),
            config: SeriesConfig::default(),
            diagnostics: vec![],
        };
        assert!(matches!(
            sup_norm_report(&curve, &emp),
            Err(ValidationError::GridMismatch { bin: 2, .. })
        ));
    }
}

pub fn kind_for(projection: Projection) -> PdfKind {
    match projection {
        Projection::Real => PdfKind::Real,
        Projection::Imag => PdfKind::Imag,
        Projection::Magnitude => PdfKind::Envelope,
        Projection::Phase => PdfKind::Phase,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub projection: Projection,
    pub bins: usize,
    pub d_star: f64,
    pub threshold: f64,
    pub pass: bool,
    pub worst_center: Option<f64>,
    /// Curve points where the series did not converge.
    pub unconverged_points: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub params: ChannelParams,
    pub count: usize,
    pub seed: u64,
    pub projections: Vec<ProjectionReport>,
    pub pass: bool,
    pub seconds: f64,
}

/// Everything computed for one parameter set.
#[derive(Clone, Debug)]
pub struct PointValidation {
    pub report: PointReport,
    pub curves: Vec<(Projection, PdfCurve, EmpiricalDensity)>,
}

/// Samples the channel, bins each projection (Freedman–Diaconis), evaluates
/// the matching density at the bin centers and reports the studentized
/// sup-norm.
pub fn validate_point(
    params: &ChannelParams,
    config: &SeriesConfig,
    count: usize,
    seed: u64,
    projections: &[Projection],
    threshold: f64,
) -> Result<PointValidation, ValidationError> {
    let start = std::time::Instant::now();
    let batch = sample_composite(params, count, seed)?;
    let ev = Evaluator::new(params, config)?;
    let mut reports = Vec::new();
    let mut curves = Vec::new();
    for &projection in projections {
        let hist = histogram(&batch, projection, BinRule::FreedmanDiaconis)?;
        let curve = ev.curve_points(kind_for(projection), &hist.centers(), None);
        let r = sup_norm_report_with(&curve, &hist, threshold)?;
        reports.push(ProjectionReport {
            projection,
            bins: hist.bins(),
            d_star: r.d_star,
            threshold,
            pass: r.pass,
            worst_center: r.worst_bin.map(|i| r.bins[i].center),
            unconverged_points: curve.unconverged(),
            warnings: r.warnings,
        });
        curves.push((projection, curve, hist));
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(PointValidation {
        report: PointReport {
            params: *params,
            count,
            seed,
            projections: reports,
            pass,
            seconds: start.elapsed().as_secs_f64(),
        },
        curves,
    })
}

/// The parameter grid of the reference study: `m1 ∈ {1,2}`, `m2 ∈ {1,2,3}`,
/// `N ∈ {5,10}`, unit powers.
pub fn reference_grid() -> Vec<ChannelParams> {
    let mut out = Vec::new();
    for m1 in [1, 2] {
        for m2 in [1, 2, 3] {
            for n in [5, 10] {
                out.push(ChannelParams::unit_power(n, m1, m2).expect("valid"));
            }
        }
    }
    out
}
