//! Acceptance run. Prints one `PASS`/`FAIL` line per criterion (details
//! indented underneath) and exits non-zero if any criterion fails.
//!
//! Heavy: 10⁷ samples per reference point. Expect several minutes.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use ris_stats::validation::{curve_mean, curve_peak, curve_variance, real_part_location, DEFAULT_THRESHOLD};
use ris_stats::{
    build_inner_sum_table, cascade_moment, element_weights, normalization_audit, reference_grid, validate_point,
    ChannelParams, Evaluator, GammaPlacement, NormalizationAudit, PdfCurve, PdfKind, PhaseReading, PointValidation,
    Projection, SeriesConfig,
};
use serde_json::Value;

const COUNT: usize = 10_000_000;
const SEED: u64 = 20_240_601;
const MAX_SECONDS_PER_POINT: f64 = 600.0;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

/// Analytic curves over the density's own support, independent of where the
/// Monte Carlo samples fell.
struct SupportCurves {
    params: ChannelParams,
    real: PdfCurve,
    phase: PdfCurve,
}

fn support_curves(p: &ChannelParams, config: &SeriesConfig) -> SupportCurves {
    let ev = Evaluator::new(p, config).expect("evaluator");
    let (mean, sd) = real_part_location(ev.table()).expect("location");
    let (lo, hi) = (mean - 8.0 * sd, mean + 10.0 * sd);
    let real_grid: Vec<f64> = (0..=3000).map(|i| lo + (hi - lo) * i as f64 / 3000.0).collect();
    let phase_grid: Vec<f64> = (0..=720).map(|i| -PI + 1e-9 + (2.0 * PI - 2e-9) * i as f64 / 720.0).collect();
    SupportCurves {
        params: *p,
        real: ev.curve_points(PdfKind::Real, &real_grid, None),
        phase: ev.curve_points(PdfKind::Phase, &phase_grid, None),
    }
}

fn find<'a>(support: &'a [SupportCurves], n: u32, m1: u32, m2: u32) -> &'a SupportCurves {
    support
        .iter()
        .find(|s| (s.params.n_elements, s.params.m1, s.params.m2) == (n, m1, m2))
        .expect("reference point")
}

fn report(id: u8, name: &str, o: &Outcome) {
    println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
    for d in &o.details {
        println!("    {d}");
    }
}

fn label(p: &ChannelParams) -> String {
    format!("N={:<2} m1={} m2={}", p.n_elements, p.m1, p.m2)
}

fn projection<'a>(run: &'a PointValidation, which: Projection) -> (&'a ris_stats::ProjectionReport, &'a PdfCurve) {
    let r = run.report.projections.iter().find(|r| r.projection == which).expect("projection ran");
    let (_, c, _) = run.curves.iter().find(|(p, _, _)| *p == which).expect("curve kept");
    (r, c)
}

fn sup_norm_over_grid(runs: &[PointValidation], which: Projection) -> (bool, Vec<String>, f64) {
    let mut all = true;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for run in runs {
        let (r, _) = projection(run, which);
        let ok = r.pass && run.report.seconds <= MAX_SECONDS_PER_POINT;
        all &= ok;
        worst = worst.max(r.d_star);
        details.push(format!(
            "{}  D*={:>10.3}  bins={:<5} {:>6.1}s  {}",
            label(&run.report.params),
            r.d_star,
            r.bins,
            run.report.seconds,
            if ok { "ok" } else { "fail" }
        ));
    }
    (all, details, worst)
}

fn criterion_1(runs: &[PointValidation]) -> Outcome {
    let (pass, details, worst) = sup_norm_over_grid(runs, Projection::Real);
    Outcome {
        pass,
        summary: format!("real part vs histogram, worst D* = {worst:.3} (threshold {DEFAULT_THRESHOLD})"),
        details,
    }
}

fn criterion_2(runs: &[PointValidation]) -> Outcome {
    let (mc_pass, mut details, worst) = sup_norm_over_grid(runs, Projection::Magnitude);
    let mut checked = 0;
    let mut bad = 0;
    for run in runs {
        let (_, curve) = projection(run, Projection::Magnitude);
        let mut local = 0;
        for d in &curve.diagnostics {
            let Some(numeric) = d.numeric_value else { continue };
            if numeric <= 1e-6 {
                continue;
            }
            checked += 1;
            let agree = d.series_value.is_some_and(|s| (s - numeric).abs() <= 1e-4 * numeric);
            if !agree {
                local += 1;
            }
        }
        bad += local;
        details.push(format!("{}  series/numeric mismatches: {local}", label(&run.report.params)));
    }
    Outcome {
        pass: mc_pass && bad == 0,
        summary: format!(
            "envelope vs histogram worst D* = {worst:.3}; series disagrees with marginalization at {bad} of {checked} points"
        ),
        details,
    }
}

fn criterion_3(runs: &[PointValidation], support: &[SupportCurves]) -> Outcome {
    let (mc_pass, mut details, worst) = sup_norm_over_grid(runs, Projection::Phase);
    let mut trend = true;
    for m1 in [1, 2] {
        for m2 in [1, 2, 3] {
            let var = |n: u32| curve_variance(&find(support, n, m1, m2).phase);
            let (v5, v10) = (var(5), var(10));
            trend &= v10 < v5;
            details.push(format!("m1={m1} m2={m2}  phase variance N=5 {v5:.5}  N=10 {v10:.5}"));
        }
    }
    Outcome {
        pass: mc_pass && trend,
        summary: format!(
            "phase vs histogram worst D* = {worst:.3}; variance shrinks N=5→10 at every (m1,m2): {trend}"
        ),
        details,
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-stats"))
}

fn criterion_4(dir: &Path) -> Outcome {
    let mut points = 0;
    let mut over_tol = 0;
    let mut alarms = 0;
    let mut unconverged = 0;
    let mut details = Vec::new();
    for p in reference_grid() {
        let mut line = label(&p);
        for which in ["real", "envelope", "phase"] {
            let out = dir.join(format!("{which}-{}-{}-{}.json", p.n_elements, p.m1, p.m2));
            let status = cli()
                .args(["pdf", "--which", which, "--grid", "auto", "--format", "json"])
                .args(["--n", &p.n_elements.to_string(), "--m1", &p.m1.to_string(), "--m2", &p.m2.to_string()])
                .arg("--out")
                .arg(&out)
                .output()
                .expect("run ris-stats");
            let v: Value = serde_json::from_slice(&std::fs::read(&out).expect("curve written")).expect("json");
            let (mut a, mut u, mut t) = (0, 0, 0);
            for d in v["diagnostics"].as_array().expect("diagnostics") {
                points += 1;
                if d["converged"] != true {
                    u += 1;
                }
                if d["error"].as_str().is_some_and(|e| e.contains("cancellation alarm")) {
                    a += 1;
                }
                if d["tail_estimate"].as_f64().map_or(true, |t| t > 1e-6) {
                    t += 1;
                }
            }
            alarms += a;
            unconverged += u;
            over_tol += t;
            line.push_str(&format!(
                "  {which}: exit {} alarms {a} unconverged {u}",
                status.status.code().unwrap_or(-1)
            ));
        }
        details.push(line);
    }
    Outcome {
        pass: over_tol == 0 && alarms == 0 && unconverged == 0,
        summary: format!(
            "{points} auto-grid points: {alarms} cancellation alarms, {unconverged} unconverged, {over_tol} without a tail ≤ 1e-6"
        ),
        details,
    }
}

fn placement_passes_normalization(audit: &NormalizationAudit, placement: GammaPlacement) -> bool {
    audit.entries.iter().filter(|e| e.gamma_placement == placement).all(|e| e.pass)
}

fn criterion_5(audits: &[(ChannelParams, NormalizationAudit)]) -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for (p, audit) in audits {
        let mut line = label(p);
        for e in audit.entries.iter().filter(|e| e.gamma_placement == GammaPlacement::PerMultiIndex) {
            pass &= e.pass;
            line.push_str(&format!("  {}: {:.3e}", e.pdf.name(), e.deviation));
        }
        details.push(line);
    }
    Outcome {
        pass,
        summary: "|∫f - 1| within 1e-4 (real, envelope, phase) and 1e-10 (imag) at every reference point".into(),
        details,
    }
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `E[(R1 R2)^ν]` for independent Nakagami envelopes.
fn product_moment(p: &ChannelParams, nu: f64) -> f64 {
    let (m1, m2) = (p.m1 as f64, p.m2 as f64);
    let ln = ln_gamma(m1 + nu / 2.0) - ln_gamma(m1) + ln_gamma(m2 + nu / 2.0) - ln_gamma(m2)
        + nu / 2.0 * (p.omega1 / m1 * p.omega2 / m2).ln();
    ln.exp()
}

fn criterion_6() -> Outcome {
    let mut details = Vec::new();

    // N = 1 closed form
    let mut worst_closed = 0.0f64;
    for m1 in 1..=3 {
        for m2 in 1..=3 {
            let p = ChannelParams::new(1, m1, m2, 1.3, 0.7, 1.0).unwrap();
            for nu in [1.0, 2.0, 3.0, 4.0] {
                let got = cascade_moment(&p, nu).unwrap();
                worst_closed = worst_closed.max((got / product_moment(&p, nu) - 1.0).abs());
            }
        }
    }
    let closed_ok = worst_closed <= 1e-10;
    details.push(format!("N=1 closed form: worst relative error {worst_closed:.2e}"));

    // Monte Carlo of the cascade sum, drawn directly from Gamma variates
    let n_mc = 1_000_000;
    let mut worst_z = 0.0f64;
    for n in [2u32, 3] {
        for (m1, m2) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
            let p = ChannelParams::unit_power(n, m1, m2).unwrap();
            let g1 = Gamma::new(m1 as f64, p.omega1 / m1 as f64).unwrap();
            let g2 = Gamma::new(m2 as f64, p.omega2 / m2 as f64).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (n as u64 * 100 + m1 as u64 * 10 + m2 as u64));
            let mut sums = [0.0f64; 8];
            for _ in 0..n_mc {
                let x: f64 = (0..n).map(|_| (g1.sample(&mut rng) * g2.sample(&mut rng)).sqrt()).sum();
                let mut xp = 1.0;
                for k in 0..8 {
                    xp *= x;
                    sums[k] += xp;
                }
            }
            let mut line = format!("N={n} m1={m1} m2={m2}:");
            for nu in 1..=4usize {
                let mean = sums[nu - 1] / n_mc as f64;
                let se = ((sums[2 * nu - 1] / n_mc as f64 - mean * mean) / n_mc as f64).sqrt();
                let z = (cascade_moment(&p, nu as f64).unwrap() - mean) / se;
                worst_z = worst_z.max(z.abs());
                line.push_str(&format!("  ν={nu} z={z:.1}"));
            }
            details.push(line);
        }
    }
    let mc_ok = worst_z <= 4.0;

    // convolution table vs enumeration of every multi-index
    let mut worst_enum = 0.0f64;
    for n in 1..=5u32 {
        for m1 in 1..=3u32 {
            for m2 in 1..=3u32 {
                let p = ChannelParams::unit_power(n, m1, m2).unwrap();
                let w = element_weights(&p);
                let len = (n * (m1 - 1) + 1) as usize;
                let mut sum = vec![0.0; len];
                let mut scale = vec![0.0; len];
                let total = (m1 as usize).pow(n);
                for code in 0..total {
                    let (mut c, mut s, mut prod) = (code, 0, 1.0);
                    for _ in 0..n {
                        let i = c % m1 as usize;
                        c /= m1 as usize;
                        s += i;
                        prod *= w[i];
                    }
                    sum[s] += prod;
                    scale[s] += prod.abs();
                }
                let table = build_inner_sum_table(&p);
                for s in 0..len {
                    worst_enum = worst_enum.max((table.coefficients()[s] - sum[s]).abs() / scale[s]);
                }
            }
        }
    }
    let enum_ok = worst_enum <= 1e-12;
    details.push(format!("inner-sum table vs enumeration (N ≤ 5, m1 ≤ 3): worst {worst_enum:.2e}"));

    Outcome {
        pass: closed_ok && mc_ok && enum_ok,
        summary: format!(
            "closed form {}, Monte Carlo worst |z| = {worst_z:.1} ({}), enumeration {}",
            if closed_ok { "ok" } else { "fail" },
            if mc_ok { "ok" } else { "fail" },
            if enum_ok { "ok" } else { "fail" }
        ),
        details,
    }
}

/// Parameter sets where the phase series converges, so both readings can be
/// compared against the marginalization.
fn convergent_sets() -> Vec<ChannelParams> {
    [(1, 1, 1), (1, 2, 3), (2, 2, 2), (2, 1, 2), (2, 3, 1)]
        .into_iter()
        .map(|(n, m1, m2)| ChannelParams::new(n, m1, m2, 0.1, 0.1, 1.0).unwrap())
        .collect()
}

/// Compares the series under `reading` with the marginalization at every
/// angle where that series converges. Returns (matches, converged points,
/// worst relative gap).
fn reading_matches(reading: PhaseReading) -> (bool, usize, f64) {
    let cfg = SeriesConfig { phase_reading: reading, ..SeriesConfig::default() };
    let mut worst = 0.0f64;
    let mut converged = 0;
    for p in convergent_sets() {
        let ev = Evaluator::new(&p, &cfg).unwrap();
        for k in 1..48 {
            let theta = -PI + 2.0 * PI * k as f64 / 48.0 + 0.01;
            let numeric = ev.phase_numeric(theta).unwrap();
            if let Ok(v) = ev.phase_series(theta) {
                converged += 1;
                worst = worst.max((v.value - numeric).abs() / numeric.abs());
            }
        }
    }
    (converged >= 20 && worst <= 1e-5, converged, worst)
}

fn criterion_7(runs: &[PointValidation], c1: bool, audits: &[(ChannelParams, NormalizationAudit)]) -> Outcome {
    let mut details = Vec::new();
    let mut passing = Vec::new();

    let norm_default = audits.iter().all(|(_, a)| placement_passes_normalization(a, GammaPlacement::PerMultiIndex));
    details.push(format!(
        "per_multi_index: criterion 1 {}, normalization {}",
        c1, norm_default
    ));
    if c1 && norm_default {
        passing.push(GammaPlacement::PerMultiIndex);
    }

    let cfg = SeriesConfig { gamma_placement: GammaPlacement::PerElement, ..SeriesConfig::default() };
    let mut c1_alt = true;
    let mut worst = 0.0f64;
    for run in runs {
        let r = validate_point(&run.report.params, &cfg, COUNT, SEED, &[Projection::Real], DEFAULT_THRESHOLD)
            .expect("per-element run");
        let rep = &r.report.projections[0];
        c1_alt &= rep.pass;
        worst = worst.max(rep.d_star);
    }
    let norm_alt = audits.iter().all(|(_, a)| placement_passes_normalization(a, GammaPlacement::PerElement));
    details.push(format!(
        "per_element: criterion 1 {c1_alt} (worst D* = {worst:.3e}), normalization {norm_alt}"
    ));
    if c1_alt && norm_alt {
        passing.push(GammaPlacement::PerElement);
    }

    let mut readings = Vec::new();
    for reading in [PhaseReading::SineCorrected, PhaseReading::AsPrinted] {
        let (ok, points, worst) = reading_matches(reading);
        details.push(format!(
            "phase reading {}: matches marginalization {ok} ({points} converged angles, worst relative {worst:.2e})",
            reading.name()
        ));
        if ok {
            readings.push(reading);
        }
    }

    let names = |v: Vec<&str>| if v.is_empty() { "none".to_string() } else { v.join(", ") };
    Outcome {
        pass: passing.len() == 1 && readings.len() == 1,
        summary: format!(
            "Γ(u) placement passing: {}; phase reading matching: {}",
            names(passing.iter().map(|p| p.name()).collect()),
            names(readings.iter().map(|r| r.name()).collect())
        ),
        details,
    }
}

fn criterion_8(support: &[SupportCurves]) -> Outcome {
    let stat = |n: u32, m1: u32, m2: u32| {
        let c = &find(support, n, m1, m2).real;
        (curve_peak(c), curve_mean(c))
    };
    let mut violations = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            violations.push(what);
        }
    };
    for n in [5, 10] {
        for m2 in [1, 2, 3] {
            let (a, b) = (stat(n, 1, m2), stat(n, 2, m2));
            check(b.0 > a.0, format!("peak not increasing in m1 at N={n} m2={m2}"));
            check(b.1 > a.1, format!("mean not increasing in m1 at N={n} m2={m2}"));
        }
        for m1 in [1, 2] {
            for m2 in [1, 2] {
                let (a, b) = (stat(n, m1, m2), stat(n, m1, m2 + 1));
                check(b.0 > a.0, format!("peak not increasing in m2 at N={n} m1={m1} m2={m2}"));
                check(b.1 > a.1, format!("mean not increasing in m2 at N={n} m1={m1} m2={m2}"));
            }
        }
    }
    for m1 in [1, 2] {
        for m2 in [1, 2, 3] {
            let (a, b) = (stat(5, m1, m2), stat(10, m1, m2));
            check(a.0 > b.0, format!("peak not decreasing in N at m1={m1} m2={m2}"));
            check(b.1 > a.1, format!("mean not increasing in N at m1={m1} m2={m2}"));
        }
    }
    Outcome {
        pass: violations.is_empty(),
        summary: format!("{} monotonicity violations on the real-part curves", violations.len()),
        details: violations,
    }
}

fn criterion_9(dir: &Path) -> Outcome {
    let run = |tag: &str| {
        let status = cli()
            .args(["--threads", "4", "simulate", "--n", "5", "--m1", "1", "--m2", "1"])
            .args(["--count", "1000000", "--seed", "42"])
            .arg("--out")
            .arg(dir.join(format!("{tag}.csv")))
            .arg("--summary-out")
            .arg(dir.join(format!("{tag}.json")))
            .status()
            .expect("run ris-stats");
        assert!(status.success(), "simulate failed");
        let read = |ext: &str| std::fs::read(dir.join(format!("{tag}.{ext}"))).unwrap();
        (read("csv"), read("json"))
    };
    let (a, b) = (run("first"), run("second"));
    let same = a == b;
    Outcome {
        pass: same,
        summary: format!("two runs at seed 42, 4 threads: outputs {}", if same { "identical" } else { "differ" }),
        details: vec![],
    }
}

fn main() {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let config = SeriesConfig::default();
    let grid = reference_grid();

    eprintln!("sampling and evaluating {} reference points at {COUNT} samples each", grid.len());
    let runs: Vec<PointValidation> = grid
        .iter()
        .map(|p| {
            let r = validate_point(
                p,
                &config,
                COUNT,
                SEED,
                &[Projection::Real, Projection::Magnitude, Projection::Phase],
                DEFAULT_THRESHOLD,
            )
            .expect("reference point evaluates");
            eprintln!("  {}  {:.1}s", label(p), r.report.seconds);
            r
        })
        .collect();
    eprintln!("normalization audits");
    let audits: Vec<(ChannelParams, NormalizationAudit)> =
        grid.iter().map(|p| (*p, normalization_audit(p, &config).expect("audit"))).collect();

    eprintln!("full-support curves");
    let support: Vec<SupportCurves> = grid.iter().map(|p| support_curves(p, &config)).collect();

    let mut all = true;
    let mut record = |id: u8, name: &str, o: Outcome| {
        report(id, name, &o);
        all &= o.pass;
        o.pass
    };
    let c1 = record(1, "real part vs Monte Carlo", criterion_1(&runs));
    record(2, "envelope vs Monte Carlo and marginalization", criterion_2(&runs));
    record(3, "phase vs Monte Carlo and spread trend", criterion_3(&runs, &support));
    record(4, "series precision on auto grids", criterion_4(dir.path()));
    record(5, "normalization", criterion_5(&audits));
    record(6, "moment oracles", criterion_6());
    record(7, "reading resolution", criterion_7(&runs, c1, &audits));
    record(8, "monotone trends", criterion_8(&support));
    record(9, "determinism", criterion_9(dir.path()));
    println!("acceptance finished in {:.0}s", start.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
