use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ris_stats::montecarlo::{write_raw_header, write_raw_samples, CHUNK_SIZE, GENERATOR};
use ris_stats::validation::{normalization_audit, LOW_POWER_COUNT};
use ris_stats::{
    curve, curve_2d, freedman_diaconis_bins, histogram, sample_composite_with_budget, stream_composite,
    validate_point, BatchSummary, BinRule, ChannelParams, EmpiricalDensity, HistogramAccumulator,
    MomentAccumulator, PdfKind, Projection, SampleError, VERSION,
};
use serde_json::{json, Value};

use crate::args::{parse_grid_spec, Format, PdfArgs, SimulateArgs, ValidateArgs};
use crate::grid::{auto_primary, auto_secondary, parse_grid, Pilot, AUTO_POINTS, PILOT_COUNT};
use crate::Status;

const AUTO_POINTS_2D: (usize, usize) = (100, 64);
/// Values of the binned projection kept for the IQR when streaming.
const STREAM_PILOT: usize = 1_000_000;

fn provenance(command: &str, body: Value) -> Value {
    let mut p = json!({ "artifact_version": VERSION, "command": command });
    if let (Some(p), Value::Object(body)) = (p.as_object_mut(), body) {
        p.extend(body);
    }
    p
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn csv_with_provenance(prov: &Value, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = format!("# provenance: {prov}\n").into_bytes();
    body(&mut buf)?;
    Ok(buf)
}

fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(v)?;
    buf.push(b'\n');
    Ok(buf)
}

fn check_domain(which: PdfKind, primary: &[f64], secondary: Option<&[f64]>) -> Result<()> {
    let in_phase = |t: f64| t > -PI && t <= PI;
    match which {
        PdfKind::Envelope | PdfKind::Polar if primary.iter().any(|&r| !(r >= 0.0)) => {
            bail!("{} grid: radius must be ≥ 0", which.name())
        }
        PdfKind::Phase if !primary.iter().all(|&t| in_phase(t)) => bail!("phase grid must lie in (-π, π]"),
        PdfKind::Polar if !secondary.unwrap_or(&[]).iter().all(|&t| in_phase(t)) => {
            bail!("polar grid2 must lie in (-π, π]")
        }
        _ => Ok(()),
    }
}

pub fn pdf(a: &PdfArgs) -> Result<Status> {
    let params = a.channel.resolve()?;
    let config = a.series.config()?;
    let which = PdfKind::from(a.which);
    let two = which.is_bivariate();
    let auto1 = a.grid.trim() == "auto";
    let auto2 = two && a.grid2.trim() == "auto";
    let pilot = if auto1 || auto2 { Some(Pilot::run(&params, a.seed)?) } else { None };

    let primary = match &pilot {
        Some(p) if auto1 => auto_primary(which, p, if two { AUTO_POINTS_2D.0 } else { AUTO_POINTS }),
        _ => parse_grid(&a.grid)?,
    };
    let secondary = if two {
        Some(match &pilot {
            Some(p) if auto2 => auto_secondary(which, p, AUTO_POINTS_2D.1),
            _ => parse_grid(&a.grid2)?,
        })
    } else {
        None
    };
    check_domain(which, &primary, secondary.as_deref())?;

    let curve = match &secondary {
        Some(g2) => {
            let pts: Vec<(f64, f64)> = primary.iter().flat_map(|&x| g2.iter().map(move |&y| (x, y))).collect();
            curve_2d(which, &pts, &params, &config)?
        }
        None => curve(which, &primary, &params, &config)?,
    };

    let mut body = json!({
        "which": which.name(),
        "params": params,
        "config": config,
        "grid": a.grid,
        "seed": a.seed,
        "points": curve.len(),
    });
    if two {
        body["grid2"] = json!(a.grid2);
    }
    if pilot.is_some() {
        body["pilot_count"] = json!(PILOT_COUNT);
        body["generator"] = json!(GENERATOR);
    }
    let prov = provenance("pdf", body);
    let bytes = match a.format {
        Format::Csv => csv_with_provenance(&prov, |b| curve.write_csv(b))?,
        Format::Json => {
            let mut v = curve.to_json();
            v["provenance"] = prov;
            json_bytes(&v)?
        }
    };
    emit(a.out.as_deref(), &bytes)?;

    let bad = curve.unconverged();
    if bad > 0 {
        let first = curve.diagnostics.iter().find_map(|d| d.error.clone()).unwrap_or_default();
        eprintln!(
            "warning: series did not converge at {bad} of {} points; values there come from direct integration ({first})",
            curve.len()
        );
        return Ok(Status::NonConverged);
    }
    Ok(Status::Ok)
}

fn parse_bins(spec: &str) -> Result<BinRule> {
    let spec = spec.trim();
    if spec == "fd" {
        return Ok(BinRule::FreedmanDiaconis);
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("bins {spec:?} is not fd, a count, or lo:hi:bins");
        }
        return Ok(BinRule::Fixed {
            lo: parts[0].trim().parse().context("bins lo")?,
            hi: parts[1].trim().parse().context("bins hi")?,
            bins: parts[2].trim().parse().context("bin count")?,
        });
    }
    let bins = spec.parse().with_context(|| format!("bins {spec:?} is not fd, a count, or lo:hi:bins"))?;
    Ok(BinRule::Count { bins })
}

struct Simulated {
    hist: EmpiricalDensity,
    summary: BatchSummary,
    mode: &'static str,
}

fn simulate_in_memory(a: &SimulateArgs, params: &ChannelParams, projection: Projection, rule: BinRule) -> Result<Simulated> {
    let batch = sample_composite_with_budget(params, a.count, a.seed, a.memory_budget)?;
    if let Some(path) = &a.raw_out {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        write_raw_header(&mut w)?;
        write_raw_samples(&mut w, &batch.samples)?;
        w.flush()?;
    }
    Ok(Simulated {
        hist: histogram(&batch, projection, rule)?,
        summary: batch.summary(),
        mode: "in_memory",
    })
}

/// Two passes over the regenerated stream: moments, range and raw output
/// first, then the histogram.
fn simulate_streamed(a: &SimulateArgs, params: &ChannelParams, projection: Projection, rule: BinRule) -> Result<Simulated> {
    let raw = a.raw_out.as_ref().expect("streaming needs --raw-out");
    let mut w = BufWriter::new(File::create(raw).with_context(|| format!("creating {}", raw.display()))?);
    write_raw_header(&mut w)?;
    let mut totals = [MomentAccumulator::default(); 4];
    let mut pilot = Vec::new();
    let mut io_error = None;
    stream_composite(params, a.count, a.seed, |chunk| {
        debug_assert!(chunk.len() <= CHUNK_SIZE);
        for (k, p) in Projection::ALL.iter().enumerate() {
            let mut acc = MomentAccumulator::default();
            for v in chunk {
                acc.add(p.apply(v));
            }
            totals[k].merge(&acc);
        }
        let room = STREAM_PILOT.saturating_sub(pilot.len());
        pilot.extend(chunk.iter().take(room).map(|v| projection.apply(v)));
        if io_error.is_none() {
            io_error = write_raw_samples(&mut w, chunk).err();
        }
    })?;
    if let Some(e) = io_error {
        return Err(e).context("writing raw samples");
    }
    w.flush()?;

    let k = Projection::ALL.iter().position(|&p| p == projection).expect("listed");
    let m = totals[k].finish();
    let (lo, hi, bins) = match rule {
        BinRule::Fixed { lo, hi, bins } => (lo, hi, bins),
        _ if m.min == m.max => return Err(SampleError::DegenerateRange(m.min).into()),
        BinRule::Count { bins } => (m.min, m.max, bins),
        BinRule::FreedmanDiaconis => (m.min, m.max, freedman_diaconis_bins(&mut pilot, a.count, m.min, m.max)),
    };
    let mut hist = HistogramAccumulator::new(lo, hi, bins)?;
    stream_composite(params, a.count, a.seed, |chunk| {
        for v in chunk {
            hist.add(projection.apply(v));
        }
    })?;
    Ok(Simulated {
        hist: hist.finish(),
        summary: BatchSummary {
            artifact_version: VERSION.to_string(),
            generator: GENERATOR.to_string(),
            seed: a.seed,
            count: a.count,
            params: *params,
            real: totals[0].finish(),
            imag: totals[1].finish(),
            magnitude: totals[2].finish(),
            phase: totals[3].finish(),
        },
        mode: "streamed",
    })
}

pub fn simulate(a: &SimulateArgs) -> Result<Status> {
    let params = a.channel.resolve()?;
    let projection = Projection::from(a.projection);
    let rule = parse_bins(&a.bins)?;
    if a.count == 0 {
        bail!("count must be ≥ 1");
    }
    let over = a.count > a.memory_budget;
    if over && a.raw_out.is_none() {
        bail!(
            "{} samples exceed the in-memory budget of {}; pass --raw-out to stream them to disk",
            a.count,
            a.memory_budget
        );
    }
    let sim = if over {
        simulate_streamed(a, &params, projection, rule)?
    } else {
        simulate_in_memory(a, &params, projection, rule)?
    };

    let prov = provenance(
        "simulate",
        json!({
            "params": params,
            "count": a.count,
            "seed": a.seed,
            "generator": GENERATOR,
            "projection": projection.name(),
            "bins": a.bins,
            "bin_rule": rule,
            "mode": sim.mode,
        }),
    );
    let bytes = match a.format {
        Format::Csv => csv_with_provenance(&prov, |b| sim.hist.write_csv(b))?,
        Format::Json => json_bytes(&json!({ "provenance": prov, "histogram": sim.hist }))?,
    };
    emit(a.out.as_deref(), &bytes)?;
    if let Some(path) = &a.summary_out {
        let v = serde_json::to_value(&sim.summary)?;
        emit(Some(path), &json_bytes(&v)?)?;
    }
    Ok(Status::Ok)
}

pub fn validate(a: &ValidateArgs) -> Result<Status> {
    let grid = parse_grid_spec(&a.grid_spec)?;
    let config = a.series.config()?;
    if a.count == 0 {
        bail!("count must be ≥ 1");
    }
    if !(a.threshold > 0.0) {
        bail!("threshold must be positive");
    }
    let mut projections: Vec<Projection> = Vec::new();
    for p in a.projections.iter().map(|&p| Projection::from(p)) {
        if !projections.contains(&p) {
            projections.push(p);
        }
    }

    let mut warnings = Vec::new();
    if (a.count as u64) < LOW_POWER_COUNT {
        let w = format!(
            "count {} is below {LOW_POWER_COUNT}: standard-error envelopes are too wide for a failure to be meaningful",
            a.count
        );
        eprintln!("warning: {w}");
        warnings.push(w);
    }

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (i, params) in grid.iter().enumerate() {
        eprint!(
            "[{}/{}] N={} m1={} m2={} ",
            i + 1,
            grid.len(),
            params.n_elements,
            params.m1,
            params.m2
        );
        let mut entry = match validate_point(params, &config, a.count, a.seed, &projections, a.threshold) {
            Ok(pv) => {
                for r in &pv.report.projections {
                    eprint!("{}: D*={:.3} ", r.projection.name(), r.d_star);
                }
                serde_json::to_value(&pv.report)?
            }
            Err(e @ ris_stats::ValidationError::Sample(SampleError::OverBudget { .. })) => return Err(e.into()),
            Err(e) => json!({ "params": params, "pass": false, "error": e.to_string() }),
        };
        if a.audit {
            let audit = normalization_audit(params, &config)?;
            let ok = audit
                .entries
                .iter()
                .filter(|e| e.gamma_placement == config.gamma_placement)
                .all(|e| e.pass);
            entry["audit"] = serde_json::to_value(&audit)?;
            if !ok {
                entry["pass"] = json!(false);
            }
        }
        let pass = entry["pass"] == json!(true);
        eprintln!("{}", if pass { "pass" } else { "FAIL" });
        if !pass {
            failures.push(json!({ "index": i, "params": params }));
        }
        points.push(entry);
    }

    let all = failures.is_empty();
    let report = json!({
        "provenance": provenance("validate", json!({
            "grid_spec": a.grid_spec,
            "config": config,
            "count": a.count,
            "seed": a.seed,
            "threshold": a.threshold,
            "projections": projections,
            "audit": a.audit,
            "generator": GENERATOR,
        })),
        "warnings": warnings,
        "points": points,
        "failures": failures,
        "pass": all,
    });
    emit(Some(&a.out), &json_bytes(&report)?)?;
    Ok(if all { Status::Ok } else { Status::ValidationFailed })
}
