use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use ris_stats::{sample_composite, ChannelParams, PdfKind, Projection};

pub const AUTO_POINTS: usize = 500;
pub const PILOT_COUNT: usize = 100_000;
/// Keeps the phase grid off the singular endpoints.
const PHASE_MARGIN: f64 = 1e-9;

/// `min:max:points` as an evenly spaced grid, endpoints included.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid {spec:?} is not min:max:points or auto");
    }
    let lo: f64 = parts[0].trim().parse().with_context(|| format!("grid min {:?}", parts[0]))?;
    let hi: f64 = parts[1].trim().parse().with_context(|| format!("grid max {:?}", parts[1]))?;
    let n: usize = parts[2].trim().parse().with_context(|| format!("grid points {:?}", parts[2]))?;
    if !(lo.is_finite() && hi.is_finite()) {
        bail!("grid bounds must be finite");
    }
    if n == 0 {
        bail!("grid needs at least one point");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if !(lo < hi) {
        bail!("grid min {lo} must be below max {hi}");
    }
    Ok(linspace(lo, hi, n))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let mut g: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    g[n - 1] = hi;
    g
}

/// Location and spread of each projection from a short pilot run.
pub struct Pilot {
    pub real: (f64, f64),
    pub imag: (f64, f64),
    pub magnitude: (f64, f64),
}

impl Pilot {
    pub fn run(params: &ChannelParams, seed: u64) -> Result<Pilot> {
        let batch = sample_composite(params, PILOT_COUNT, seed)?;
        let m = |p: Projection| {
            let s = batch.moments(p);
            (s.mean, s.variance.sqrt())
        };
        Ok(Pilot {
            real: m(Projection::Real),
            imag: m(Projection::Imag),
            magnitude: m(Projection::Magnitude),
        })
    }
}

fn phase_range(n: usize) -> Vec<f64> {
    linspace(-PI + PHASE_MARGIN, PI - PHASE_MARGIN, n)
}

/// First axis: real part for real/joint, magnitude for envelope/polar.
pub fn auto_primary(which: PdfKind, pilot: &Pilot, points: usize) -> Vec<f64> {
    match which {
        PdfKind::Real | PdfKind::Joint => {
            let (mu, sd) = pilot.real;
            linspace(-2.0 * sd, mu + 8.0 * sd, points)
        }
        PdfKind::Imag => {
            let (_, sd) = pilot.imag;
            linspace(-8.0 * sd, 8.0 * sd, points)
        }
        PdfKind::Envelope | PdfKind::Polar => {
            let (mu, sd) = pilot.magnitude;
            linspace(0.0, mu + 8.0 * sd, points)
        }
        PdfKind::Phase => phase_range(points),
    }
}

/// Second axis: imaginary part for joint, phase for polar.
pub fn auto_secondary(which: PdfKind, pilot: &Pilot, points: usize) -> Vec<f64> {
    match which {
        PdfKind::Joint => {
            let (_, sd) = pilot.imag;
            linspace(-4.0 * sd, 4.0 * sd, points)
        }
        _ => phase_range(points),
    }
}
