//! Monte Carlo sampling of `h = Σ_k |h1_k||h2_k| + h_d` and the empirical
//! densities built from it.
//!
//! Samples are produced in fixed-size chunks; chunk `i` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `i`. The output therefore
//! depends only on `(params, count, seed)`, whatever the worker count.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{validate, ChannelParams, ComplexChannelValue};
use crate::error::SampleError;

pub const CHUNK_SIZE: usize = 1 << 16;
/// Default cap on in-memory batches, in samples (16 bytes each).
pub const DEFAULT_MEMORY_BUDGET: usize = 50_000_000;
pub const GENERATOR: &str = "chacha8, stream = chunk index, 65536 samples per chunk";
pub const RAW_MAGIC: &[u8; 8] = b"RISMC1\0\0";

/// Nakagami-`m` envelopes with spread `omega`: `√G`, `G ~ Gamma(m, omega/m)`.
pub fn sample_nakagami_envelope<R: Rng + ?Sized>(
    m: u32,
    omega: f64,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let g = Gamma::new(m as f64, omega / m as f64).expect("validated shape and scale");
    (0..count).map(|_| g.sample(rng).sqrt()).collect()
}

struct Draw {
    hop1: Gamma<f64>,
    hop2: Gamma<f64>,
    direct: Normal<f64>,
    n: u32,
}

impl Draw {
    fn new(p: &ChannelParams) -> Self {
        Draw {
            hop1: Gamma::new(p.m1 as f64, p.omega1 / p.m1 as f64).expect("validated"),
            hop2: Gamma::new(p.m2 as f64, p.omega2 / p.m2 as f64).expect("validated"),
            direct: Normal::new(0.0, (0.5 * p.sigma_h_sq).sqrt()).expect("validated"),
            n: p.n_elements,
        }
    }

    fn one<R: Rng>(&self, rng: &mut R) -> ComplexChannelValue {
        let mut cascade = 0.0;
        for _ in 0..self.n {
            let a = self.hop1.sample(rng);
            let b = self.hop2.sample(rng);
            cascade += (a * b).sqrt();
        }
        let re = self.direct.sample(rng);
        let im = self.direct.sample(rng);
        ComplexChannelValue::new(cascade + re, im)
    }
}

fn fill_chunk(draw: &Draw, seed: u64, chunk: usize, out: &mut [ComplexChannelValue]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    for v in out.iter_mut() {
        *v = draw.one(&mut rng);
    }
}

/// A reproducible batch of composite-channel samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<ComplexChannelValue>,
    pub params: ChannelParams,
    pub seed: u64,
    pub count: usize,
}

/// Draws `count` samples, refusing batches above [`DEFAULT_MEMORY_BUDGET`].
pub fn sample_composite(params: &ChannelParams, count: usize, seed: u64) -> Result<SampleBatch, SampleError> {
    sample_composite_with_budget(params, count, seed, DEFAULT_MEMORY_BUDGET)
}

pub fn sample_composite_with_budget(
    params: &ChannelParams,
    count: usize,
    seed: u64,
    budget: usize,
) -> Result<SampleBatch, SampleError> {
    let params = validate(*params)?;
    if count == 0 {
        return Err(SampleError::EmptyRequest);
    }
    if count > budget {
        return Err(SampleError::OverBudget {
            requested: count,
            budget,
        });
    }
    let draw = Draw::new(&params);
    let mut samples = vec![ComplexChannelValue::default(); count];
    samples
        .par_chunks_mut(CHUNK_SIZE)
        .enumerate()
        .for_each(|(i, chunk)| fill_chunk(&draw, seed, i, chunk));
    Ok(SampleBatch {
        samples,
        params,
        seed,
        count,
    })
}

/// Generates the same sequence as [`sample_composite`] without holding it,
/// handing chunks to `sink` in order. Chunks are generated in parallel
/// groups.
pub fn stream_composite<F>(params: &ChannelParams, count: usize, seed: u64, mut sink: F) -> Result<(), SampleError>
where
    F: FnMut(&[ComplexChannelValue]),
{
    let params = validate(*params)?;
    if count == 0 {
        return Err(SampleError::EmptyRequest);
    }
    let draw = Draw::new(&params);
    let chunks = count.div_ceil(CHUNK_SIZE);
    let group = rayon::current_num_threads().max(1) * 4;
    let mut start = 0;
    while start < chunks {
        let end = (start + group).min(chunks);
        let filled: Vec<Vec<ComplexChannelValue>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let len = CHUNK_SIZE.min(count - i * CHUNK_SIZE);
                let mut buf = vec![ComplexChannelValue::default(); len];
                fill_chunk(&draw, seed, i, &mut buf);
                buf
            })
            .collect();
        for buf in &filled {
            sink(buf);
        }
        start = end;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Real,
    Imag,
    Magnitude,
    Phase,
}

impl Projection {
    pub const ALL: [Projection; 4] = [
        Projection::Real,
        Projection::Imag,
        Projection::Magnitude,
        Projection::Phase,
    ];

    #[inline]
    pub fn apply(self, v: &ComplexChannelValue) -> f64 {
        match self {
            Projection::Real => v.re,
            Projection::Imag => v.im,
            Projection::Magnitude => v.magnitude(),
            Projection::Phase => v.phase(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Projection::Real => "real",
            Projection::Imag => "imag",
            Projection::Magnitude => "magnitude",
            Projection::Phase => "phase",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMoments {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

/// Running mean/variance (Welford), mergeable across chunks.
#[derive(Clone, Copy, Debug)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        MomentAccumulator {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl MomentAccumulator {
    pub fn add(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&mut self, o: &MomentAccumulator) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        self.n = n;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn finish(&self) -> ProjectionMoments {
        ProjectionMoments {
            mean: self.mean,
            variance: if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 },
            min: self.min,
            max: self.max,
        }
    }
}

/// Serializable description of a batch; the raw samples are not included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub artifact_version: String,
    pub generator: String,
    pub seed: u64,
    pub count: usize,
    pub params: ChannelParams,
    pub real: ProjectionMoments,
    pub imag: ProjectionMoments,
    pub magnitude: ProjectionMoments,
    pub phase: ProjectionMoments,
}

impl SampleBatch {
    pub fn values(&self, projection: Projection) -> Vec<f64> {
        self.samples.par_iter().map(|v| projection.apply(v)).collect()
    }

    pub fn moments(&self, projection: Projection) -> ProjectionMoments {
        self.samples
            .par_chunks(CHUNK_SIZE)
            .map(|c| {
                let mut acc = MomentAccumulator::default();
                for v in c {
                    acc.add(projection.apply(v));
                }
                acc
            })
            .collect::<Vec<_>>()
            .iter()
            .fold(MomentAccumulator::default(), |mut a, b| {
                a.merge(b);
                a
            })
            .finish()
    }

    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            artifact_version: crate::VERSION.to_string(),
            generator: GENERATOR.to_string(),
            seed: self.seed,
            count: self.count,
            params: self.params,
            real: self.moments(Projection::Real),
            imag: self.moments(Projection::Imag),
            magnitude: self.moments(Projection::Magnitude),
            phase: self.moments(Projection::Phase),
        }
    }
}

/// How histogram bins are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum BinRule {
    /// Freedman–Diaconis width over the sample range.
    FreedmanDiaconis,
    /// A fixed number of equal bins over the sample range.
    Count { bins: usize },
    /// Explicit range; samples outside it are counted but not binned.
    Fixed { lo: f64, hi: f64, bins: usize },
}

pub const MAX_FD_BINS: usize = 4096;

/// Density-normalized histogram with per-bin binomial standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub count: u64,
}

impl EmpiricalDensity {
    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.bin_edges[i + 1] - self.bin_edges[i]
    }

    /// `Σ density · width`.
    pub fn mass(&self) -> f64 {
        self.densities
            .iter()
            .enumerate()
            .map(|(i, d)| d * self.width(i))
            .sum()
    }

    /// Histogram mean `Σ center · density · width`.
    pub fn mean(&self) -> f64 {
        self.centers()
            .iter()
            .zip(&self.densities)
            .enumerate()
            .map(|(i, (c, d))| c * d * self.width(i))
            .sum()
    }

    /// Frozen columns: `bin_lo,bin_hi,density,std_error`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,density,std_error")?;
        for i in 0..self.bins() {
            writeln!(
                out,
                "{},{},{},{}",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                self.densities[i],
                self.std_errors[i]
            )?;
        }
        Ok(())
    }
}

/// Equal-width bin counts over `[lo, hi]`; mergeable across workers.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramAccumulator {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    total: u64,
}

impl HistogramAccumulator {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self, SampleError> {
        if bins < 10 {
            return Err(SampleError::TooFewBins(bins));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SampleError::BadRange { lo, hi });
        }
        Ok(HistogramAccumulator {
            lo,
            hi,
            counts: vec![0; bins],
            total: 0,
        })
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.total += 1;
        if !(x >= self.lo && x <= self.hi) {
            return;
        }
        let bins = self.counts.len();
        let i = (((x - self.lo) / (self.hi - self.lo)) * bins as f64) as usize;
        self.counts[i.min(bins - 1)] += 1;
    }

    pub fn merge(&mut self, other: &HistogramAccumulator) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn finish(&self) -> EmpiricalDensity {
        let bins = self.counts.len();
        let width = (self.hi - self.lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / bins as f64)
            .collect();
        edges[bins] = self.hi;
        let n = self.total.max(1) as f64;
        let densities = self.counts.iter().map(|&c| c as f64 / (n * width)).collect();
        let std_errors = self
            .counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                (p * (1.0 - p) / n).sqrt() / width
            })
            .collect();
        EmpiricalDensity {
            bin_edges: edges,
            densities,
            std_errors,
            count: self.total,
        }
    }
}

/// Freedman–Diaconis bin count over `[lo, hi]`. The IQR comes from `values`,
/// which may be a pilot subset of the `total` samples that will be binned.
pub fn freedman_diaconis_bins(values: &mut [f64], total: usize, lo: f64, hi: f64) -> usize {
    let n = values.len();
    if n == 0 {
        return 10;
    }
    let q = |values: &mut [f64], f: f64| {
        let k = ((n - 1) as f64 * f).round() as usize;
        *values.select_nth_unstable_by(k, f64::total_cmp).1
    };
    let iqr = q(values, 0.75) - q(values, 0.25);
    if !(iqr > 0.0) {
        return 10;
    }
    let width = 2.0 * iqr / (total.max(n) as f64).cbrt();
    (((hi - lo) / width).ceil() as usize).clamp(10, MAX_FD_BINS)
}

/// Histogram of one projection of a batch.
pub fn histogram(batch: &SampleBatch, projection: Projection, rule: BinRule) -> Result<EmpiricalDensity, SampleError> {
    let (lo, hi, bins) = match rule {
        BinRule::Fixed { lo, hi, bins } => (lo, hi, bins),
        _ => {
            let m = batch.moments(projection);
            if m.min == m.max {
                return Err(SampleError::DegenerateRange(m.min));
            }
            let bins = match rule {
                BinRule::Count { bins } => bins,
                _ => freedman_diaconis_bins(&mut batch.values(projection), batch.count, m.min, m.max),
            };
            (m.min, m.max, bins)
        }
    };
    let proto = HistogramAccumulator::new(lo, hi, bins)?;
    let acc = batch
        .samples
        .par_chunks(CHUNK_SIZE)
        .map(|c| {
            let mut h = proto.clone();
            for v in c {
                h.add(projection.apply(v));
            }
            h
        })
        .reduce(
            || proto.clone(),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    Ok(acc.finish())
}

/// Right-continuous empirical CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self, SampleError> {
        if values.is_empty() {
            return Err(SampleError::EmptyRequest);
        }
        values.par_sort_unstable_by(f64::total_cmp);
        Ok(Ecdf { sorted: values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn ecdf(batch: &SampleBatch, projection: Projection) -> Result<Ecdf, SampleError> {
    Ecdf::from_values(batch.values(projection))
}

/// Writes the magic header followed by little-endian `(re, im)` pairs.
pub fn write_raw_header<W: Write>(out: &mut W) -> io::Result<()> {
    out.write_all(RAW_MAGIC)
}

pub fn write_raw_samples<W: Write>(out: &mut W, samples: &[ComplexChannelValue]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(samples.len() * 16);
    for v in samples {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_raw<R: Read>(mut input: R) -> io::Result<Vec<ComplexChannelValue>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != RAW_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "missing RISMC1 header"));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated sample pair"));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            ComplexChannelValue::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect())
}
