use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_stats::montecarlo::DEFAULT_MEMORY_BUDGET;
use ris_stats::validation::DEFAULT_THRESHOLD;
use ris_stats::{
    ChannelParams, EnvelopeCoefficients, GammaPlacement, PdfKind, PhaseReading, PrecisionMode, Projection,
    RawChannelParams, SeriesConfig,
};

#[derive(Debug, Parser)]
#[command(name = "ris-stats", version, about = "Densities, Monte Carlo and validation for the RIS composite channel")]
pub struct Cli {
    /// Worker threads [default: all cores, or RIS_STATS_THREADS]
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a density on a grid
    Pdf(PdfArgs),
    /// Draw channel samples and write a histogram of one projection
    Simulate(SimulateArgs),
    /// Compare densities against Monte Carlo histograms over a parameter grid
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Channel parameters. Flags override values read from `--params`; anything
/// unset defaults to N = 5, m1 = m2 = 1 and unit powers.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// JSON file with n_elements, m1, m2, omega1, omega2, sigma_h_sq
    #[arg(long, value_name = "PATH")]
    pub params: Option<PathBuf>,
    /// Number of surface elements
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    /// Nakagami shape of the first hop
    #[arg(long, allow_negative_numbers = true)]
    pub m1: Option<f64>,
    /// Nakagami shape of the second hop
    #[arg(long, allow_negative_numbers = true)]
    pub m2: Option<f64>,
    /// Mean power of the first hop
    #[arg(long, allow_negative_numbers = true)]
    pub omega1: Option<f64>,
    /// Mean power of the second hop
    #[arg(long, allow_negative_numbers = true)]
    pub omega2: Option<f64>,
    /// Variance of the direct path
    #[arg(long = "sigma-h-sq", allow_negative_numbers = true)]
    pub sigma_h_sq: Option<f64>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<ChannelParams> {
        let mut raw = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<RawChannelParams>(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => RawChannelParams {
                n_elements: 5.0,
                m1: 1.0,
                m2: 1.0,
                omega1: 1.0,
                omega2: 1.0,
                sigma_h_sq: 1.0,
            },
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut raw.n_elements, self.n);
        set(&mut raw.m1, self.m1);
        set(&mut raw.m2, self.m2);
        set(&mut raw.omega1, self.omega1);
        set(&mut raw.omega2, self.omega2);
        set(&mut raw.sigma_h_sq, self.sigma_h_sq);
        Ok(ChannelParams::try_from(raw)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    Standard,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Placement {
    PerMultiIndex,
    PerElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Coefficients {
    Derived,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reading {
    SineCorrected,
    AsPrinted,
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    /// Target relative truncation error of the series
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    /// Maximum outer series index
    #[arg(long, default_value_t = 400)]
    pub max_ell: u32,
    /// Maximum inner index of the envelope series
    #[arg(long, default_value_t = 2000)]
    pub max_q: u32,
    #[arg(long, value_enum, default_value_t = Precision::Extended)]
    pub precision: Precision,
    /// Where the Gamma normalization of the inner sum sits
    #[arg(long, value_enum, default_value_t = Placement::PerMultiIndex)]
    pub gamma_placement: Placement,
    #[arg(long, value_enum, default_value_t = Coefficients::Derived)]
    pub envelope_coefficients: Coefficients,
    #[arg(long, value_enum, default_value_t = Reading::SineCorrected)]
    pub phase_reading: Reading,
}

impl SeriesArgs {
    pub fn config(&self) -> Result<SeriesConfig> {
        let cfg = SeriesConfig {
            rel_tol: self.rel_tol,
            max_ell: self.max_ell,
            max_q: self.max_q,
            precision_mode: match self.precision {
                Precision::Standard => PrecisionMode::Standard,
                Precision::Extended => PrecisionMode::Extended,
            },
            gamma_placement: match self.gamma_placement {
                Placement::PerMultiIndex => GammaPlacement::PerMultiIndex,
                Placement::PerElement => GammaPlacement::PerElement,
            },
            envelope_coefficients: match self.envelope_coefficients {
                Coefficients::Derived => EnvelopeCoefficients::Derived,
                Coefficients::AsPrinted => EnvelopeCoefficients::AsPrinted,
            },
            phase_reading: match self.phase_reading {
                Reading::SineCorrected => PhaseReading::SineCorrected,
                Reading::AsPrinted => PhaseReading::AsPrinted,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Real,
    Imag,
    Joint,
    Polar,
    Envelope,
    Phase,
}

impl From<Which> for PdfKind {
    fn from(w: Which) -> Self {
        match w {
            Which::Real => PdfKind::Real,
            Which::Imag => PdfKind::Imag,
            Which::Joint => PdfKind::Joint,
            Which::Polar => PdfKind::Polar,
            Which::Envelope => PdfKind::Envelope,
            Which::Phase => PdfKind::Phase,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PdfArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    #[command(flatten)]
    pub channel: ParamArgs,
    #[command(flatten)]
    pub series: SeriesArgs,
    /// min:max:points, or auto (range from a pilot simulation)
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub grid: String,
    /// Second axis for joint (imaginary part) and polar (phase) densities
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub grid2: String,
    /// Seed of the pilot simulation behind --grid auto
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectionArg {
    Real,
    Imag,
    Magnitude,
    Phase,
}

impl From<ProjectionArg> for Projection {
    fn from(p: ProjectionArg) -> Self {
        match p {
            ProjectionArg::Real => Projection::Real,
            ProjectionArg::Imag => Projection::Imag,
            ProjectionArg::Magnitude => Projection::Magnitude,
            ProjectionArg::Phase => Projection::Phase,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ParamArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ProjectionArg::Real)]
    pub projection: ProjectionArg,
    /// fd (Freedman–Diaconis), a bin count, or lo:hi:bins
    #[arg(long, default_value = "fd", allow_hyphen_values = true)]
    pub bins: String,
    /// Histogram output [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Batch summary (moments of every projection) as JSON
    #[arg(long, value_name = "PATH")]
    pub summary_out: Option<PathBuf>,
    /// Stream the raw samples to this file; lifts the memory budget
    #[arg(long, value_name = "PATH")]
    pub raw_out: Option<PathBuf>,
    /// Largest sample count held in memory
    #[arg(long, default_value_t = DEFAULT_MEMORY_BUDGET)]
    pub memory_budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// `reference`, or key=v1,v2;... over n, m1, m2, omega1, omega2, sigma_h_sq
    #[arg(long, default_value = "reference")]
    pub grid_spec: String,
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long, default_value_t = 10_000_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Studentized sup-norm above which a projection fails
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ProjectionArg::Real, ProjectionArg::Magnitude, ProjectionArg::Phase])]
    pub projections: Vec<ProjectionArg>,
    /// Also integrate every density and fail points that do not normalize
    #[arg(long)]
    pub audit: bool,
    #[arg(long, value_name = "PATH", default_value = "validation_report.json")]
    pub out: PathBuf,
}

/// Parses `reference` or `n=5,10;m1=1,2;...`. Points are ordered m1, m2, n
/// (outer to inner), then the powers.
pub fn parse_grid_spec(spec: &str) -> Result<Vec<ChannelParams>> {
    if spec.trim() == "reference" {
        return Ok(ris_stats::reference_grid());
    }
    let mut axes: [(&str, Vec<f64>); 6] = [
        ("m1", vec![1.0]),
        ("m2", vec![1.0]),
        ("n", vec![5.0]),
        ("omega1", vec![1.0]),
        ("omega2", vec![1.0]),
        ("sigma_h_sq", vec![1.0]),
    ];
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part.split_once('=').with_context(|| format!("grid spec entry {part:?} lacks '='"))?;
        let key = key.trim().replace('-', "_");
        let Some(axis) = axes.iter_mut().find(|(k, _)| *k == key) else {
            bail!("unknown grid spec key {key:?}");
        };
        axis.1 = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?} for {key}")))
            .collect::<Result<_>>()?;
        if axis.1.is_empty() {
            bail!("no values for {key}");
        }
    }
    let mut points = vec![Vec::new()];
    for (_, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|p| {
            Ok(ChannelParams::try_from(RawChannelParams {
                m1: p[0],
                m2: p[1],
                n_elements: p[2],
                omega1: p[3],
                omega2: p[4],
                sigma_h_sq: p[5],
            })?)
        })
        .collect()
}
