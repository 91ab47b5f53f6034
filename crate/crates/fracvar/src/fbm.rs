//! Exact sampling of fractional Brownian motion (fBm) on uniform dyadic grids.
//!
//! Sampling uses the Davies–Harte method: the stationary increment process
//! (fractional Gaussian noise) has autocovariance
//! `r(k) = (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H}) / 2` in grid units, and the
//! Toeplitz covariance of `2^f` increments embeds into a circulant matrix of
//! size `2^{f+1}` whose eigenvalues are the DFT of the first row. A complex
//! Gaussian vector shaped by the square roots of those eigenvalues is
//! transformed back, yielding increments with exactly the right law; the path
//! is their cumulative sum scaled by `mesh^H`.
//!
//! Reproducibility: each component draws from its own ChaCha8 stream
//! (`seed_from_u64(seed)` + `set_stream(component)`), consuming `2 · 2^f`
//! standard-normal variates (ziggurat, via `rand_distr::StandardNormal`) as
//! two consecutive blocks. Identical requests produce bit-identical paths,
//! and components can be generated in any order.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::{Error, Result};

/// Hurst index of a fractional Brownian motion.
///
/// Any value in (0, 1) is valid for sampling; the estimation pipeline is
/// backed by theory for indices in (1/3, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidHurst(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exact covariance `E(B_s B_t)` of scalar fBm with the given Hurst index.
pub fn fbm_covariance(hurst: HurstIndex, s: f64, t: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::NegativeTime(s));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let two_h = 2.0 * hurst.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Request for sampling a `K`-component fBm path on the dyadic grid of level
/// `fine_level` over `[0, horizon]` (`2^fine_level + 1` points).
#[derive(Clone, Copy, Debug)]
pub struct FbmSampleRequest {
    pub hurst: HurstIndex,
    pub num_components: usize,
    pub fine_level: u32,
    pub horizon: f64,
    pub seed: u64,
}

impl FbmSampleRequest {
    fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::InvalidRequest("need at least one component".into()));
        }
        if self.fine_level == 0 || self.fine_level > SampledPath::MAX_LEVEL {
            return Err(Error::InvalidRequest(format!(
                "fine level must lie in 1..={}, got {}",
                SampledPath::MAX_LEVEL,
                self.fine_level
            )));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::InvalidRequest(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Values of a d-dimensional path on the uniform dyadic grid of a level over
/// `[0, horizon]`: row `i` holds the value at time `i · horizon · 2^{-level}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    dim: usize,
    level: u32,
    horizon: f64,
    values: Vec<f64>,
}

impl SampledPath {
    /// Levels above this would allocate unreasonably large grids.
    pub const MAX_LEVEL: u32 = 26;

    /// Wraps raw row-major values of shape `(2^level + 1) × dim`.
    pub fn new(dim: usize, level: u32, horizon: f64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if level > Self::MAX_LEVEL {
            return Err(Error::InvalidPath(format!(
                "level {} exceeds maximum {}",
                level,
                Self::MAX_LEVEL
            )));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidPath(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let points = (1usize << level) + 1;
        if values.len() != points * dim {
            return Err(Error::InvalidPath(format!(
                "expected {} values ({} points x {} components), got {}",
                points * dim,
                points,
                dim,
                values.len()
            )));
        }
        Ok(Self { dim, level, horizon, values })
    }

    /// Builds a scalar path by evaluating `f` at every grid time.
    pub fn from_scalar_fn(level: u32, horizon: f64, f: impl Fn(f64) -> f64) -> Self {
        let points = (1usize << level) + 1;
        let values = (0..points)
            .map(|i| f(horizon * i as f64 / (1u64 << level) as f64))
            .collect();
        Self::new(1, level, horizon, values).expect("grid shape is consistent by construction")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_intervals(&self) -> usize {
        1usize << self.level
    }

    pub fn num_points(&self) -> usize {
        self.num_intervals() + 1
    }

    /// Grid spacing `horizon · 2^{-level}`.
    pub fn mesh(&self) -> f64 {
        self.horizon / self.num_intervals() as f64
    }

    /// Time of grid point `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.num_intervals() as f64
    }

    pub fn value(&self, point: usize, component: usize) -> f64 {
        self.values[point * self.dim + component]
    }

    pub fn row(&self, point: usize) -> &[f64] {
        &self.values[point * self.dim..(point + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Extracts one component as a scalar path.
    pub fn component(&self, component: usize) -> SampledPath {
        let values = (0..self.num_points()).map(|i| self.value(i, component)).collect();
        SampledPath { dim: 1, level: self.level, horizon: self.horizon, values }
    }

    /// Applies a scalar observable pointwise, producing a scalar path.
    pub fn map_scalar(&self, f: impl Fn(&[f64]) -> f64) -> SampledPath {
        let values = (0..self.num_points()).map(|i| f(self.row(i))).collect();
        SampledPath { dim: 1, level: self.level, horizon: self.horizon, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Writes the path as CSV with header `t,x1,...,xd`, one row per grid
    /// point. Numbers use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "t")?;
        for c in 1..=self.dim {
            write!(out, ",x{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.num_points() {
            write!(out, "{}", self.time(i))?;
            for c in 0..self.dim {
                write!(out, ",{}", self.value(i, c))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads a path from the CSV layout produced by [`SampledPath::write_csv`].
    ///
    /// The number of data rows must be `2^level + 1` for some level; the grid
    /// position comes from the row index and the horizon from the last time.
    pub fn read_csv<R: BufRead>(input: R) -> Result<SampledPath> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let columns: Vec<&str> = header.trim().split(',').collect();
        if columns.first() != Some(&"t") || columns.len() < 2 {
            return Err(Error::Parse(format!("expected header `t,x1,...`, got `{header}`")));
        }
        let dim = columns.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    fields.len(),
                    dim + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}` in row {}", row + 1)))
            };
            times.push(parse(fields[0])?);
            for field in &fields[1..] {
                values.push(parse(field)?);
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse("need at least two grid points".into()));
        }
        let intervals = times.len() - 1;
        if !intervals.is_power_of_two() {
            return Err(Error::Parse(format!(
                "{} rows do not form a dyadic grid (2^level + 1 points)",
                times.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::Parse(format!("grid must start at time 0, got {}", times[0])));
        }
        SampledPath::new(dim, intervals.trailing_zeros(), *times.last().unwrap(), values)
    }
}

/// Negative circulant eigenvalues larger than this fraction of the largest
/// eigenvalue abort sampling; smaller ones are roundoff and are clamped to 0.
const EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// Samples `K` independent scalar fBm components on the dyadic grid of
/// `fine_level` using Davies–Harte circulant embedding.
///
/// Every component starts at exactly 0, and the output is a deterministic
/// function of the request, including the seed.
pub fn sample_fbm(request: &FbmSampleRequest) -> Result<SampledPath> {
    request.validate()?;
    let hurst = request.hurst.value();
    let increments = 1usize << request.fine_level;
    let embed = 2 * increments;

    // Autocovariance of unit-spacing fractional Gaussian noise.
    let two_h = 2.0 * hurst;
    let autocov = |k: f64| 0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).abs().powf(two_h) - 2.0 * k.powf(two_h));

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(embed);

    // First row of the circulant embedding; its DFT gives the eigenvalues,
    // real up to roundoff because the row is symmetric.
    let mut spectrum: Vec<Complex<f64>> = (0..embed)
        .map(|j| Complex::new(autocov(j.min(embed - j) as f64), 0.0))
        .collect();
    fft.process(&mut spectrum);

    let max_eig = spectrum.iter().map(|c| c.re).fold(f64::MIN, f64::max);
    let tolerance = EIGENVALUE_TOLERANCE * max_eig.max(0.0);
    let mut eigenvalues = Vec::with_capacity(embed);
    for c in &spectrum {
        if c.re < -tolerance {
            return Err(Error::EmbeddingFailure { eigenvalue: c.re, tolerance });
        }
        eigenvalues.push(c.re.max(0.0));
    }

    let scale = (request.horizon / increments as f64).powf(hurst);
    let dim = request.num_components;
    let mut values = vec![0.0; (increments + 1) * dim];
    let mut shaped = vec![Complex::new(0.0, 0.0); embed];

    for component in 0..dim {
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        rng.set_stream(component as u64);
        let first: Vec<f64> = (0..increments).map(|_| rng.sample(StandardNormal)).collect();
        let second: Vec<f64> = (0..increments).map(|_| rng.sample(StandardNormal)).collect();

        shaped[0] = Complex::new((eigenvalues[0] / embed as f64).sqrt() * first[0], 0.0);
        shaped[increments] =
            Complex::new((eigenvalues[increments] / embed as f64).sqrt() * second[0], 0.0);
        for j in 1..increments {
            let amplitude = (eigenvalues[j] / (2 * embed) as f64).sqrt();
            shaped[j] = Complex::new(amplitude * first[j], amplitude * second[j]);
            shaped[embed - j] = Complex::new(amplitude * first[j], -amplitude * second[j]);
        }
        fft.process(&mut shaped);

        // Scaled cumulative sum; the value at time 0 stays exactly 0.
        let mut acc = 0.0;
        for i in 0..increments {
            acc += shaped[i].re * scale;
            values[(i + 1) * dim + component] = acc;
        }
    }

    SampledPath::new(dim, request.fine_level, request.horizon, values)
}
