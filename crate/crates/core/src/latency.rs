//! Pipeline latency models: constant, moment-matched shifted log-normal, and
//! replay of a recorded trace.
//!
//! Draws are a pure function of `(seed, draw_index)`: each draw seeds its own
//! ChaCha stream, so any job of any run can be reproduced in isolation and
//! several policies can share one delay sequence.
//!
//! Sampled delays are resolved to 1e-6 ms, which is exactly what the CSV
//! trace format stores, so a saved trace replays bit-identically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PREPROCESS_FRACTION: f64 = 0.25;

const TRACE_HEADER: [&str; 2] = ["preprocess_ms", "inference_ms"];
const RESOLUTION: f64 = 1e6;

fn quantize(ms: f64) -> f64 {
    (ms * RESOLUTION).round() / RESOLUTION
}

/// One job's `(preprocess, inference)` latency pair in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    pub preprocess_ms: f64,
    pub inference_ms: f64,
}

impl DelaySample {
    pub fn new(preprocess_ms: f64, inference_ms: f64) -> Result<Self> {
        for (name, v) in [
            ("preprocess_ms", preprocess_ms),
            ("inference_ms", inference_ms),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDelay(format!("{name} = {v}")));
            }
        }
        Ok(DelaySample {
            preprocess_ms,
            inference_ms,
        })
    }

    pub fn total_ms(&self) -> f64 {
        self.preprocess_ms + self.inference_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatencyKind {
    Constant {
        total_ms: f64,
    },
    /// `min_ms + LogNormal(mu, sigma)`.
    ShiftedLogNormal {
        min_ms: f64,
        mu: f64,
        sigma: f64,
    },
    TraceReplay {
        path: PathBuf,
        samples: Arc<Vec<DelaySample>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel {
    kind: LatencyKind,
    preprocess_fraction: f64,
    seed: u64,
}

/// Moment-matches `min_ms + LogNormal(mu, sigma)` to the given mean and
/// standard deviation. A zero `std_ms` collapses to a constant model.
pub fn fit_shifted_lognormal(mean_ms: f64, std_ms: f64, min_ms: f64) -> Result<LatencyModel> {
    if ![mean_ms, std_ms, min_ms].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidModel("parameters must be finite".into()));
    }
    if min_ms < 0.0 {
        return Err(Error::InvalidModel(format!(
            "min_ms = {min_ms} is negative"
        )));
    }
    if std_ms < 0.0 {
        return Err(Error::InvalidModel(format!(
            "std_ms = {std_ms} is negative"
        )));
    }
    if std_ms == 0.0 {
        return LatencyModel::constant(mean_ms);
    }
    if mean_ms <= min_ms {
        return Err(Error::InvalidModel(format!(
            "mean_ms ({mean_ms}) must exceed min_ms ({min_ms})"
        )));
    }
    let m = mean_ms - min_ms;
    let sigma2 = (1.0 + std_ms * std_ms / (m * m)).ln();
    let mu = m.ln() - sigma2 / 2.0;
    Ok(LatencyModel::new(LatencyKind::ShiftedLogNormal {
        min_ms,
        mu,
        sigma: sigma2.sqrt(),
    }))
}

impl LatencyModel {
    fn new(kind: LatencyKind) -> Self {
        LatencyModel {
            kind,
            preprocess_fraction: DEFAULT_PREPROCESS_FRACTION,
            seed: 0,
        }
    }

    pub fn constant(total_ms: f64) -> Result<Self> {
        if !total_ms.is_finite() || total_ms < 0.0 {
            return Err(Error::InvalidModel(format!("constant delay {total_ms} ms")));
        }
        Ok(LatencyModel::new(LatencyKind::Constant { total_ms }))
    }

    pub fn replay(trace: DelayTrace, path: impl Into<PathBuf>) -> Self {
        LatencyModel::new(LatencyKind::TraceReplay {
            path: path.into(),
            samples: Arc::new(trace.samples),
        })
    }

    pub fn replay_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(LatencyModel::replay(load_trace(path)?, path))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_preprocess_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidModel(format!(
                "preprocess_fraction {fraction} outside (0, 1)"
            )));
        }
        self.preprocess_fraction = fraction;
        Ok(self)
    }

    pub fn kind(&self) -> &LatencyKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn preprocess_fraction(&self) -> f64 {
        self.preprocess_fraction
    }

    /// Analytic mean of the total delay, when the model has one.
    pub fn mean_ms(&self) -> Option<f64> {
        match &self.kind {
            LatencyKind::Constant { total_ms } => Some(*total_ms),
            LatencyKind::ShiftedLogNormal { min_ms, mu, sigma } => {
                Some(min_ms + (mu + sigma * sigma / 2.0).exp())
            }
            LatencyKind::TraceReplay { .. } => None,
        }
    }

    /// Analytic standard deviation of the total delay, when the model has one.
    pub fn std_ms(&self) -> Option<f64> {
        match &self.kind {
            LatencyKind::Constant { .. } => Some(0.0),
            LatencyKind::ShiftedLogNormal { mu, sigma, .. } => {
                let s2 = sigma * sigma;
                Some(((s2.exp() - 1.0) * (2.0 * mu + s2).exp()).sqrt())
            }
            LatencyKind::TraceReplay { .. } => None,
        }
    }

    /// Draw number `draw_index`. Trace replay ignores the seed and the
    /// preprocess fraction and returns the recorded pair.
    pub fn sample(&self, draw_index: usize) -> Result<DelaySample> {
        let total = match &self.kind {
            LatencyKind::Constant { total_ms } => *total_ms,
            LatencyKind::ShiftedLogNormal { min_ms, mu, sigma } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(draw_index as u64);
                // parameters were validated at fit time
                let dist = LogNormal::new(*mu, *sigma).expect("valid log-normal parameters");
                min_ms + dist.sample(&mut rng)
            }
            LatencyKind::TraceReplay { samples, .. } => {
                return samples
                    .get(draw_index)
                    .copied()
                    .ok_or(Error::TraceExhausted {
                        index: draw_index,
                        len: samples.len(),
                    });
            }
        };
        DelaySample::new(
            quantize(self.preprocess_fraction * total),
            quantize((1.0 - self.preprocess_fraction) * total),
        )
    }

    /// The first `count` draws as a trace.
    pub fn trace(&self, count: usize) -> Result<DelayTrace> {
        (0..count)
            .map(|i| self.sample(i))
            .collect::<Result<Vec<_>>>()
            .map(DelayTrace::new)
    }
}

/// Summary of total per-job delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl DelayStats {
    /// Population statistics over the totals, summed in iteration order.
    /// An empty input yields all-zero statistics.
    pub fn from_totals(totals: impl IntoIterator<Item = f64>) -> Self {
        let totals: Vec<f64> = totals.into_iter().collect();
        if totals.is_empty() {
            return DelayStats {
                count: 0,
                mean_ms: 0.0,
                std_ms: 0.0,
                min_ms: 0.0,
                max_ms: 0.0,
            };
        }
        let n = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / n;
        let var = totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        DelayStats {
            count: totals.len(),
            mean_ms: mean,
            std_ms: var.sqrt(),
            min_ms: totals.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// A recorded delay sequence with its summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTrace {
    samples: Vec<DelaySample>,
    stats: DelayStats,
}

impl DelayTrace {
    pub fn new(samples: Vec<DelaySample>) -> Self {
        let stats = DelayStats::from_totals(samples.iter().map(DelaySample::total_ms));
        DelayTrace { samples, stats }
    }

    pub fn samples(&self) -> &[DelaySample] {
        &self.samples
    }

    pub fn stats(&self) -> &DelayStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn write_trace<W: Write>(trace: &DelayTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for s in trace.samples() {
        w.write_record([
            format!("{:.6}", s.preprocess_ms),
            format!("{:.6}", s.inference_ms),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_trace(trace: &DelayTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(trace, BufWriter::new(file))
}

pub fn read_trace<R: std::io::Read>(reader: R) -> Result<DelayTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(Error::TraceParse {
            line: 1,
            message: format!(
                "expected header `preprocess_ms,inference_ms`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::TraceParse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or_default();
            raw.parse::<f64>().map_err(|_| Error::TraceParse {
                line,
                message: format!("`{raw}` is not a number"),
            })
        };
        let (p, i) = (field(0)?, field(1)?);
        let sample = DelaySample::new(p, i).map_err(|e| Error::TraceParse {
            line,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(DelayTrace::new(samples))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<DelayTrace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_matching_is_exact_analytically() {
        for (mean, std, min) in [(63.0, 12.5, 41.7), (24.1, 3.66, 21.9), (39.3, 9.22, 22.3)] {
            let m = fit_shifted_lognormal(mean, std, min).unwrap();
            assert!((m.mean_ms().unwrap() - mean).abs() < 1e-9);
            assert!((m.std_ms().unwrap() - std).abs() < 1e-9);
        }
    }

    #[test]
    fn empirical_mean_high_environment() {
        let m = fit_shifted_lognormal(63.0, 12.5, 41.7)
            .unwrap()
            .with_seed(11);
        let t = m.trace(100_000).unwrap();
        assert!((t.stats().mean_ms - 63.0).abs() < 0.5, "{:?}", t.stats());
    }

    #[test]
    fn empirical_mean_low_environment() {
        let m = fit_shifted_lognormal(24.1, 3.66, 21.9)
            .unwrap()
            .with_seed(5);
        let t = m.trace(100_000).unwrap();
        assert!((t.stats().mean_ms - 24.1).abs() < 0.2, "{:?}", t.stats());
    }

    #[test]
    fn zero_std_is_constant() {
        let m = fit_shifted_lognormal(40.0, 0.0, 10.0).unwrap();
        for i in 0..50 {
            assert_eq!(m.sample(i).unwrap().total_ms(), 40.0);
        }
    }

    #[test]
    fn invalid_fits_rejected() {
        assert!(fit_shifted_lognormal(20.0, 3.0, 20.0).is_err());
        assert!(fit_shifted_lognormal(20.0, 3.0, 25.0).is_err());
        assert!(fit_shifted_lognormal(20.0, -1.0, 5.0).is_err());
        assert!(LatencyModel::constant(1.0)
            .unwrap()
            .with_preprocess_fraction(1.0)
            .is_err());
        assert!(LatencyModel::constant(1.0)
            .unwrap()
            .with_preprocess_fraction(0.0)
            .is_err());
    }

    #[test]
    fn constant_split() {
        let s = LatencyModel::constant(40.0).unwrap().sample(0).unwrap();
        assert_eq!((s.preprocess_ms, s.inference_ms), (10.0, 30.0));
    }

    #[test]
    fn draws_are_deterministic_per_index() {
        let m = fit_shifted_lognormal(39.3, 9.22, 22.3)
            .unwrap()
            .with_seed(3);
        let again = m.clone();
        assert_eq!(m.sample(17).unwrap(), again.sample(17).unwrap());
        assert_ne!(m.sample(17).unwrap(), m.sample(18).unwrap());
        assert_ne!(
            m.sample(17).unwrap(),
            m.clone().with_seed(4).sample(17).unwrap()
        );
    }

    #[test]
    fn lognormal_never_below_shift() {
        let m = fit_shifted_lognormal(63.1, 12.7, 41.3)
            .unwrap()
            .with_seed(99);
        for i in 0..1_000_000 {
            let total = m.sample(i).unwrap().total_ms();
            // both halves are rounded to 1e-6 ms
            assert!(
                total >= 41.3 - 2e-6 && total.is_finite(),
                "draw {i}: {total}"
            );
        }
    }

    #[test]
    fn replay_exhaustion() {
        let trace = DelayTrace::new(vec![DelaySample::new(1.0, 2.0).unwrap()]);
        let m = LatencyModel::replay(trace, "mem");
        assert_eq!(m.sample(0).unwrap().total_ms(), 3.0);
        assert!(matches!(
            m.sample(1),
            Err(Error::TraceExhausted { index: 1, len: 1 })
        ));
    }

    #[test]
    fn csv_parsing() {
        let empty = read_trace("preprocess_ms,inference_ms\n".as_bytes()).unwrap();
        assert!(empty.is_empty());
        let one =
            read_trace("preprocess_ms,inference_ms\n10.000000,30.000000\n".as_bytes()).unwrap();
        assert_eq!(one.samples(), &[DelaySample::new(10.0, 30.0).unwrap()]);
        assert_eq!(one.stats().mean_ms, 40.0);

        let err = read_trace("preprocess_ms,inference_ms\n1,2\n3,-4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TraceParse { line: 3, .. }), "{err}");
        let err = read_trace("preprocess_ms,inference_ms\n1,2\nx,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TraceParse { line: 3, .. }), "{err}");
        let err = read_trace("preprocess_ms,inference_ms\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TraceParse { line: 2, .. }), "{err}");
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
    }
}
