//! Whole-run operations shared by the command line tool and the examples:
//! simulate and score policies, write their artifacts, compare them, and
//! summarize delay logs.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ResolvedRun, RunConfig};
use crate::error::{Error, Result};
use crate::latency::{fit_shifted_lognormal, save_trace, DelayStats, DelayTrace, LatencyKind};
use crate::pipeline::{simulate_with, StreamLog};
use crate::scheduler::PolicyKind;
use crate::streameval::{streaming_ap_window, EvalReport};

pub const STREAM_LOG_FILE: &str = "stream_log.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const DELAYS_FILE: &str = "delays.csv";
pub const COMPARE_FILE: &str = "compare.csv";

/// One simulated and scored policy.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: PolicyKind,
    pub log: StreamLog,
    pub report: EvalReport,
}

impl PolicyRun {
    /// Delays the run actually drew, replayable as a latency trace.
    pub fn delay_trace(&self) -> DelayTrace {
        DelayTrace::new(self.log.jobs().iter().map(|j| j.delay()).collect())
    }

    pub fn summary_line(&self) -> String {
        let d = &self.report.delay;
        format!(
            "{:<16} sAP {}  sAP50 {}  sAP75 {}  jobs {:>5}  delay {:.2} ± {:.2} ms",
            self.policy.name(),
            fmt_metric(self.report.sap),
            fmt_metric(self.report.sap_50),
            fmt_metric(self.report.sap_75),
            d.count,
            d.mean_ms,
            d.std_ms,
        )
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "   n/a".into(), |x| format!("{:.4}", x))
}

/// What `report.json` holds. `config` is the resolved configuration, so a
/// run can be repeated from the report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: PolicyKind,
    pub config_digest: String,
    pub config: RunConfig,
    pub metrics: EvalReport,
}

pub fn run_policy(run: &ResolvedRun, policy: PolicyKind) -> Result<PolicyRun> {
    let log = simulate_with(
        &run.world,
        &run.observer,
        &run.latency,
        policy,
        &run.clock,
        run.options,
    )?
    .with_config_digest(run.config_digest());
    let report = streaming_ap_window(&run.world, &log, run.window)?;
    Ok(PolicyRun {
        policy,
        log,
        report,
    })
}

/// Runs every policy against the same world, observer and delay draws.
pub fn run_policies(run: &ResolvedRun, policies: &[PolicyKind]) -> Result<Vec<PolicyRun>> {
    policies.iter().map(|&p| run_policy(run, p)).collect()
}

/// Writes the log, report and drawn delays of one policy into `dir`.
pub fn write_policy_run(dir: &Path, run: &ResolvedRun, result: &PolicyRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    result.log.save(dir.join(STREAM_LOG_FILE))?;
    let report = RunReport {
        policy: result.policy,
        config_digest: run.config_digest(),
        config: run.config.clone(),
        metrics: result.report.clone(),
    };
    let path = dir.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    save_trace(&result.delay_trace(), dir.join(DELAYS_FILE))
}

/// Simulates each policy and writes its artifacts to `out/<policy>/`.
pub fn simulate_to_dir(
    run: &ResolvedRun,
    policies: &[PolicyKind],
    out: &Path,
) -> Result<Vec<PolicyRun>> {
    let results = run_policies(run, policies)?;
    for r in &results {
        write_policy_run(&out.join(r.policy.name()), run, r)?;
    }
    Ok(results)
}

pub const COMPARE_HEADER: [&str; 13] = [
    "policy",
    "sap",
    "sap_l",
    "sap_m",
    "sap_s",
    "sap_50",
    "sap_75",
    "sap_50_75",
    "delay_mean_ms",
    "delay_std_ms",
    "delay_min_ms",
    "delay_max_ms",
    "jobs",
];

/// Paired comparison: every policy sees identical delay draws. At least two
/// policies are required; repeats are allowed.
pub fn compare(run: &ResolvedRun, policies: &[PolicyKind]) -> Result<Vec<PolicyRun>> {
    if policies.len() < 2 {
        return Err(Error::config(
            "policies",
            "compare needs at least two policies",
        ));
    }
    run_policies(run, policies)
}

/// One row per policy; AP as fractions with six decimals, empty when undefined.
pub fn write_compare_csv<W: Write>(results: &[PolicyRun], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COMPARE_HEADER)?;
    let ap = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for r in results {
        let m = &r.report;
        let d = &m.delay;
        w.write_record([
            r.policy.name().to_string(),
            ap(m.sap),
            ap(m.sap_large),
            ap(m.sap_medium),
            ap(m.sap_small),
            ap(m.sap_50),
            ap(m.sap_75),
            ap(m.sap_50_75),
            format!("{:.6}", d.mean_ms),
            format!("{:.6}", d.std_ms),
            format!("{:.6}", d.min_ms),
            format!("{:.6}", d.max_ms),
            d.count.to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(PathBuf::from("<compare csv>"), e))
}

pub fn compare_table(results: &[PolicyRun]) -> String {
    let mut s = format!(
        "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>10}\n",
        "policy", "sAP", "sAP_L", "sAP_M", "sAP_S", "sAP50", "sAP75", "delay ms"
    );
    for r in results {
        let m = &r.report;
        let cell =
            |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.2}", 100.0 * x));
        s.push_str(&format!(
            "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>10.2}\n",
            r.policy.name(),
            cell(m.sap),
            cell(m.sap_large),
            cell(m.sap_medium),
            cell(m.sap_small),
            cell(m.sap_50),
            cell(m.sap_75),
            m.delay.mean_ms,
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub start_ms: f64,
    pub end_ms: f64,
    pub count: usize,
}

/// Total-delay histogram of a log, with the frame interval marked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayHistogram {
    pub bin_width_ms: f64,
    pub frame_interval_ms: f64,
    pub bins: Vec<HistogramBin>,
    /// Multiples of the frame interval inside the binned range.
    pub frame_markers_ms: Vec<f64>,
    pub stats: DelayStats,
}

/// Bins are aligned to multiples of `bin_width_ms` and cover `[min, max]`;
/// each bin is half-open except that the top value lands in the last bin.
/// An empty log gives no bins.
pub fn delay_histogram(log: &StreamLog, bin_width_ms: f64) -> Result<DelayHistogram> {
    if !(bin_width_ms.is_finite() && bin_width_ms > 0.0) {
        return Err(Error::config(
            "bin_width_ms",
            format!("must be positive, got {bin_width_ms}"),
        ));
    }
    let totals: Vec<f64> = log.jobs().iter().map(|j| j.total_delay_ms()).collect();
    let stats = *log.delay_stats();
    let frame_interval_ms = log.clock().frame_interval();
    if totals.is_empty() {
        return Ok(DelayHistogram {
            bin_width_ms,
            frame_interval_ms,
            bins: Vec::new(),
            frame_markers_ms: Vec::new(),
            stats,
        });
    }
    let first = (stats.min_ms / bin_width_ms).floor() as i64;
    let last = ((stats.max_ms / bin_width_ms).floor() as i64).max(first);
    let mut bins: Vec<HistogramBin> = (first..=last)
        .map(|i| HistogramBin {
            start_ms: i as f64 * bin_width_ms,
            end_ms: (i + 1) as f64 * bin_width_ms,
            count: 0,
        })
        .collect();
    for t in &totals {
        let i = ((t / bin_width_ms).floor() as i64).clamp(first, last);
        bins[(i - first) as usize].count += 1;
    }
    let lo = bins[0].start_ms;
    let hi = bins[bins.len() - 1].end_ms;
    let frame_markers_ms = (1..)
        .map(|k| k as f64 * frame_interval_ms)
        .skip_while(|&m| m < lo)
        .take_while(|&m| m <= hi)
        .collect();
    Ok(DelayHistogram {
        bin_width_ms,
        frame_interval_ms,
        bins,
        frame_markers_ms,
        stats,
    })
}

impl DelayHistogram {
    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Columns `kind,start_ms,end_ms,count`; marker rows have kind
    /// `frame_marker`, equal start and end, and no count.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "start_ms", "end_ms", "count"])?;
        for b in &self.bins {
            w.write_record([
                "bin".to_string(),
                format!("{:.6}", b.start_ms),
                format!("{:.6}", b.end_ms),
                b.count.to_string(),
            ])?;
        }
        for m in &self.frame_markers_ms {
            let at = format!("{m:.6}");
            w.write_record(["frame_marker", &at, &at, ""])?;
        }
        w.flush()
            .map_err(|e| Error::io(PathBuf::from("<histogram csv>"), e))
    }
}

impl fmt::Display for DelayHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let peak = self.bins.iter().map(|b| b.count).max().unwrap_or(0).max(1);
        let mut markers = self.frame_markers_ms.iter().peekable();
        for b in &self.bins {
            while let Some(&&m) = markers.peek() {
                if m >= b.start_ms {
                    break;
                }
                write_marker(f, m, self.frame_interval_ms)?;
                markers.next();
            }
            let bar = "#".repeat((b.count * 50).div_ceil(peak));
            writeln!(f, "{:>9.2} {:>6} {}", b.start_ms, b.count, bar)?;
        }
        for &m in markers {
            write_marker(f, m, self.frame_interval_ms)?;
        }
        Ok(())
    }
}

fn write_marker(f: &mut fmt::Formatter<'_>, at_ms: f64, interval_ms: f64) -> fmt::Result {
    writeln!(
        f,
        "{:>9.2} ---- frame interval x{:.0}",
        at_ms,
        at_ms / interval_ms
    )
}

/// Shifted log-normal fitted from summary statistics, plus a sampled check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyFit {
    pub target_mean_ms: f64,
    pub target_std_ms: f64,
    pub min_ms: f64,
    /// `None` for a zero-spread (constant) fit.
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub sampled: DelayStats,
}

pub fn fit_latency(
    mean_ms: f64,
    std_ms: f64,
    min_ms: f64,
    samples: usize,
    seed: u64,
) -> Result<LatencyFit> {
    let model = fit_shifted_lognormal(mean_ms, std_ms, min_ms)?.with_seed(seed);
    let (mu, sigma) = match model.kind() {
        LatencyKind::ShiftedLogNormal { mu, sigma, .. } => (Some(*mu), Some(*sigma)),
        _ => (None, None),
    };
    let sampled = *model.trace(samples)?.stats();
    Ok(LatencyFit {
        target_mean_ms: mean_ms,
        target_std_ms: std_ms,
        min_ms,
        mu,
        sigma,
        sampled,
    })
}

impl fmt::Display for LatencyFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.mu, self.sigma) {
            (Some(mu), Some(sigma)) => writeln!(
                f,
                "delay = {:.3} + LogNormal(mu = {:.6}, sigma = {:.6}) ms",
                self.min_ms, mu, sigma
            )?,
            _ => writeln!(f, "delay = {:.3} ms (constant)", self.target_mean_ms)?,
        }
        let s = &self.sampled;
        writeln!(
            f,
            "target   mean {:>9.3}  std {:>8.3}  min {:>8.3}",
            self.target_mean_ms, self.target_std_ms, self.min_ms
        )?;
        write!(
            f,
            "sampled  mean {:>9.3}  std {:>8.3}  min {:>8.3}  max {:>8.3}  (n = {})",
            s.mean_ms, s.std_ms, s.min_ms, s.max_ms, s.count
        )
    }
}
