//! Discrete-event model of a single detection pipeline and its output buffer.
//!
//! The pipeline is either busy with one job or idle. Whenever it frees up it
//! takes the newest frame that has been captured and not yet processed,
//! skipping any older ones; if there is none it waits for the next capture.
//! Each job draws a `(preprocess, inference)` delay, and the policy runs
//! after preprocessing, so the delay-adaptive policy sees the current
//! preprocessing time and the previous job's inference time.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{DelaySample, DelayStats, LatencyModel};
use crate::scheduler::{
    estimate_delay_trend, select_features, select_with_step, FeatureQueue, PolicyKind,
    DEFAULT_QUEUE_CAPACITY,
};
use crate::types::{BBox, FrameClock, TIME_EPS_MS};
use crate::worldsim::{extrapolate, observe, ObserverSpec, WorldSpec};

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// One processed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineJob {
    pub job_index: usize,
    pub input_frame_index: usize,
    pub start_ms: f64,
    pub preprocess_ms: f64,
    pub inference_ms: f64,
    pub completion_ms: f64,
    /// Look-ahead the policy forecast for; zero for `no_forecast`.
    pub target_step: usize,
    /// Frame distance between the two snapshots the forecast used.
    pub effective_gap: usize,
    /// Estimated delay the look-ahead was derived from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend_ms: Option<f64>,
    #[serde(default)]
    pub degenerate: bool,
    pub boxes: Vec<BBox>,
}

impl PipelineJob {
    pub fn total_delay_ms(&self) -> f64 {
        self.preprocess_ms + self.inference_ms
    }

    pub fn delay(&self) -> DelaySample {
        DelaySample {
            preprocess_ms: self.preprocess_ms,
            inference_ms: self.inference_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub policy: Option<PolicyKind>,
    pub fps: f64,
    /// Digest of the ground truth the run was simulated against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_digest: Option<String>,
    /// Digest of the resolved run configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    pub delay: DelayStats,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogRecord {
    Header(LogHeader),
    Job(PipelineJob),
}

/// Completed jobs of one run, in start order; the history of the output buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamLog {
    header: LogHeader,
    jobs: Vec<PipelineJob>,
}

impl StreamLog {
    /// Validates job ordering and timing and recomputes the delay summary.
    pub fn new(
        policy: Option<PolicyKind>,
        clock: &FrameClock,
        world_digest: Option<String>,
        jobs: Vec<PipelineJob>,
    ) -> Result<Self> {
        let header = LogHeader {
            schema_version: LOG_SCHEMA_VERSION,
            policy,
            fps: clock.fps(),
            world_digest,
            config_digest: None,
            delay: DelayStats::from_totals(jobs.iter().map(PipelineJob::total_delay_ms)),
        };
        validate_jobs(clock, &jobs)?;
        Ok(StreamLog { header, jobs })
    }

    pub fn with_config_digest(mut self, digest: impl Into<String>) -> Self {
        self.header.config_digest = Some(digest.into());
        self
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn jobs(&self) -> &[PipelineJob] {
        &self.jobs
    }

    pub fn clock(&self) -> FrameClock {
        FrameClock::new(self.header.fps).expect("validated fps")
    }

    pub fn delay_stats(&self) -> &DelayStats {
        &self.header.delay
    }

    /// Output buffer contents at `query_ms`: the boxes of the latest job
    /// completed at or before that instant, or nothing before the first
    /// completion.
    pub fn query_buffer(&self, query_ms: f64) -> &[BBox] {
        let done = self
            .jobs
            .partition_point(|j| j.completion_ms <= query_ms + TIME_EPS_MS);
        match done {
            0 => &[],
            n => &self.jobs[n - 1].boxes,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &LogRecord::Header(self.header.clone()))?;
        writeln!(w).map_err(|e| Error::io("<stream log>", e))?;
        for job in &self.jobs {
            serde_json::to_writer(&mut w, &LogRecord::Job(job.clone()))?;
            writeln!(w).map_err(|e| Error::io("<stream log>", e))?;
        }
        w.flush().map_err(|e| Error::io("<stream log>", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(BufWriter::new(file))
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<LogHeader> = None;
        let mut jobs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("<stream log>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(&line).map_err(|e| Error::LogParse {
                line: line_no,
                message: e.to_string(),
            })?;
            match (record, &header) {
                (LogRecord::Header(h), None) if jobs.is_empty() => {
                    if h.schema_version != LOG_SCHEMA_VERSION {
                        return Err(Error::LogParse {
                            line: line_no,
                            message: format!("unsupported schema_version {}", h.schema_version),
                        });
                    }
                    header = Some(h);
                }
                (LogRecord::Header(_), _) => {
                    return Err(Error::LogParse {
                        line: line_no,
                        message: "header must be the first and only header record".into(),
                    })
                }
                (LogRecord::Job(_), None) => {
                    return Err(Error::LogParse {
                        line: line_no,
                        message: "job record before header".into(),
                    })
                }
                (LogRecord::Job(j), Some(_)) => jobs.push(j),
            }
        }
        let header = header.ok_or(Error::LogParse {
            line: 0,
            message: "missing header record".into(),
        })?;
        let clock = FrameClock::new(header.fps)?;
        let log = StreamLog::new(header.policy, &clock, header.world_digest.clone(), jobs)?;
        if !stats_close(&log.header.delay, &header.delay) {
            return Err(Error::LogParse {
                line: 1,
                message: "header delay statistics disagree with the job records".into(),
            });
        }
        Ok(StreamLog {
            header: LogHeader {
                config_digest: header.config_digest,
                ..log.header
            },
            jobs: log.jobs,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        StreamLog::read_jsonl(BufReader::new(file))
    }
}

fn stats_close(a: &DelayStats, b: &DelayStats) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
    a.count == b.count
        && close(a.mean_ms, b.mean_ms)
        && close(a.std_ms, b.std_ms)
        && close(a.min_ms, b.min_ms)
        && close(a.max_ms, b.max_ms)
}

fn validate_jobs(clock: &FrameClock, jobs: &[PipelineJob]) -> Result<()> {
    let bad = |j: &PipelineJob, m: &str| {
        Err(Error::LogParse {
            line: j.job_index + 2,
            message: format!("job {}: {m}", j.job_index),
        })
    };
    for (i, j) in jobs.iter().enumerate() {
        DelaySample::new(j.preprocess_ms, j.inference_ms)?;
        let expected = j.start_ms + j.preprocess_ms + j.inference_ms;
        if (j.completion_ms - expected).abs() > 1e-6 {
            return bad(
                j,
                "completion_ms != start_ms + preprocess_ms + inference_ms",
            );
        }
        if j.start_ms + TIME_EPS_MS < clock.capture_time(j.input_frame_index) {
            return bad(j, "starts before its input frame is captured");
        }
        if i > 0 {
            let prev = &jobs[i - 1];
            if j.input_frame_index <= prev.input_frame_index {
                return bad(j, "input frames must strictly increase");
            }
            if j.start_ms + TIME_EPS_MS < prev.completion_ms {
                return bad(j, "overlaps the previous job");
            }
        }
    }
    Ok(())
}

/// Tunables of a simulated pipeline beyond the policy itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub queue_capacity: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

/// Runs one policy over the whole world.
pub fn simulate(
    world: &WorldSpec,
    observer: &ObserverSpec,
    latency: &LatencyModel,
    policy: PolicyKind,
    clock: &FrameClock,
) -> Result<StreamLog> {
    simulate_with(
        world,
        observer,
        latency,
        policy,
        clock,
        PipelineOptions::default(),
    )
}

pub fn simulate_with(
    world: &WorldSpec,
    observer: &ObserverSpec,
    latency: &LatencyModel,
    policy: PolicyKind,
    clock: &FrameClock,
    options: PipelineOptions,
) -> Result<StreamLog> {
    world.validate()?;
    observer.validate()?;
    if (world.fps - clock.fps()).abs() > 1e-9 {
        return Err(Error::config(
            "clock.fps",
            format!(
                "clock runs at {} fps but the world at {} fps",
                clock.fps(),
                world.fps
            ),
        ));
    }
    let duration = world.duration_frames;
    let mut queue = FeatureQueue::new(options.queue_capacity)?;
    let mut jobs = Vec::new();
    let mut free_at = 0.0_f64;
    let mut last_frame: Option<usize> = None;
    let mut last_inference: Option<f64> = None;

    loop {
        let newest = clock.newest_frame_at(free_at).map(|k| k.min(duration - 1));
        let (frame, start) = match (newest, last_frame) {
            (Some(k), None) => (k, free_at),
            (Some(k), Some(prev)) if k > prev => (k, free_at),
            _ => {
                let next = last_frame.map_or(0, |p| p + 1);
                if next >= duration {
                    break;
                }
                (next, clock.capture_time(next).max(free_at))
            }
        };
        let job_index = jobs.len();
        let delay = latency.sample(job_index)?;
        queue.push(observe(world, frame, observer)?)?;
        let trend = estimate_delay_trend(delay.preprocess_ms, last_inference)?;

        let (raw, target_step, effective_gap, degenerate) = match policy {
            PolicyKind::NoForecast => {
                let current = queue.newest().expect("just pushed");
                (current.boxes().to_vec(), 0, 0, false)
            }
            PolicyKind::FixedNextStep => {
                let sel = select_with_step(&queue, 1)?;
                (
                    extrapolate(sel.current, sel.past, 1),
                    1,
                    sel.effective_gap,
                    sel.degenerate,
                )
            }
            PolicyKind::DelayAdaptive => {
                let sel = select_features(&queue, &trend, clock)?;
                let out = extrapolate(sel.current, sel.past, sel.target_step);
                (out, sel.target_step, sel.effective_gap, sel.degenerate)
            }
        };
        let boxes = raw
            .iter()
            .filter_map(|b| b.clamped(world.image_width, world.image_height))
            .collect();

        let completion = start + delay.preprocess_ms + delay.inference_ms;
        jobs.push(PipelineJob {
            job_index,
            input_frame_index: frame,
            start_ms: start,
            preprocess_ms: delay.preprocess_ms,
            inference_ms: delay.inference_ms,
            completion_ms: completion,
            target_step,
            effective_gap,
            trend_ms: trend.trend_ms,
            degenerate,
            boxes,
        });
        last_inference = Some(delay.inference_ms);
        last_frame = Some(frame);
        free_at = completion;
    }
    StreamLog::new(Some(policy), clock, Some(world.digest()), jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::ObjectTrack;

    fn world(frames: usize) -> WorldSpec {
        WorldSpec::new(
            frames,
            vec![ObjectTrack::constant_velocity(
                0,
                0,
                [100.0, 100.0, 200.0, 200.0],
                [2.0, 1.0],
            )],
        )
        .unwrap()
    }

    fn run(delay_ms: f64, policy: PolicyKind, frames: usize) -> StreamLog {
        let clock = FrameClock::new(30.0).unwrap();
        let latency = LatencyModel::constant(delay_ms).unwrap();
        simulate(
            &world(frames),
            &ObserverSpec::oracle(),
            &latency,
            policy,
            &clock,
        )
        .unwrap()
    }

    fn processed(log: &StreamLog) -> Vec<usize> {
        log.jobs().iter().map(|j| j.input_frame_index).collect()
    }

    #[test]
    fn fast_pipeline_processes_every_frame() {
        let log = run(20.0, PolicyKind::DelayAdaptive, 30);
        assert_eq!(processed(&log), (0..30).collect::<Vec<_>>());
        let clock = log.clock();
        for j in log.jobs() {
            assert!((j.start_ms - clock.capture_time(j.input_frame_index)).abs() < 1e-9);
        }
    }

    #[test]
    fn forty_ms_pipeline_drops_every_sixth_frame() {
        // hand trace: job j starts at 40j ms and takes frame floor(1.2 j)
        // until frame 60 would be due, which the 60-frame world clips to 59
        let log = run(40.0, PolicyKind::FixedNextStep, 60);
        let mut expected: Vec<usize> = (0..50).map(|j| (12 * j) / 10).collect();
        expected.push(59);
        assert_eq!(processed(&log), expected);
        for (j, job) in log.jobs().iter().enumerate() {
            assert!((job.start_ms - 40.0 * j as f64).abs() < 1e-9);
        }
        let dropped: Vec<usize> = (0..60).filter(|f| !expected.contains(f)).collect();
        assert_eq!(dropped, vec![5, 11, 17, 23, 29, 35, 41, 47, 53]);
    }

    #[test]
    fn first_job_falls_back_then_tracks_delay() {
        let log = run(50.0, PolicyKind::DelayAdaptive, 20);
        let first = &log.jobs()[0];
        assert!(first.trend_ms.is_none() && first.degenerate);
        assert_eq!(first.target_step, 1);
        for j in &log.jobs()[1..] {
            assert_eq!(j.trend_ms, Some(50.0));
            assert_eq!(j.target_step, 2);
        }
    }

    #[test]
    fn buffer_queries() {
        let log = run(50.0, PolicyKind::NoForecast, 10);
        assert!(log.query_buffer(0.0).is_empty());
        assert!(log.query_buffer(49.9).is_empty());
        let first = log.jobs()[0].boxes.clone();
        assert_eq!(log.query_buffer(50.0), &first[..]);
        assert_eq!(log.query_buffer(99.0), &first[..]);
        assert_eq!(log.query_buffer(100.0), &log.jobs()[1].boxes[..]);
        assert_eq!(log.query_buffer(1e9), &log.jobs().last().unwrap().boxes[..]);
    }

    #[test]
    fn jsonl_round_trip() {
        let log = run(37.5, PolicyKind::DelayAdaptive, 15).with_config_digest("abc");
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        let back = StreamLog::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, log);
        let text = String::from_utf8(buf).unwrap();
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("\"schema_version\":1"));
    }

    #[test]
    fn malformed_logs_rejected() {
        let log = run(20.0, PolicyKind::NoForecast, 5);
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let no_header = lines[1..].join("\n");
        assert!(StreamLog::read_jsonl(no_header.as_bytes()).is_err());
        let swapped = [lines[0], lines[2], lines[1]].join("\n");
        assert!(StreamLog::read_jsonl(swapped.as_bytes()).is_err());
        let garbage = format!("{}\nnot json\n", lines[0]);
        assert!(matches!(
            StreamLog::read_jsonl(garbage.as_bytes()),
            Err(Error::LogParse { line: 2, .. })
        ));
    }

    #[test]
    fn fps_mismatch_rejected() {
        let clock = FrameClock::new(25.0).unwrap();
        let latency = LatencyModel::constant(10.0).unwrap();
        let err = simulate(
            &world(5),
            &ObserverSpec::oracle(),
            &latency,
            PolicyKind::NoForecast,
            &clock,
        );
        assert!(err.is_err());
    }

    #[test]
    fn exhausted_trace_is_an_error() {
        use crate::latency::DelayTrace;
        let clock = FrameClock::new(30.0).unwrap();
        let trace = DelayTrace::new(vec![DelaySample::new(5.0, 5.0).unwrap(); 3]);
        let latency = LatencyModel::replay(trace, "mem");
        let err = simulate(
            &world(10),
            &ObserverSpec::oracle(),
            &latency,
            PolicyKind::NoForecast,
            &clock,
        );
        assert!(matches!(
            err,
            Err(Error::TraceExhausted { index: 3, len: 3 })
        ));
    }
}
