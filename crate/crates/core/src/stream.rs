//! Dual-worker streaming pipeline simulated as a discrete-event system.
//!
//! Worker 1 encodes frames arriving every `1/frame_rate` seconds and puts
//! them into a bounded FIFO, blocking while it is full. Worker 2 takes
//! features from the FIFO, transmits them and hands them to the decoder.
//! Decoding is not modeled separately: a frame is decoded when its
//! transmission ends.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

#[allow(unused_imports)] // float methods without std
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, seeded};

/// Per-frame stage duration in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum TimeModel {
    Fixed { seconds: f64 },
    Uniform { min: f64, max: f64 },
}

impl TimeModel {
    pub fn fixed(seconds: f64) -> Self {
        TimeModel::Fixed { seconds }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeModel::Fixed { seconds } => seconds.is_finite() && seconds >= 0.0,
            TimeModel::Uniform { min, max } => min.is_finite() && max.is_finite() && 0.0 <= min && min <= max,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(alloc::format!("invalid stage time model {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            TimeModel::Fixed { seconds } => seconds,
            TimeModel::Uniform { min, max } if min == max => min,
            TimeModel::Uniform { min, max } => rng.random_range(min..max),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TimeModel::Fixed { seconds } => seconds,
            TimeModel::Uniform { min, max } => 0.5 * (min + max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PipelineMode {
    #[default]
    DiscreteEvent,
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    pub frame_rate: f64,
    pub buffer_capacity: usize,
    pub encode_time: TimeModel,
    pub transmit_time: TimeModel,
    pub n_frames: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mode: PipelineMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            frame_rate: 30.0,
            buffer_capacity: 2,
            encode_time: TimeModel::fixed(0.005),
            transmit_time: TimeModel::fixed(0.005),
            n_frames: 100,
            mode: PipelineMode::DiscreteEvent,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(invalid(alloc::format!("frame rate {} must be positive", self.frame_rate)));
        }
        if self.buffer_capacity == 0 {
            return Err(invalid("buffer capacity must be at least 1"));
        }
        self.encode_time.validate()?;
        self.transmit_time.validate()
    }

    pub fn frame_interval(&self) -> f64 {
        1.0 / self.frame_rate
    }
}

/// Worker states a frame passed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorkerStates {
    /// The worker was waiting for work when this frame reached it.
    pub idle: bool,
    pub working: bool,
    /// The worker was held up handing this frame on.
    pub blocking: bool,
}

/// Timestamps (seconds from pipeline start) of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameEvent {
    pub frame_index: usize,
    pub arrival_time: f64,
    pub encode_start: f64,
    pub encode_end: f64,
    /// When the feature entered the buffer (after any blocking).
    pub buffered_at: f64,
    pub transmit_start: f64,
    pub transmit_end: f64,
    pub decode_end: f64,
    pub encoder: WorkerStates,
    pub transmitter: WorkerStates,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineReport {
    pub frames: Vec<FrameEvent>,
    /// `decode_end[i] - decode_end[i-1]`.
    pub gaps: Vec<f64>,
    /// `(time, occupancy)` after every buffer change, starting at `(0, 0)`.
    pub occupancy: Vec<(f64, usize)>,
}

impl PipelineReport {
    /// Builds gaps from the frame list.
    pub fn from_frames(frames: Vec<FrameEvent>, occupancy: Vec<(f64, usize)>) -> Self {
        let gaps = frames.windows(2).map(|w| w[1].decode_end - w[0].decode_end).collect();
        PipelineReport { frames, gaps, occupancy }
    }

    pub fn peak_occupancy(&self) -> usize {
        self.occupancy.iter().map(|&(_, n)| n).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineSummary {
    pub max_gap: f64,
    pub mean_gap: f64,
    pub p95_gap: f64,
    pub fraction_within_interval: f64,
    pub peak_occupancy: usize,
}

/// Gap statistics; `p95` is the nearest-rank 95th percentile. A single
/// frame has no gaps and reports zeros with fraction 1.
pub fn summarize_report(report: &PipelineReport, frame_interval: f64) -> Result<PipelineSummary> {
    if report.frames.is_empty() {
        return Err(Error::EmptyReport);
    }
    let peak_occupancy = report.peak_occupancy();
    if report.gaps.is_empty() {
        return Ok(PipelineSummary {
            max_gap: 0.0,
            mean_gap: 0.0,
            p95_gap: 0.0,
            fraction_within_interval: 1.0,
            peak_occupancy,
        });
    }
    let mut sorted = report.gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    // Gaps equal to the interval up to rounding count as on time.
    let slack = frame_interval * 1e-9;
    Ok(PipelineSummary {
        max_gap: sorted[n - 1],
        mean_gap: sorted.iter().sum::<f64>() / n as f64,
        p95_gap: sorted[rank - 1],
        fraction_within_interval: sorted.iter().filter(|&&g| g <= frame_interval + slack).count() as f64 / n as f64,
        peak_occupancy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival,
    EncodeDone,
    TransmitDone,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
    frame: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

struct Sim<'a, F, S, E, C, D> {
    now: f64,
    seq: u64,
    queue: BinaryHeap<Reverse<Event>>,
    cap: usize,
    pending: VecDeque<usize>,
    encoder_busy: bool,
    encoder_free_at: f64,
    blocked: Option<(usize, F)>,
    buffer: VecDeque<(usize, F)>,
    transmitter_busy: bool,
    transmitter_free_at: f64,
    in_flight: Option<S>,
    events: Vec<FrameEvent>,
    occupancy: Vec<(f64, usize)>,
    encode_rng: ChaCha8Rng,
    transmit_rng: ChaCha8Rng,
    config: &'a PipelineConfig,
    encode: E,
    channel: C,
    decode: D,
}

impl<F, S, E, C, D> Sim<'_, F, S, E, C, D>
where
    E: FnMut(usize) -> F,
    C: FnMut(usize, F) -> S,
    D: FnMut(usize, S),
{
    fn schedule(&mut self, time: f64, kind: EventKind, frame: usize) {
        self.seq += 1;
        self.queue.push(Reverse(Event { time, seq: self.seq, kind, frame }));
    }

    fn record_occupancy(&mut self) {
        self.occupancy.push((self.now, self.buffer.len()));
    }

    fn try_start_encode(&mut self) {
        if self.encoder_busy || self.blocked.is_some() {
            return;
        }
        let Some(frame) = self.pending.pop_front() else { return };
        let ev = &mut self.events[frame];
        ev.encode_start = self.now;
        ev.encoder.working = true;
        ev.encoder.idle = self.encoder_free_at < ev.arrival_time || frame == 0;
        self.encoder_busy = true;
        let dt = self.config.encode_time.sample(&mut self.encode_rng);
        self.schedule(self.now + dt, EventKind::EncodeDone, frame);
    }

    fn try_start_transmit(&mut self) {
        if self.transmitter_busy {
            return;
        }
        let Some((frame, feature)) = self.buffer.pop_front() else { return };
        self.record_occupancy();
        let ev = &mut self.events[frame];
        ev.transmit_start = self.now;
        ev.transmitter.working = true;
        ev.transmitter.idle = self.transmitter_free_at < ev.buffered_at || frame == 0;
        self.transmitter_busy = true;
        self.in_flight = Some((self.channel)(frame, feature));
        let dt = self.config.transmit_time.sample(&mut self.transmit_rng);
        self.schedule(self.now + dt, EventKind::TransmitDone, frame);
        if let Some((blocked_frame, f)) = self.blocked.take() {
            self.put(blocked_frame, f);
            self.try_start_encode();
        }
    }

    fn put(&mut self, frame: usize, feature: F) {
        self.events[frame].buffered_at = self.now;
        self.buffer.push_back((frame, feature));
        self.record_occupancy();
        self.encoder_free_at = self.now;
    }

    fn handle(&mut self, ev: Event) {
        self.now = ev.time;
        match ev.kind {
            EventKind::Arrival => {
                self.pending.push_back(ev.frame);
                self.try_start_encode();
            }
            EventKind::EncodeDone => {
                self.events[ev.frame].encode_end = self.now;
                self.encoder_busy = false;
                let feature = (self.encode)(ev.frame);
                if self.buffer.len() < self.cap {
                    self.put(ev.frame, feature);
                    self.try_start_transmit();
                    self.try_start_encode();
                } else {
                    self.events[ev.frame].encoder.blocking = true;
                    self.blocked = Some((ev.frame, feature));
                }
            }
            EventKind::TransmitDone => {
                let e = &mut self.events[ev.frame];
                e.transmit_end = self.now;
                e.decode_end = self.now;
                self.transmitter_busy = false;
                self.transmitter_free_at = self.now;
                if let Some(signal) = self.in_flight.take() {
                    (self.decode)(ev.frame, signal);
                }
                self.try_start_transmit();
            }
        }
    }
}

/// Runs the pipeline in simulated time. Stage closures are invoked in
/// event order: `encode` when encoding of a frame completes, `channel`
/// when its transmission starts and `decode` when it ends. Stage durations
/// come from the config's time models, sampled from streams derived from
/// `seed`.
pub fn simulate_pipeline<F, S>(
    config: &PipelineConfig,
    encode: impl FnMut(usize) -> F,
    channel: impl FnMut(usize, F) -> S,
    decode: impl FnMut(usize, S),
    seed: u64,
) -> Result<PipelineReport> {
    config.validate()?;
    let n = config.n_frames;
    let interval = config.frame_interval();
    let mut sim = Sim {
        now: 0.0,
        seq: 0,
        queue: BinaryHeap::with_capacity(n + 2),
        cap: config.buffer_capacity,
        pending: VecDeque::new(),
        encoder_busy: false,
        encoder_free_at: 0.0,
        blocked: None,
        buffer: VecDeque::with_capacity(config.buffer_capacity),
        transmitter_busy: false,
        transmitter_free_at: 0.0,
        in_flight: None,
        events: (0..n)
            .map(|i| FrameEvent {
                frame_index: i,
                arrival_time: i as f64 * interval,
                ..FrameEvent::default()
            })
            .collect(),
        occupancy: alloc::vec![(0.0, 0)],
        encode_rng: seeded(derive_seed(seed, 0)),
        transmit_rng: seeded(derive_seed(seed, 1)),
        config,
        encode,
        channel,
        decode,
    };
    for i in 0..n {
        sim.schedule(i as f64 * interval, EventKind::Arrival, i);
    }
    while let Some(Reverse(ev)) = sim.queue.pop() {
        sim.handle(ev);
    }
    Ok(PipelineReport::from_frames(sim.events, sim.occupancy))
}

/// [`simulate_pipeline`] with no-op stages.
pub fn simulate_timing(config: &PipelineConfig, seed: u64) -> Result<PipelineReport> {
    simulate_pipeline(config, |_| (), |_, ()| (), |_, ()| (), seed)
}
