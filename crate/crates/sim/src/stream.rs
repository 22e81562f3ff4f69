//! Pipeline execution: the deterministic discrete-event simulator from the
//! core crate, or two real worker threads joined by a bounded FIFO.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use jscc_phy::rng::{derive_seed, seeded};
use jscc_phy::stream::{simulate_pipeline, FrameEvent, PipelineConfig, PipelineMode, PipelineReport, WorkerStates};

use crate::error::SimResult;

/// Runs the pipeline in the configured mode. In wall-clock mode `encode`
/// runs on worker 1 and `channel` and `decode` on worker 2; stage times are
/// padded with sleeps up to the sampled durations.
pub fn run_pipeline<F, S>(
    config: &PipelineConfig,
    encode: impl FnMut(usize) -> F + Send,
    channel: impl FnMut(usize, F) -> S + Send,
    decode: impl FnMut(usize, S) + Send,
    seed: u64,
) -> SimResult<PipelineReport>
where
    F: Send,
{
    match config.mode {
        PipelineMode::DiscreteEvent => Ok(simulate_pipeline(config, encode, channel, decode, seed)?),
        PipelineMode::WallClock => run_wall_clock(config, encode, channel, decode, seed),
    }
}

struct QueueState<T> {
    items: VecDeque<T>,
    closed: bool,
    occupancy: Vec<(f64, usize)>,
}

/// Bounded FIFO with blocking put and take that logs its occupancy.
struct BoundedQueue<T> {
    state: Mutex<QueueState<T>>,
    not_full: Condvar,
    not_empty: Condvar,
    capacity: usize,
    start: Instant,
}

impl<T> BoundedQueue<T> {
    fn new(capacity: usize, start: Instant) -> Self {
        BoundedQueue {
            state: Mutex::new(QueueState {
                items: VecDeque::with_capacity(capacity),
                closed: false,
                occupancy: vec![(0.0, 0)],
            }),
            not_full: Condvar::new(),
            not_empty: Condvar::new(),
            capacity,
            start,
        }
    }

    /// Returns whether the caller had to wait for room.
    fn put(&self, item: T) -> bool {
        let mut s = self.state.lock().expect("queue lock");
        let blocked = s.items.len() >= self.capacity;
        while s.items.len() >= self.capacity {
            s = self.not_full.wait(s).expect("queue lock");
        }
        s.items.push_back(item);
        let n = s.items.len();
        s.occupancy.push((self.start.elapsed().as_secs_f64(), n));
        self.not_empty.notify_one();
        blocked
    }

    /// Returns the item and whether the caller waited for it.
    fn take(&self) -> Option<(T, bool)> {
        let mut s = self.state.lock().expect("queue lock");
        let waited = s.items.is_empty();
        loop {
            if let Some(item) = s.items.pop_front() {
                let n = s.items.len();
                s.occupancy.push((self.start.elapsed().as_secs_f64(), n));
                self.not_full.notify_one();
                return Some((item, waited));
            }
            if s.closed {
                return None;
            }
            s = self.not_empty.wait(s).expect("queue lock");
        }
    }

    fn close(&self) {
        self.state.lock().expect("queue lock").closed = true;
        self.not_empty.notify_all();
    }
}

fn sleep_until(start: Instant, at: f64) {
    let target = start + Duration::from_secs_f64(at.max(0.0));
    let now = Instant::now();
    if target > now {
        thread::sleep(target - now);
    }
}

fn run_wall_clock<F: Send, S>(
    config: &PipelineConfig,
    mut encode: impl FnMut(usize) -> F + Send,
    mut channel: impl FnMut(usize, F) -> S + Send,
    mut decode: impl FnMut(usize, S) + Send,
    seed: u64,
) -> SimResult<PipelineReport> {
    config.validate()?;
    let n = config.n_frames;
    let interval = config.frame_interval();
    let start = Instant::now();
    let queue = BoundedQueue::<(usize, F)>::new(config.buffer_capacity, start);
    let now = || start.elapsed().as_secs_f64();

    let (front, back) = thread::scope(|scope| {
        let producer = scope.spawn(|| {
            let mut rng = seeded(derive_seed(seed, 0));
            let mut events = Vec::with_capacity(n);
            for i in 0..n {
                let arrival = i as f64 * interval;
                let idle = now() <= arrival;
                sleep_until(start, arrival);
                let encode_start = now();
                let duration = config.encode_time.sample(&mut rng);
                let feature = encode(i);
                sleep_until(start, encode_start + duration);
                let encode_end = now();
                let blocking = queue.put((i, feature));
                events.push(FrameEvent {
                    frame_index: i,
                    arrival_time: arrival,
                    encode_start,
                    encode_end,
                    buffered_at: now(),
                    encoder: WorkerStates {
                        idle,
                        working: true,
                        blocking,
                    },
                    ..FrameEvent::default()
                });
            }
            queue.close();
            events
        });
        let consumer = scope.spawn(|| {
            let mut rng = seeded(derive_seed(seed, 1));
            let mut events = Vec::with_capacity(n);
            while let Some(((i, feature), idle)) = queue.take() {
                let transmit_start = now();
                let duration = config.transmit_time.sample(&mut rng);
                let signal = channel(i, feature);
                sleep_until(start, transmit_start + duration);
                let transmit_end = now();
                decode(i, signal);
                events.push((i, transmit_start, transmit_end, now(), idle));
            }
            events
        });
        (
            producer.join().expect("encoder worker panicked"),
            consumer.join().expect("transmit worker panicked"),
        )
    });

    let mut frames = front;
    for (i, transmit_start, transmit_end, decode_end, idle) in back {
        let f = &mut frames[i];
        f.transmit_start = transmit_start;
        f.transmit_end = transmit_end;
        f.decode_end = decode_end;
        f.transmitter = WorkerStates {
            idle,
            working: true,
            blocking: false,
        };
    }
    let occupancy = queue.state.into_inner().expect("queue lock").occupancy;
    Ok(PipelineReport::from_frames(frames, occupancy))
}
