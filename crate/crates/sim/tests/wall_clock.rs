use jscc_phy::stream::{summarize_report, PipelineConfig, PipelineMode, TimeModel};
use jscc_sim::stream::run_pipeline;

fn config(mode: PipelineMode) -> PipelineConfig {
    PipelineConfig {
        frame_rate: 30.0,
        buffer_capacity: 2,
        encode_time: TimeModel::fixed(0.010),
        transmit_time: TimeModel::fixed(0.015),
        n_frames: 30,
        mode,
    }
}

fn steady_mean_gap(gaps: &[f64]) -> f64 {
    let tail = &gaps[gaps.len() / 3..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[test]
fn wall_clock_matches_the_discrete_event_model() {
    let des = config(PipelineMode::DiscreteEvent);
    let wall = config(PipelineMode::WallClock);
    let simulated = run_pipeline(&des, |i| i, |_, f| f, |_, _| (), 1).unwrap();
    let mut order = Vec::new();
    let measured = run_pipeline(&wall, |i| i, |_, f| f, |i, s| order.push((i, s)), 1).unwrap();

    let (a, b) = (steady_mean_gap(&simulated.gaps), steady_mean_gap(&measured.gaps));
    let rel = (b - a).abs() / a;
    assert!(rel < 0.2, "steady mean gap: simulated {a:.4} s, measured {b:.4} s");

    assert_eq!(order, (0..30).map(|i| (i, i)).collect::<Vec<_>>());
    assert!(measured.occupancy.iter().all(|&(_, n)| n <= wall.buffer_capacity));
    let summary = summarize_report(&measured, wall.frame_interval()).unwrap();
    assert!(summary.peak_occupancy <= wall.buffer_capacity);
}

#[test]
fn a_slow_transmitter_fills_the_buffer_in_both_modes() {
    let slow = |mode| PipelineConfig {
        frame_rate: 100.0,
        transmit_time: TimeModel::fixed(0.02),
        encode_time: TimeModel::fixed(0.002),
        n_frames: 20,
        ..config(mode)
    };
    let des = run_pipeline(&slow(PipelineMode::DiscreteEvent), |_| (), |_, _| (), |_, _| (), 2).unwrap();
    let wall = run_pipeline(&slow(PipelineMode::WallClock), |_| (), |_, _| (), |_, _| (), 2).unwrap();
    for r in [&des, &wall] {
        assert_eq!(r.peak_occupancy(), 2);
        assert!(r.frames.iter().any(|f| f.encoder.blocking));
    }
    // The transmitter sets the pace.
    let (a, b) = (steady_mean_gap(&des.gaps), steady_mean_gap(&wall.gaps));
    assert!((a - 0.02).abs() < 1e-9);
    assert!((b - a).abs() / a < 0.2, "simulated {a:.4} s, measured {b:.4} s");
}
