use std::sync::Mutex;

use jscc_phy::feature::generate_features;
use jscc_phy::link::{transmit_values, LinkParams};
use jscc_phy::metrics::psnr_db;
use jscc_phy::precoder::PrecodingMatrix;
use jscc_phy::stream::summarize_report;

use super::common::{stream_seed, Stream};
use super::e2e::FEATURE_RANGE;
use super::{Experiment, Run};
use crate::error::{SimError, SimResult};
use crate::files::load_precoder;
use crate::report::write_pipeline_csv;
use crate::stream::run_pipeline;

/// Streams frames through the dual-worker pipeline, optionally carrying a
/// feature block per frame over an AWGN link and recording its PSNR.
pub fn run(run: &mut Run<'_>) -> SimResult<()> {
    let cfg = run.cfg;
    let sc = &cfg.stream;
    let precoder: Option<PrecodingMatrix> = cfg.precoder.matrix.as_deref().map(load_precoder).transpose()?;
    let psnr = Mutex::new(vec![f64::NAN; sc.pipeline.n_frames]);
    let failure = Mutex::new(None::<SimError>);
    let with_link = sc.with_link;

    let encode = |i: usize| {
        with_link.then(|| generate_features(&sc.frame_features, stream_seed(cfg.seed, Stream::Pipeline, i as u64)))
    };
    let channel = |i: usize, block: Option<Result<jscc_phy::feature::FeatureBlock, jscc_phy::Error>>| {
        block.map(|b| {
            let b = b?;
            let params = LinkParams {
                p_t: cfg.p_t,
                precoder: precoder.as_ref(),
                snr_db: sc.snr_db,
                seed: stream_seed(cfg.seed, Stream::Noise, i as u64),
                ..LinkParams::ideal(&cfg.ofdm)
            };
            let out = transmit_values(b.as_slice(), &params)?;
            psnr_db(&out.values, b.as_slice(), FEATURE_RANGE)
        })
    };
    let decode = |i: usize, result: Option<Result<jscc_phy::metrics::Decibels, jscc_phy::Error>>| match result {
        Some(Ok(db)) => psnr.lock().expect("psnr lock")[i] = db.value,
        Some(Err(e)) => {
            failure.lock().expect("failure lock").get_or_insert(e.into());
        }
        None => {}
    };
    let timing_seed = stream_seed(cfg.seed, Stream::Pipeline, u64::MAX);
    let report = run_pipeline(&sc.pipeline, encode, channel, decode, timing_seed)?;
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    let psnr = psnr.into_inner().expect("psnr lock");

    let path = run.file("pipeline.csv");
    write_pipeline_csv(&path, &run.stamp, &report, with_link.then_some(("psnr_db", psnr.as_slice())))?;

    let mut metrics = run.report(Experiment::Stream);
    metrics
        .scalar("frame_interval", sc.pipeline.frame_interval(), "s")
        .scalar("n_frames", report.frames.len() as f64, "frames");
    if !report.frames.is_empty() {
        let s = summarize_report(&report, sc.pipeline.frame_interval())?;
        metrics
            .scalar("max_gap", s.max_gap, "s")
            .scalar("mean_gap", s.mean_gap, "s")
            .scalar("p95_gap", s.p95_gap, "s")
            .scalar("fraction_within_interval", s.fraction_within_interval, "")
            .scalar("peak_occupancy", s.peak_occupancy as f64, "frames");
    }
    if with_link && !psnr.is_empty() {
        metrics.scalar("mean_psnr", psnr.iter().sum::<f64>() / psnr.len() as f64, "dB");
    }
    run.write_metrics(&metrics)
}
