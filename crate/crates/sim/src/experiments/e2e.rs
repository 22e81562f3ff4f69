use jscc_phy::channel::{deep_fade_channel, sample_taps, ChannelRealization};
use jscc_phy::link::{transmit_values, LinkChannel, LinkParams};
use jscc_phy::metrics::{mse, per_subcarrier_mse, psnr_db};
use jscc_phy::scheduler::{drop_channels, retained_channels, LatencyBudget};

use super::common::{build_precoder, evaluation_block, stream_seed, Stream};
use super::{Experiment, Run};
use crate::error::SimResult;
use crate::files::{write_iq, IqSidecar};
use crate::report::{num, write_table};

/// Peak-to-peak range of clipped features, used as the PSNR peak.
pub const FEATURE_RANGE: f64 = 2.0;

struct Accum {
    feature_mse: f64,
    symbol_mse: f64,
    per_subcarrier: Vec<f64>,
    floored: usize,
    count: usize,
}

/// SNR sweep of the full chain with and without precoding.
pub fn run(run: &mut Run<'_>) -> SimResult<()> {
    let cfg = run.cfg;
    let ofdm = &cfg.ofdm;
    let precoder = if cfg.precoder.enabled || cfg.precoder.matrix.is_some() {
        Some(build_precoder(cfg)?.matrix)
    } else {
        None
    };
    let mut variants = vec![("unprecoded", None)];
    if let Some(v) = &precoder {
        variants.push(("precoded", Some(v)));
    }

    let budget = if cfg.budget.include_preamble {
        LatencyBudget::for_config(ofdm, cfg.budget.t_max)
    } else {
        LatencyBudget::new(cfg.budget.t_max, 0.0)
    };
    let realizations = cfg.e2e.realizations.max(1);
    let blocks = (0..realizations as u64).map(|r| evaluation_block(cfg, r)).collect::<SimResult<Vec<_>>>()?;
    let c_total = blocks[0].channels();
    let c_sent = if cfg.e2e.apply_budget {
        retained_channels(ofdm, &budget, blocks[0].height(), blocks[0].width(), c_total)?
    } else {
        c_total
    };
    let channels: Vec<ChannelRealization> = (0..realizations as u64)
        .map(|r| match cfg.channel.deep_fade {
            Some(f) => deep_fade_channel(ofdm, f.center, f.width, f.depth_db),
            None => sample_taps(&cfg.channel.profile, ofdm, stream_seed(cfg.seed, Stream::Channel, r)),
        })
        .collect::<Result<_, _>>()?;

    let mut sweep_rows = Vec::new();
    let mut subcarrier_rows = Vec::new();
    let mut report = run.report(Experiment::E2e);
    let mut iq_written = !cfg.e2e.write_iq;
    for (si, &snr_db) in cfg.e2e.snr_db.iter().enumerate() {
        for (name, v) in &variants {
            let mut acc = Accum {
                feature_mse: 0.0,
                symbol_mse: 0.0,
                per_subcarrier: vec![0.0; ofdm.n_data()],
                floored: 0,
                count: 0,
            };
            for (r, (block, channel)) in blocks.iter().zip(&channels).enumerate() {
                let sent = drop_channels(block, c_sent)?;
                let link_channel = if channel.taps.len() <= ofdm.cp_len {
                    LinkChannel::Taps(channel)
                } else {
                    LinkChannel::Response(channel)
                };
                let params = LinkParams {
                    config: ofdm,
                    precoder: *v,
                    p_t: cfg.p_t,
                    pa_backoff: cfg.pa.enabled.then_some(cfg.pa.backoff),
                    channel: link_channel,
                    snr_db,
                    csi: cfg.channel.csi,
                    phase_tracking: cfg.channel.phase_tracking,
                    seed: stream_seed(cfg.seed, Stream::Noise, (si * realizations + r) as u64),
                };
                let out = transmit_values(sent.as_slice(), &params)?;
                let mut recovered = out.values.clone();
                recovered.resize(block.len(), 0.0);
                acc.feature_mse += mse(&recovered, block.as_slice())?;
                let ps = per_subcarrier_mse(&out.sent, &out.received)?;
                acc.symbol_mse += ps.iter().sum::<f64>() / ps.len() as f64;
                for (a, p) in acc.per_subcarrier.iter_mut().zip(&ps) {
                    *a += p;
                }
                acc.floored += out.floored.len();
                acc.count += 1;
                if !iq_written && (v.is_some() || precoder.is_none()) {
                    let frame = out.frame.clone().with_retained_channels(c_sent);
                    let sidecar = IqSidecar::new(&frame, ofdm, &run.stamp.config_hash);
                    let path = run.file("frame.iq");
                    write_iq(&path, &frame.time_samples, &sidecar)?;
                    run.file("frame.iq.json");
                    iq_written = true;
                }
            }
            let k = acc.count as f64;
            let feature_mse = acc.feature_mse / k;
            let per_subcarrier: Vec<f64> = acc.per_subcarrier.iter().map(|v| v / k).collect();
            let psnr = if feature_mse > 0.0 {
                psnr_db(&[0.0], &[feature_mse.sqrt()], FEATURE_RANGE)?
            } else {
                psnr_db(&[0.0], &[0.0], FEATURE_RANGE)?
            };
            sweep_rows.push(vec![
                num(snr_db),
                name.to_string(),
                num(feature_mse),
                num(acc.symbol_mse / k),
                num(psnr.value),
                psnr.saturated.to_string(),
                acc.floored.to_string(),
            ]);
            for (pos, (&bin, m)) in ofdm.data_indices.iter().zip(&per_subcarrier).enumerate() {
                subcarrier_rows.push(vec![num(snr_db), name.to_string(), pos.to_string(), bin.to_string(), num(*m)]);
            }
            let tag = format!("{name}_snr{snr_db}");
            report
                .scalar(&format!("{tag}_feature_mse"), feature_mse, "")
                .decibels(&format!("{tag}_psnr"), psnr)
                .vector(&format!("{tag}_per_subcarrier_mse"), per_subcarrier, "");
        }
    }
    report
        .scalar("retained_channels", c_sent as f64, "channels")
        .scalar("realizations", realizations as f64, "");

    let path = run.file("e2e_sweep.csv");
    write_table(
        &path,
        &run.stamp,
        &["snr_db", "variant", "feature_mse", "symbol_mse", "psnr_db", "psnr_saturated", "floored_subcarriers"],
        sweep_rows,
    )?;
    let path = run.file("per_subcarrier_mse.csv");
    write_table(&path, &run.stamp, &["snr_db", "variant", "position", "bin", "mse"], subcarrier_rows)?;
    run.write_metrics(&report)
}
