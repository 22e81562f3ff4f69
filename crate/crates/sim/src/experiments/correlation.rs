use jscc_phy::feature::empirical_feature_correlation;
use jscc_phy::link::{transmit_values, LinkParams};
use jscc_phy::metrics::{cross_subcarrier_correlation, CorrelationMatrix};

use super::common::{build_precoder, evaluation_block, stream_seed, Stream};
use super::{Experiment, Run};
use crate::error::SimResult;
use crate::report::{num, write_table};

/// Feature correlation against distance, and cross-subcarrier correlation
/// of received symbols with and without precoding.
pub fn run(run: &mut Run<'_>) -> SimResult<()> {
    let cfg = run.cfg;
    let build = build_precoder(cfg)?;
    let mut report = run.report(Experiment::Correlation);

    let first = evaluation_block(cfg, 0)?;
    let feature_corr = empirical_feature_correlation(&first, cfg.correlation.max_distance)?;
    let path = run.file("feature_correlation.csv");
    write_table(
        &path,
        &run.stamp,
        &["distance", "correlation"],
        feature_corr.iter().enumerate().map(|(d, c)| [d.to_string(), num(*c)]),
    )?;
    report.vector("feature_correlation", feature_corr, "");

    let n = cfg.correlation.n_blocks;
    let mut received = [Vec::new(), Vec::new()];
    let mut index = 0u64;
    while received[0].len() < n {
        let block = evaluation_block(cfg, index)?;
        for (slot, precoder) in [None, Some(&build.matrix)].into_iter().enumerate() {
            let params = LinkParams {
                p_t: cfg.p_t,
                precoder,
                snr_db: cfg.correlation.snr_db,
                seed: stream_seed(cfg.seed, Stream::Noise, index),
                ..LinkParams::ideal(&cfg.ofdm)
            };
            // Symbols as they arrive on the subcarriers, before undoing V.
            received[slot].extend(transmit_values(block.as_slice(), &params)?.equalized);
        }
        index += 1;
    }
    let mut mats: Vec<CorrelationMatrix> = Vec::new();
    for r in &mut received {
        r.truncate(n);
        mats.push(cross_subcarrier_correlation(r)?);
    }
    for (name, m) in ["unprecoded", "precoded"].iter().zip(&mats) {
        let path = run.file(&format!("symbol_correlation_{name}.csv"));
        let k = m.matrix.nrows();
        let rows = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| [i.to_string(), j.to_string(), num(m.matrix[(i, j)])]);
        write_table(&path, &run.stamp, &["row", "col", "abs_correlation"], rows)?;
        report.scalar(&format!("{name}_mean_in_band"), m.mean_within(&build.cov_h.matrix), "");
        report.scalar(&format!("{name}_flagged"), m.flagged.len() as f64, "subcarriers");
    }
    let before = mats[0].mean_within(&build.cov_h.matrix);
    let after = mats[1].mean_within(&build.cov_h.matrix);
    report
        .scalar("in_band_ratio", if before > 0.0 { after / before } else { 0.0 }, "")
        .scalar("coherence", build.cov_h.coherence as f64, "subcarriers")
        .scalar("n_blocks", n as f64, "symbols");
    run.write_metrics(&report)
}
