use jscc_phy::metrics::{empirical_cdf, quantile};

use super::common::{build_precoder, evaluation_block, papr_per_symbol, raw_and_clipped};
use super::{Experiment, Run};
use crate::error::SimResult;
use crate::report::{num, write_table};

/// PAPR distributions with and without precoding, for clipped features
/// and (synthetic source only) their unclipped Gaussian originals.
pub fn run(run: &mut Run<'_>) -> SimResult<()> {
    let cfg = run.cfg;
    let build = build_precoder(cfg)?;
    let v = Some(&build.matrix);
    let n = cfg.papr.n_symbols;
    let (ofdm, p_t) = (&cfg.ofdm, cfg.p_t);

    let mut variants: Vec<(&str, Vec<f64>)> = vec![("clipped", Vec::new()), ("clipped_precoded", Vec::new())];
    let synthetic = cfg.features.file.is_none();
    if synthetic {
        variants.push(("unclipped", Vec::new()));
        variants.push(("unclipped_precoded", Vec::new()));
    }
    let mut index = 0u64;
    while variants[0].1.len() < n {
        if synthetic {
            let (raw, clipped) = raw_and_clipped(cfg, index)?;
            variants[0].1.extend(papr_per_symbol(&clipped, ofdm, None, p_t)?);
            variants[1].1.extend(papr_per_symbol(&clipped, ofdm, v, p_t)?);
            variants[2].1.extend(papr_per_symbol(&raw, ofdm, None, p_t)?);
            variants[3].1.extend(papr_per_symbol(&raw, ofdm, v, p_t)?);
        } else {
            let block = evaluation_block(cfg, index)?;
            variants[0].1.extend(papr_per_symbol(block.as_slice(), ofdm, None, p_t)?);
            variants[1].1.extend(papr_per_symbol(block.as_slice(), ofdm, v, p_t)?);
        }
        index += 1;
    }
    for (_, values) in &mut variants {
        values.truncate(n);
    }

    let mut report = run.report(Experiment::Papr);
    report.scalar("n_symbols", n as f64, "symbols").scalar("omega", build.omega, "");
    let mut rows = Vec::new();
    for (name, values) in &variants {
        for q in [0.5, 0.9, 0.99] {
            report.scalar(&format!("{name}_p{}", (q * 100.0) as u32), quantile(values, q)?, "dB");
        }
        for (value, prob) in empirical_cdf(values) {
            rows.push(vec![name.to_string(), num(value), num(prob)]);
        }
    }
    let p99 = |i: usize| quantile(&variants[i].1, 0.99);
    report.scalar("precoding_p99_reduction", p99(0)? - p99(1)?, "dB");
    if synthetic {
        report.scalar("clipping_p99_reduction", p99(2)? - p99(0)?, "dB");
    }
    let path = run.file("papr_cdf.csv");
    write_table(&path, &run.stamp, &["variant", "papr_db", "probability"], rows)?;
    run.write_metrics(&report)
}
