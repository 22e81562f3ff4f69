use jscc_phy::scheduler::{max_feature_length, retained_channels, LatencyBudget};
use jscc_phy::OfdmConfig;

use super::common::evaluation_block;
use super::{Experiment, Run};
use crate::error::SimResult;
use crate::report::{num, write_table};

/// Feature capacity `N` and retained channels `C_T` across bandwidths and
/// latency budgets.
pub fn run(run: &mut Run<'_>) -> SimResult<()> {
    let cfg = run.cfg;
    let (h, w, c) = match &cfg.features.file {
        Some(_) => {
            let b = evaluation_block(cfg, 0)?;
            (b.height(), b.width(), b.channels())
        }
        None => {
            let s = &cfg.features.synthetic;
            (s.height, s.width, s.channels)
        }
    };
    let budget_for = |ofdm: &OfdmConfig, t_max: f64| {
        if cfg.budget.include_preamble {
            LatencyBudget::for_config(ofdm, t_max)
        } else {
            LatencyBudget::new(t_max, 0.0)
        }
    };

    let mut rows = Vec::new();
    for &bw in &cfg.schedule.bandwidths_hz {
        let ofdm = OfdmConfig {
            bandwidth_hz: bw,
            ..cfg.ofdm.clone()
        };
        for &t_max in &cfg.schedule.t_max {
            let budget = budget_for(&ofdm, t_max);
            let (n, c_t) = match budget.validate() {
                Ok(()) => (
                    max_feature_length(&ofdm, &budget)?.to_string(),
                    retained_channels(&ofdm, &budget, h, w, c)?.to_string(),
                ),
                Err(_) => ("infeasible".to_owned(), "0".to_owned()),
            };
            rows.push(vec![num(bw), num(t_max), n, c_t]);
        }
    }
    let path = run.file("schedule.csv");
    write_table(&path, &run.stamp, &["bandwidth_hz", "t_max_s", "max_feature_length", "retained_channels"], rows)?;

    let budget = budget_for(&cfg.ofdm, cfg.budget.t_max);
    let mut report = run.report(Experiment::Schedule);
    report
        .scalar("max_feature_length", max_feature_length(&cfg.ofdm, &budget)? as f64, "reals")
        .scalar("retained_channels", retained_channels(&cfg.ofdm, &budget, h, w, c)? as f64, "channels")
        .scalar("t_max", cfg.budget.t_max, "s")
        .scalar("t_preamble", budget.t_preamble, "s");
    run.write_metrics(&report)
}
