use super::common::build_precoder;
use super::{Experiment, Run};
use crate::error::SimResult;
use crate::files::save_precoder;
use crate::report::{num, write_table};

/// Optimizes and persists `V`, reporting its objective against `V = I`.
pub fn run(run: &mut Run<'_>) -> SimResult<()> {
    let build = build_precoder(run.cfg)?;
    let path = run.file("precoder.bin");
    save_precoder(&path, &build.matrix)?;

    let rows = build
        .traces
        .iter()
        .flat_map(|t| t.objectives.iter().enumerate().map(move |(sweep, v)| [t.init.to_string(), sweep.to_string(), num(*v)]));
    let path = run.file("precoder_traces.csv");
    write_table(&path, &run.stamp, &["init", "sweep", "objective"], rows)?;

    let mut report = run.report(Experiment::Precode);
    report
        .scalar("objective", build.matrix.objective_value, "")
        .scalar("identity_objective", build.identity_objective(), "")
        .scalar("correlation_term", build.terms.correlation, "")
        .scalar("identity_correlation_term", build.identity_terms.correlation, "")
        .scalar("peak_power_term", build.terms.peak_power, "")
        .scalar("identity_peak_power_term", build.identity_terms.peak_power, "")
        .scalar("omega", build.omega, "")
        .scalar("coherence", build.cov_h.coherence as f64, "subcarriers")
        .scalar("n_inits", build.matrix.init_count as f64, "")
        .scalar("unitarity_error", build.matrix.unitarity_error(), "");
    run.write_metrics(&report)
}
