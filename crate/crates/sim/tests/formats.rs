use std::fs;

use jscc_phy::feature::{generate_features, FeatureSpec};
use jscc_phy::link::{build_frame, LinkParams};
use jscc_phy::mapper::segments_to_values;
use jscc_phy::metrics::MetricsReport;
use jscc_phy::modem::demodulate_frame;
use jscc_phy::precoder::PrecodingMatrix;
use jscc_phy::{OfdmConfig, C64};
use jscc_sim::error::SimError;
use jscc_sim::files::{load_features, load_precoder, read_iq, save_features, save_precoder, write_iq, IqSidecar};
use jscc_sim::report::{read_metrics_json, read_table_checked, write_metrics_csv, write_metrics_json, write_table, Stamp};
use nalgebra::DMatrix;

#[test]
fn features_survive_a_file_roundtrip_at_f32_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.bin");
    let spec = FeatureSpec { height: 8, width: 8, channels: 4, rho: 0.9, sigma: 0.5 };
    let block = generate_features(&spec, 5).unwrap();
    save_features(&path, &block).unwrap();
    let back = load_features(&path).unwrap();
    assert_eq!(back.as_slice().len(), block.as_slice().len());
    for (a, b) in back.as_slice().iter().zip(block.as_slice()) {
        assert!((a - b).abs() <= b.abs() * f32::EPSILON as f64);
    }

    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&path, bytes).unwrap();
    assert!(load_features(&path).is_err());
}

#[test]
fn precoder_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.bin");
    // The unitary 4-point DFT matrix.
    let n = 4;
    let v = DMatrix::from_fn(n, n, |r, c| C64::from_polar(0.5, -2.0 * std::f64::consts::PI * (r * c) as f64 / n as f64));
    let pm = PrecodingMatrix::new(v, 1.25, 0.5, 3).unwrap();
    save_precoder(&path, &pm).unwrap();
    assert_eq!(load_precoder(&path).unwrap(), pm);

    fs::write(&path, b"JPRC").unwrap();
    assert!(load_precoder(&path).is_err());
}

#[test]
fn iq_file_decodes_with_its_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frame.iq");
    let cfg = OfdmConfig::wlan_20();
    let values: Vec<f64> = (0..301).map(|i| (i as f64 * 0.61).cos() * 2.0).collect();
    let (frame, _) = build_frame(&values, &LinkParams::ideal(&cfg)).unwrap();
    write_iq(&path, &frame.time_samples, &IqSidecar::new(&frame, &cfg, "feed")).unwrap();

    let (samples, side) = read_iq(&path).unwrap();
    let demod = demodulate_frame(&samples, &cfg).unwrap();
    let decoded = segments_to_values(&demod.data, &side.scales, side.pad_count).unwrap();
    assert_eq!(decoded.len(), values.len());
    let worst = decoded.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-5, "worst error {worst}");

    // Dropping one OFDM symbol breaks the declared structure.
    let short = &samples[..samples.len() - cfg.symbol_len()];
    fs::write(&path, jscc_sim::files::iq_to_bytes(short)).unwrap();
    assert!(matches!(read_iq(&path), Err(SimError::Artifact { .. })));
}

#[test]
fn metrics_roundtrip_through_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = MetricsReport::new("formats", "0123abcd", 9);
    r.scalar("papr_p99", 8.4375, "dB").vector("gaps", vec![0.1, 0.2, 0.30000000000000004], "s");
    let json = dir.path().join("m.json");
    let csv = dir.path().join("m.csv");
    write_metrics_json(&json, &r).unwrap();
    write_metrics_csv(&csv, &r).unwrap();
    assert_eq!(read_metrics_json(&json).unwrap(), r);

    let (headers, rows) = read_table_checked(&csv, "0123abcd").unwrap();
    assert!(!headers.is_empty());
    assert!(rows.iter().any(|row| row.iter().any(|c| c == "papr_p99")));
}

#[test]
fn tables_with_a_foreign_hash_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let stamp = Stamp { config_hash: "aaaa".into(), seed: 1 };
    write_table(&path, &stamp, &["x", "y"], [["1", "2"], ["3", "4"]]).unwrap();

    let (headers, rows) = read_table_checked(&path, "aaaa").unwrap();
    assert_eq!(headers, ["x", "y"]);
    assert_eq!(rows, [["1", "2"], ["3", "4"]]);
    match read_table_checked(&path, "bbbb") {
        Err(SimError::HashMismatch { expected, found, .. }) => {
            assert_eq!(expected, "bbbb");
            assert_eq!(found, "aaaa");
        }
        other => panic!("expected a hash mismatch, got {other:?}"),
    }
}
