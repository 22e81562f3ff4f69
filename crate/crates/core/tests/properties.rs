use jscc_phy::channel::{apply_channel, apply_frequency_response, ChannelProfile, ChannelRealization};
use jscc_phy::feature::{generate_features, lagged_correlation, quantize_half, FeatureBlock, FeatureSpec};
use jscc_phy::mapper::{inverse_map, map_to_symbols, SymbolSegment};
use jscc_phy::metrics::{cross_subcarrier_correlation, empirical_cdf, papr_db, per_subcarrier_mse, psnr_db};
use jscc_phy::modem::{demodulate_frame, modulate_frame, pa_soft_clip};
use jscc_phy::precoder::{apply_precoding, expected_ofdm_power, invert_precoding, PrecodingMatrix, SymbolCovariance};
use jscc_phy::scheduler::{drop_channels, max_feature_length, retained_channels, zero_fill, LatencyBudget};
use jscc_phy::signal::{energy, unitary_dft, unitary_idft};
use jscc_phy::stream::{simulate_timing, PipelineConfig, TimeModel};
use jscc_phy::{OfdmConfig, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-4.0..4.0f64, -4.0..4.0f64), len).prop_map(|v| v.into_iter().map(|(r, i)| C64::new(r, i)).collect())
}

fn symbols48() -> impl Strategy<Value = Vec<C64>> {
    complex_vec(48)
}

/// Unitary matrix from the QR factorization of a random complex matrix.
fn unitary(n: usize) -> impl Strategy<Value = PrecodingMatrix> {
    complex_vec(n * n).prop_map(move |entries| {
        let q = DMatrix::from_vec(n, n, entries).qr().q();
        PrecodingMatrix::new(q, 0.0, 0.0, 1).unwrap()
    })
}

fn pipeline(enc: (f64, f64), tx: (f64, f64), cap: usize, fps: f64) -> PipelineConfig {
    PipelineConfig {
        frame_rate: fps,
        buffer_capacity: cap,
        encode_time: TimeModel::Uniform { min: enc.0, max: enc.0 + enc.1 },
        transmit_time: TimeModel::Uniform { min: tx.0, max: tx.0 + tx.1 },
        n_frames: 60,
        ..PipelineConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_pair_is_unitary(x in prop::sample::select(vec![4usize, 16, 64]).prop_flat_map(complex_vec)) {
        let y = unitary_idft(&x);
        prop_assert!((energy(&y) - energy(&x)).abs() <= 1e-10 * energy(&x).max(1.0));
        let back = unitary_dft(&y);
        prop_assert!(back.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn generated_features_stay_in_range(seed in any::<u64>(), rho in 0.0..0.99f64, sigma in 0.1..3.0f64) {
        let spec = FeatureSpec { height: 8, width: 8, channels: 3, rho, sigma };
        let block = generate_features(&spec, seed).unwrap();
        prop_assert!(block.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn half_quantization_error_is_bounded(values in prop::collection::vec(-1.0..=1.0f64, 1..64)) {
        let n = values.len();
        let block = FeatureBlock::from_channel_major(1, n, 1, values.clone()).unwrap();
        let q = quantize_half(&block);
        prop_assert!(q.as_slice().iter().zip(&values).all(|(a, b)| (a - b).abs() <= 2f64.powi(-11)));
    }

    #[test]
    fn lagged_correlation_is_shift_symmetric(x in prop::collection::vec(-1.0..1.0f64, 20..80), d in 0usize..10) {
        let reversed: Vec<f64> = x.iter().rev().copied().collect();
        if let (Ok(a), Ok(b)) = (lagged_correlation(&x, d), lagged_correlation(&reversed, d)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        if let Ok(c) = lagged_correlation(&x, 0) {
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drop_then_fill_keeps_leading_channels(seed in any::<u64>(), keep in 0usize..=6) {
        let block = generate_features(&FeatureSpec { height: 4, width: 5, channels: 6, ..FeatureSpec::default() }, seed).unwrap();
        let filled = zero_fill(&drop_channels(&block, keep).unwrap(), 6).unwrap();
        for c in 0..6 {
            if c < keep {
                prop_assert_eq!(filled.channel(c), block.channel(c));
            } else {
                prop_assert!(filled.channel(c).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn retained_channels_fit_and_are_monotone(
        mhz in 1.0..40.0f64,
        t_ms in 0.5..20.0f64,
        h in 1usize..100,
        w in 1usize..100,
        c in 1usize..64,
    ) {
        let mut config = OfdmConfig::wlan_20();
        config.bandwidth_hz = mhz * 1e6;
        let budget = LatencyBudget::new(t_ms * 1e-3, 0.0);
        let n = max_feature_length(&config, &budget).unwrap();
        let ct = retained_channels(&config, &budget, h, w, c).unwrap();
        prop_assert!(ct <= c && ct * h * w <= n);

        let longer = LatencyBudget::new(t_ms * 1.5e-3, 0.0);
        prop_assert!(retained_channels(&config, &longer, h, w, c).unwrap() >= ct);
        let mut wider = config.clone();
        wider.bandwidth_hz *= 1.5;
        prop_assert!(retained_channels(&wider, &budget, h, w, c).unwrap() >= ct);
        prop_assert!(retained_channels(&config, &budget, h + 1, w, c).unwrap() <= ct);
    }

    #[test]
    fn symbol_mapping_roundtrip_and_energy(s in prop::collection::vec(-1.0..1.0f64, 96)) {
        let x = map_to_symbols(&s).unwrap();
        prop_assert_eq!(inverse_map(&x).unwrap(), s.clone());
        let reals: f64 = s.iter().map(|v| v * v).sum();
        prop_assert!((energy(&x) - reals).abs() < 1e-12);
    }

    #[test]
    fn precoding_is_invertible_and_norm_preserving(v in unitary(8), x in complex_vec(8)) {
        prop_assert!(v.unitarity_error() < 1e-8);
        let t = apply_precoding(&v, &x).unwrap();
        prop_assert!((energy(&t) - energy(&x)).abs() < 1e-10 * energy(&x).max(1.0));
        let back = invert_precoding(&v, &t).unwrap();
        prop_assert!(back.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn expected_power_total_is_precoder_invariant(v in unitary(48), scale in 0.1..3.0f64) {
        let config = OfdmConfig::wlan_20();
        let cov = SymbolCovariance::identity(48);
        let pilots = config.pilot_time_power();
        let total = |m: &PrecodingMatrix| expected_ofdm_power(m, &cov, &config, scale, &pilots).unwrap().iter().sum::<f64>();
        let expected = scale * 48.0 + pilots.iter().sum::<f64>();
        prop_assert!((total(&v) - expected).abs() < 1e-8 * expected);
        prop_assert!((total(&PrecodingMatrix::identity(48)) - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn modem_loopback_and_cp_energy(segments in prop::collection::vec(symbols48(), 1..4)) {
        let config = OfdmConfig::wlan_20();
        let segs: Vec<SymbolSegment> = segments.iter().map(|s| SymbolSegment { symbols: s.clone(), scale: 1.0, pad_count: 0 }).collect();
        let frame = modulate_frame(&segs, &config).unwrap();
        prop_assert_eq!(frame.time_samples.len(), (config.preamble_repeats + segs.len()) * config.symbol_len());
        let demod = demodulate_frame(&frame.time_samples, &config).unwrap();
        for (d, s) in demod.data.iter().zip(&segments) {
            prop_assert!(d.iter().zip(s).all(|(a, b)| (a - b).norm() < 1e-10));
        }
        for sym in frame.payload(&config).chunks_exact(config.symbol_len()) {
            let body = &sym[config.cp_len..];
            let tail = &body[body.len() - config.cp_len..];
            prop_assert!((energy(sym) - energy(body) - energy(tail)).abs() < 1e-9);
        }
    }

    #[test]
    fn soft_clip_never_amplifies(x in complex_vec(64), a in 0.1..5.0f64) {
        let y = pa_soft_clip(&x, a).unwrap();
        prop_assert!(y.iter().zip(&x).all(|(o, i)| o.norm() <= i.norm() + 1e-15 && o.norm() <= a + 1e-12));
    }

    #[test]
    fn convolution_matches_per_subcarrier_gain(taps in complex_vec(5), segments in prop::collection::vec(symbols48(), 1..3)) {
        let config = OfdmConfig::wlan_20();
        let realization = ChannelRealization::from_taps(taps, &config).unwrap();
        let profile = ChannelProfile { n_taps: 5, decay: 0.0, snr_db: f64::INFINITY };
        let segs: Vec<SymbolSegment> = segments.into_iter().map(|s| SymbolSegment { symbols: s, scale: 1.0, pad_count: 0 }).collect();
        let frame = modulate_frame(&segs, &config).unwrap();
        let conv = apply_channel(&frame.time_samples, &realization, &profile, &config, 0).unwrap();
        let mult = apply_frequency_response(&frame.time_samples, &realization, &config).unwrap();
        let (a, b) = (demodulate_frame(&conv, &config).unwrap(), demodulate_frame(&mult, &config).unwrap());
        for (x, y) in a.data.iter().flatten().zip(b.data.iter().flatten()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn papr_is_scale_invariant(x in complex_vec(64), re in 0.1..10.0f64, im in -10.0..10.0f64) {
        prop_assume!(energy(&x) > 1e-6);
        let c = C64::new(re, im);
        let y: Vec<C64> = x.iter().map(|v| v * c).collect();
        prop_assert!((papr_db(&x).unwrap() - papr_db(&y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn cdf_is_monotone(values in prop::collection::vec(-100.0..100.0f64, 1..200)) {
        let cdf = empirical_cdf(&values);
        prop_assert!(cdf.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        prop_assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(blocks in prop::collection::vec(complex_vec(6), 3..40)) {
        let m = cross_subcarrier_correlation(&blocks).unwrap();
        for i in 0..6 {
            if !m.flagged.contains(&i) {
                prop_assert_eq!(m.matrix[(i, i)], 1.0);
            }
            for j in 0..6 {
                prop_assert!((m.matrix[(i, j)] - m.matrix[(j, i)]).abs() < 1e-12);
                prop_assert!(m.matrix[(i, j)] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn per_subcarrier_mse_sums_to_total(tx in prop::collection::vec(complex_vec(8), 1..20), seed in any::<u64>()) {
        let shift = C64::new((seed % 7) as f64 * 0.1, -0.2);
        let rx: Vec<Vec<C64>> = tx.iter().map(|b| b.iter().enumerate().map(|(k, v)| v + shift * k as f64).collect()).collect();
        let per = per_subcarrier_mse(&tx, &rx).unwrap();
        let total: f64 = tx.iter().flatten().zip(rx.iter().flatten()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            / (tx.len() * 8) as f64;
        prop_assert!((per.iter().sum::<f64>() - total * 8.0).abs() < 1e-10 * (1.0 + total));
    }

    #[test]
    fn psnr_falls_as_error_grows(a in prop::collection::vec(-1.0..1.0f64, 4..50), e in 0.001..0.5f64) {
        let small: Vec<f64> = a.iter().map(|v| v + e).collect();
        let large: Vec<f64> = a.iter().map(|v| v + 2.0 * e).collect();
        prop_assert!(psnr_db(&a, &large, 2.0).unwrap().value < psnr_db(&a, &small, 2.0).unwrap().value);
    }

    #[test]
    fn pipeline_is_fifo_bounded_and_deterministic(
        enc in (0.001..0.05f64, 0.0..0.05f64),
        tx in (0.001..0.05f64, 0.0..0.05f64),
        cap in 1usize..5,
        fps in 5.0..60.0f64,
        seed in any::<u64>(),
    ) {
        let cfg = pipeline(enc, tx, cap, fps);
        let report = simulate_timing(&cfg, seed).unwrap();
        prop_assert_eq!(report.frames.len(), 60);
        prop_assert!(report.frames.windows(2).all(|w| w[1].decode_end > w[0].decode_end));
        prop_assert!(report.occupancy.iter().all(|&(_, n)| n <= cap));
        prop_assert!(report.frames.iter().all(|f| f.encode_start >= f.arrival_time && f.transmit_start >= f.buffered_at));
        prop_assert_eq!(simulate_timing(&cfg, seed).unwrap(), report);
    }
}
