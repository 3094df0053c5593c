use hstdr_core::network::spectrum_of_taps;
use hstdr_core::reflectogram::*;
use hstdr_core::spectral::{idft, hermitian_check};
use hstdr_core::txrx::*;
use hstdr_core::{ChannelGrid, Complex64, Error};
use proptest::prelude::*;

fn grid(n: usize) -> ChannelGrid {
    ChannelGrid::new(n, 1.2e6, 0).unwrap()
}

fn circular(x: &[f64], h: &[f64]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|n| h.iter().enumerate().map(|(k, &hk)| hk * x[(n + m - k % m) % m]).sum())
        .collect()
}

#[test]
fn pulse_compression_matches_direct_correlation() {
    let g = grid(32);
    let mut rng = substream(1, 0);
    let f = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &ActiveSet::full(32), g, 1.0).unwrap();
    let y = circular(&f.time, &[0.0, 0.0, 0.0, 0.5, -0.2]);
    let r = pulse_compression(&f.time, &y, &g).unwrap();
    assert_eq!(r.len(), 128);
    let m4 = 128usize;
    for lag in 0..m4 {
        // Aperiodic cross-correlation, negative lags wrapped to the end.
        let shift = lag as isize - if lag >= m4 / 2 { m4 as isize } else { 0 };
        let direct: f64 = (0..64isize)
            .filter(|n| (0..64).contains(&(n + shift)))
            .map(|n| y[(n + shift) as usize] * f.time[n as usize])
            .sum();
        assert!((r.samples[lag] - direct / (m4 as f64).sqrt()).abs() < 1e-12, "lag {lag}");
    }
    let full: Vec<Complex64> = idft(&r.processed).unwrap();
    assert!(full.iter().all(|v| v.im.abs() < 1e-10));
    assert!(hermitian_check(&r.processed).unwrap());
}

#[test]
fn autocorrelation_peaks_at_lag_zero_and_delay_moves_it() {
    let g = grid(64);
    let mut rng = substream(2, 0);
    let f = HsOfdmFrame::random(&mut rng, Constellation::Bpsk, &ActiveSet::full(64), g, 1.0).unwrap();
    let auto = pulse_compression(&f.time, &f.time, &g).unwrap();
    let peak = |s: &[f64]| (0..s.len()).max_by(|&a, &b| s[a].abs().total_cmp(&s[b].abs())).unwrap();
    assert_eq!(peak(&auto.samples), 0);
    let mut taps = vec![0.0; 12];
    taps[11] = 1.0;
    let delayed = circular(&f.time, &taps);
    let r = pulse_compression(&f.time, &delayed, &g).unwrap();
    assert_eq!(peak(&r.samples), 11);
}

proptest! {
    #[test]
    fn even_bins_carry_half_power_times_channel(
        taps in prop::collection::vec(-1.0..1.0f64, 1..16),
        seed in any::<u64>(),
    ) {
        let g = grid(32);
        let mut rng = substream(seed, 0);
        let f = HsOfdmFrame::random(&mut rng, Constellation::Psk8, &ActiveSet::full(32), g, 1.3).unwrap();
        let h = spectrum_of_taps(&taps, 64);
        let y = circular(&f.time, &taps);
        let r = pulse_compression(&f.time, &y, &g).unwrap();
        for k in 0..64 {
            let want = f.spectrum[k].norm_sqr() * h[k] * 0.5;
            prop_assert!((r.processed[2 * k] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn channel_estimate_recovers_taps(taps in prop::collection::vec(-1.0..1.0f64, 1..16), seed in any::<u64>()) {
        let g = grid(32);
        let all = ActiveSet::new(32, (0..=32).collect()).unwrap();
        let mut rng = substream(seed, 1);
        let f = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &all, g, 0.4).unwrap();
        let h = spectrum_of_taps(&taps, 64);
        let y: Vec<Complex64> = f.spectrum.iter().zip(&h).map(|(a, b)| a * b).collect();
        let r = channel_estimate(&f.spectrum, &y, &all, &g).unwrap();
        let scale = 8.0; // sqrt(2N)
        for (n, v) in r.samples.iter().enumerate() {
            let want = taps.get(n).copied().unwrap_or(0.0) * scale;
            prop_assert!((v - want).abs() < 1e-10);
        }
    }
}

#[test]
fn channel_estimate_rejects_dead_subcarrier() {
    let g = grid(8);
    let active = ActiveSet::range(8, 1, 4).unwrap();
    let mut rng = substream(0, 0);
    let f = HsOfdmFrame::random(&mut rng, Constellation::Bpsk, &ActiveSet::range(8, 1, 3).unwrap(), g, 1.0).unwrap();
    let err = channel_estimate(&f.spectrum, &f.spectrum, &active, &g).unwrap_err();
    assert_eq!(err, Error::ZeroSubcarrier { bin: 4 });
}

#[test]
fn complexity_counts() {
    assert_eq!(complexity(Method::ChannelEstimation, 128).unwrap().operations, 4352);
    assert_eq!(complexity(Method::PulseCompression, 128).unwrap().operations, 9728);
    assert!(complexity(Method::PulseCompression, 0).is_err());
    // Approaches 2 from above as N grows.
    let mut last = f64::INFINITY;
    for p in 4..16 {
        let r = complexity_ratio(1 << p).unwrap();
        assert!(r > 2.0 && r < last);
        last = r;
    }
    assert_eq!(complexity(Method::ChannelEstimation, 3).unwrap().operations, 2 * 16 + 6);
}

#[test]
fn equivalent_pulses_are_unit_peaked_lattice_values() {
    let g = grid(16);
    let active = ActiveSet::full(16);
    let mut rng = substream(5, 0);
    let f = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &active, g, 1.0).unwrap();
    let ce = equivalent_pulse(Method::ChannelEstimation, &f, &active, 4).unwrap();
    assert_eq!(ce.len(), 32 * 4);
    let lattice = equivalent_pulse(Method::ChannelEstimation, &f, &active, 1).unwrap();
    for (i, v) in lattice.iter().enumerate() {
        assert!((ce[4 * i] - v).abs() < 1e-12);
    }
    // CE pulse peak sqrt(2N) * (active fraction of the 2N bins)
    assert!((lattice[0] - 31.0 / 32f64.sqrt()).abs() < 1e-12);
    let pc = equivalent_pulse(Method::PulseCompression, &f, &active, 2).unwrap();
    assert_eq!(pc.len(), 64 * 2);
    let energy: f64 = f.time.iter().map(|v| v * v).sum();
    assert!((pc[0] - energy / 64f64.sqrt()).abs() < 1e-12);
}

#[test]
fn axis_uses_round_trip_distance() {
    let g = grid(8);
    let mut rng = substream(5, 0);
    let f = HsOfdmFrame::random(&mut rng, Constellation::Bpsk, &ActiveSet::full(8), g, 1.0).unwrap();
    let r = channel_estimate(&f.spectrum, &f.spectrum, &ActiveSet::full(8), &g).unwrap();
    let axis = r.axis(2, 2e8).unwrap();
    assert_eq!(axis.len(), 32);
    let dt = g.sample_period() / 2.0;
    assert!((axis[3].time_s - 3.0 * dt).abs() < 1e-18);
    assert!((axis[3].distance_m - 2e8 * 3.0 * dt / 2.0).abs() < 1e-9);
}
