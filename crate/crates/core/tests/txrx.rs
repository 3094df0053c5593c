use hstdr_core::network::{spectrum_of_taps, ChannelResponse};
use hstdr_core::spectral::{dft_real, energy, hermitian_check, idft};
use hstdr_core::txrx::*;
use hstdr_core::{ChannelGrid, Complex64};
use proptest::prelude::*;
use rand::Rng;

fn arb_d_dot(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    (
        -2.0..2.0f64,
        -2.0..2.0f64,
        prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n - 1),
    )
        .prop_map(|(dc, ny, mid)| {
            let mut v = vec![Complex64::new(dc, 0.0)];
            v.extend(mid.into_iter().map(|(a, b)| Complex64::new(a, b)));
            v.push(Complex64::new(ny, 0.0));
            v
        })
}

fn channel_from_taps(grid: ChannelGrid, h: &[f64]) -> ChannelResponse {
    ChannelResponse {
        grid,
        gamma: spectrum_of_taps(h, grid.n_bins()),
        freq_response: spectrum_of_taps(h, grid.n_bins()),
        impulse_response: h.to_vec(),
        near_singular_bins: vec![],
        coherence_time_s: None,
    }
}

proptest! {
    #[test]
    fn premap_round_trips(d_dot in arb_d_dot(32)) {
        let d = premap(&d_dot).unwrap();
        prop_assert_eq!(d.len(), 32);
        prop_assert_eq!(unpremap(&d).unwrap(), d_dot);
    }

    #[test]
    fn hs_map_yields_real_symbols(d_dot in arb_d_dot(64)) {
        let x = hs_map(&d_dot).unwrap();
        prop_assert!(hermitian_check(&x).unwrap());
        let t = idft(&x).unwrap();
        prop_assert!(t.iter().all(|v| v.im.abs() < 1e-12));
        let grid = ChannelGrid::new(64, 1.2e6, 30).unwrap();
        let frame = HsOfdmFrame::from_subcarriers(d_dot, grid).unwrap();
        let time_energy: f64 = frame.time.iter().map(|v| v * v).sum();
        prop_assert!((time_energy - energy(&frame.spectrum)).abs() < 1e-9 * time_energy.max(1.0));
    }

    #[test]
    fn cp_round_trips(x in prop::collection::vec(-1.0..1.0f64, 1..64), cp in 0usize..64) {
        let cp = cp.min(x.len());
        let s = add_cp(&x, cp).unwrap();
        prop_assert_eq!(&s[..cp], &x[x.len() - cp..]);
        prop_assert_eq!(remove_cp(&s, cp).unwrap(), x);
    }

    #[test]
    fn time_and_frequency_paths_agree(
        taps in prop::collection::vec(-1.0..1.0f64, 1..=30),
        seed in any::<u64>(),
    ) {
        let grid = ChannelGrid::new(64, 1.2e6, 30).unwrap();
        let ch = channel_from_taps(grid, &taps);
        let mut rng = substream(seed, 0);
        let active = ActiveSet::full(64);
        let prev = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &active, grid, 1.0).unwrap();
        let cur = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &active, grid, 1.0).unwrap();
        let noise = vec![Complex64::new(0.0, 0.0); 128];
        let f = channel_pass(&cur, &ch, &noise, ChannelPath::Frequency, Some(&prev)).unwrap();
        let t = channel_pass(&cur, &ch, &noise, ChannelPath::Time, Some(&prev)).unwrap();
        prop_assert!(!f.isi);
        for (a, b) in f.spectrum.iter().zip(&t.spectrum) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn short_prefix_creates_isi_on_time_path_only() {
    let grid = ChannelGrid::new(32, 1.2e6, 4).unwrap();
    let taps: Vec<f64> = (0..20).map(|i| 0.8f64.powi(i)).collect();
    let ch = channel_from_taps(grid, &taps);
    let mut rng = substream(9, 0);
    let active = ActiveSet::full(32);
    let prev = HsOfdmFrame::random(&mut rng, Constellation::Bpsk, &active, grid, 1.0).unwrap();
    let cur = HsOfdmFrame::random(&mut rng, Constellation::Bpsk, &active, grid, 1.0).unwrap();
    let noise = vec![Complex64::new(0.0, 0.0); 64];
    let auto = channel_pass(&cur, &ch, &noise, ChannelPath::Auto, Some(&prev)).unwrap();
    assert_eq!(auto.path, ChannelPath::Time);
    assert!(auto.isi);
    let f = channel_pass(&cur, &ch, &noise, ChannelPath::Frequency, Some(&prev)).unwrap();
    let diff: f64 = f.spectrum.iter().zip(&auto.spectrum).map(|(a, b)| (a - b).norm_sqr()).sum();
    assert!(diff > 1e-3);
}

#[test]
fn identity_channel_passes_symbol_plus_noise() {
    let grid = ChannelGrid::new(16, 1.2e6, 2).unwrap();
    let ch = channel_from_taps(grid, &[1.0]);
    let mut rng = substream(1, 0);
    let frame = HsOfdmFrame::random(&mut rng, Constellation::Psk8, &ActiveSet::full(16), grid, 2.0).unwrap();
    let noise = draw_noise(&vec![0.1; 32], &mut rng);
    for path in [ChannelPath::Frequency, ChannelPath::Time] {
        let r = channel_pass(&frame, &ch, &noise, path, None).unwrap();
        for ((y, x), v) in r.spectrum.iter().zip(&frame.spectrum).zip(&noise) {
            assert!((y - (x + v)).norm() < 1e-12);
        }
    }
}

#[test]
fn gray_neighbours_differ_in_one_bit() {
    for c in Constellation::ALL {
        let m = 1usize << c.bits_per_symbol();
        let pts = c.points();
        for (label, p) in pts.iter().enumerate() {
            assert!((p.norm() - 1.0).abs() < 1e-15);
            // nearest distinct point
            let near = (0..m)
                .filter(|&o| o != label)
                .min_by(|&a, &b| (pts[a] - p).norm().total_cmp(&(pts[b] - p).norm()))
                .unwrap();
            assert_eq!((label ^ near).count_ones(), 1, "{c:?} {label}");
        }
    }
    let q = Constellation::Qpsk.point(0);
    assert!((q.arg() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    assert_eq!(Constellation::Bpsk.point(1), Complex64::new(-1.0, 0.0) * 1.0 + Complex64::new(0.0, Constellation::Bpsk.point(1).im));
}

#[test]
fn modulate_checks_bit_count() {
    let bits = [true, false, true, true];
    let s = modulate(&bits, Constellation::Qpsk, 2).unwrap();
    assert_eq!(s, vec![Constellation::Qpsk.point(0b10), Constellation::Qpsk.point(0b11)]);
    assert!(modulate(&bits, Constellation::Psk8, 2).is_err());
}

#[test]
fn psk_spectrum_is_flat_on_active_bins() {
    let grid = ChannelGrid::new(128, 1.2e6, 30).unwrap();
    let active = ActiveSet::full(128);
    let mut rng = substream(3, 0);
    for c in Constellation::ALL {
        let f = HsOfdmFrame::random(&mut rng, c, &active, grid, 0.7).unwrap();
        let mask = active.two_sided_mask();
        for (k, x) in f.spectrum.iter().enumerate() {
            let want = if mask[k] { 0.7 } else { 0.0 };
            assert!((x.norm() - want).abs() < 1e-12, "{c:?} bin {k}");
        }
    }
}

#[test]
fn non_real_edges_are_rejected() {
    let mut d = vec![Complex64::new(1.0, 0.0); 9];
    d[0] = Complex64::new(1.0, 0.5);
    assert!(hs_map(&d).is_err());
    d[0] = Complex64::new(1.0, 0.0);
    d[8] = Complex64::new(0.0, 1.0);
    assert!(hs_map(&d).is_err());
    assert!(add_cp(&[1.0, 2.0], 3).is_err());
}

#[test]
fn noise_statistics_follow_variances() {
    let grid = ChannelGrid::new(64, 1.2e6, 30).unwrap();
    let model = NoiseModel::default();
    let var = model.bin_variances(&grid);
    assert!((model.psd.one_sided_dbm_hz(0.0) - (-40.02)).abs() < 1e-12);
    let mut rng = substream(11, 5);
    let trials = 20_000;
    let mut acc = vec![0.0; 128];
    for _ in 0..trials {
        let v = draw_noise(&var, &mut rng);
        assert!(hermitian_check(&v).unwrap());
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x.norm_sqr();
        }
    }
    for (k, (a, s)) in acc.iter().zip(&var).enumerate() {
        let est = a / trials as f64;
        assert!((est / s - 1.0).abs() < 0.05, "bin {k}: {est} vs {s}");
    }
    assert!(NoiseModel::disabled().bin_variances(&grid).iter().all(|&v| v == 0.0));
}

#[test]
fn transmit_power_matches_time_domain() {
    let grid = ChannelGrid::new(128, 1.2e6, 30).unwrap();
    let active = ActiveSet::range(128, 3, 104).unwrap();
    let psd = -36.81;
    let amp = power::bin_amplitude(psd, &grid);
    let mut rng = substream(2, 0);
    let f = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &active, grid, amp).unwrap();
    let mean_power: f64 = f.time.iter().map(|v| v * v).sum::<f64>() / f.time.len() as f64;
    let total = power::total_power_dbm(psd, active.len(), &grid);
    assert!((power::mw_to_dbm(mean_power) - total).abs() < 1e-9);
    assert!((total - 19.985).abs() < 0.02);
}

#[test]
fn linear_convolution_matches_direct_sum() {
    let mut rng = substream(4, 0);
    let a: Vec<f64> = (0..37).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = linear_convolve(&a, &b);
    for (n, v) in fast.iter().enumerate() {
        let direct: f64 = (0..b.len()).filter(|&m| m <= n && n - m < a.len()).map(|m| b[m] * a[n - m]).sum();
        assert!((v - direct).abs() < 1e-12);
    }
    let _ = dft_real(&a).unwrap();
}
