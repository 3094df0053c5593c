//! Subcommand bodies.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use hstdr_core::metrics::{max_unambiguous_range, range_resolution, sidelobes, validate_params};
use hstdr_core::multiaccess::{run_campaign, CampaignConfig, CampaignResult};
use hstdr_core::network::reflection_channel;
use hstdr_core::presets::{Regulation, LV_PHASE_VELOCITY_MPS, MV_PHASE_VELOCITY_MPS};
use hstdr_core::reflectogram::{complexity, complexity_ratio, equivalent_pulse, Method};
use hstdr_core::spectral::{dft_real, reconstruct};
use hstdr_core::txrx::{power, substream, ActiveSet, Constellation, HsOfdmFrame};
use hstdr_core::ChannelGrid;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::output::{num, opt, slug, OutDir};

fn out_dir(cfg: &ScenarioConfig, default: &str) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn manifest(cfg: &ScenarioConfig, command: &str, files: &[String]) -> Value {
    json!({
        "tool": "hstdr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "files": files,
    })
}

pub fn presets(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    println!(
        "{:<8} {:>9} {:>9} {:>8} {:>8} {:>5} {:>8} {:>8} {:>6} {:>6}",
        "preset", "f_lo kHz", "f_hi kHz", "B kHz", "Fs MHz", "FFT", "active", "N_act", "L_cp", "long"
    );
    let mut rows = Vec::new();
    for reg in Regulation::ALL {
        let p = reg.preset();
        let long = p.cp_long.map_or_else(|| "-".to_string(), |v| v.to_string());
        println!(
            "{:<8} {:>9.1} {:>9.1} {:>8.1} {:>8.2} {:>5} {:>8} {:>8} {:>6} {:>6}",
            p.name,
            p.band_start_hz / 1e3,
            p.band_stop_hz / 1e3,
            p.bandwidth_hz / 1e3,
            p.sample_rate_hz / 1e6,
            p.fft_size,
            format!("{}-{}", p.active_first, p.active_last),
            p.n_active(),
            p.cp_standard,
            long
        );
        rows.push(json!({
            "name": p.name,
            "band_start_hz": p.band_start_hz,
            "band_stop_hz": p.band_stop_hz,
            "bandwidth_hz": p.bandwidth_hz,
            "sample_rate_hz": p.sample_rate_hz,
            "fft_size": p.fft_size,
            "active_first": p.active_first,
            "active_last": p.active_last,
            "n_active": p.n_active(),
            "cp_standard": p.cp_standard,
            "cp_long": p.cp_long.map_or(Value::String("not defined".into()), Value::from),
            "range_resolution_m": {
                "lv": num(range_resolution(LV_PHASE_VELOCITY_MPS, p.bandwidth_hz)?),
                "mv": num(range_resolution(MV_PHASE_VELOCITY_MPS, p.bandwidth_hz)?),
            },
        }));
    }
    if let Some(dir) = &cfg.output_dir {
        let mut out = OutDir::create(dir)?;
        out.json("presets.json", &Value::Array(rows))?;
    }
    Ok(())
}

pub fn param_report(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let (grid, _) = cfg.band.resolve()?;
    let net = cfg.network()?;
    let ports = cfg.plm_ports(&net)?;
    let vp = cfg.phase_velocity(&net, &grid);
    let bandwidth = cfg.band.occupied_bandwidth_hz()?;
    let delta = range_resolution(vp, bandwidth)?;
    let d_max = max_unambiguous_range(vp, grid.sample_period(), grid.n_half(), grid.cp_len())?;
    println!(
        "N = {}, L_cp = {}, B = {:.1} kHz, v_p = {:.4e} m/s",
        grid.n_half(),
        grid.cp_len(),
        bandwidth / 1e3,
        vp
    );
    println!("range resolution {delta:.2} m, maximum unambiguous range {:.3} km", d_max / 1e3);
    let mut plms = Vec::new();
    for &p in &ports {
        let name = &net.ports()[p].name;
        let ch = reflection_channel(&net, p, &grid)?;
        let target = cfg.target_range(&net, p);
        let report = validate_params(&grid, &ch, target, vp, cfg.alpha)?;
        println!(
            "{name}: target {target:.1} m, L_h = {}, B_c = {:.1} kHz (alpha {}), {}",
            report.channel_len,
            report.coherence.bandwidth_hz / 1e3,
            cfg.alpha,
            if report.pass { "all constraints met" } else { "constraints violated" }
        );
        for c in &report.constraints {
            println!(
                "  {:<15} {:<28} required {:>10.3} actual {:>10.3} margin {:>+10.3} {}",
                c.name,
                c.description,
                c.required,
                c.actual,
                c.margin,
                if c.satisfied { "ok" } else { "VIOLATED" }
            );
        }
        plms.push(json!({
            "port": name,
            "target_range_m": num(target),
            "channel_len": report.channel_len,
            "cp_covers_channel": report.cp_covers_channel,
            "coherence_bandwidth_hz": num(report.coherence.bandwidth_hz),
            "coherence_shift_bins": report.coherence.shift_bins,
            "near_singular_bins": ch.near_singular_bins,
            "pass": report.pass,
            "constraints": report.constraints.iter().map(|c| json!({
                "name": c.name,
                "description": c.description,
                "required": num(c.required),
                "actual": num(c.actual),
                "margin": num(c.margin),
                "satisfied": c.satisfied,
            })).collect::<Vec<_>>(),
        }));
    }
    if let Some(dir) = &cfg.output_dir {
        let mut out = OutDir::create(dir)?;
        out.json(
            "param_report.json",
            &json!({
                "n_half": grid.n_half(),
                "cp_len": grid.cp_len(),
                "bandwidth_hz": num(bandwidth),
                "phase_velocity_mps": num(vp),
                "alpha": num(cfg.alpha),
                "range_resolution_m": num(delta),
                "max_range_m": num(d_max),
                "plms": plms,
            }),
        )?;
        let files = out.files().to_vec();
        out.json("manifest.json", &manifest(cfg, "param-report", &files))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AxisRow {
    index: usize,
    time_s: f64,
    distance_m: f64,
    amplitude: f64,
}

#[derive(Serialize)]
struct KeptRow {
    measurement: usize,
    index: usize,
    amplitude: f64,
}

/// Lattice samples oversampled by `eta` against time and distance.
fn axis(samples: &[f64], grid: &ChannelGrid, eta: usize, vp: f64) -> anyhow::Result<Vec<AxisRow>> {
    let fine = reconstruct(&dft_real(samples)?, eta)?;
    let dt = grid.sample_period() / eta as f64;
    Ok(fine
        .into_iter()
        .enumerate()
        .map(|(index, amplitude)| {
            let time_s = index as f64 * dt;
            AxisRow {
                index,
                time_s,
                distance_m: vp * time_s / 2.0,
                amplitude,
            }
        })
        .collect())
}

fn campaign_config(cfg: &ScenarioConfig, grid: ChannelGrid, active: ActiveSet, n_plm: usize, vp: f64, target: f64) -> CampaignConfig {
    CampaignConfig {
        constellation: cfg.constellation,
        method: cfg.method,
        tx_psd_dbm_hz: cfg.tx_psd_dbm_hz,
        noise: cfg.noise,
        seed: cfg.seed,
        path: cfg.path,
        keep_reflectograms: cfg.keep_reflectograms,
        target_range_m: Some(target),
        phase_velocity_mps: Some(vp),
        alpha: cfg.alpha,
        ..CampaignConfig::new(cfg.scheme, n_plm, grid, active).with_symbols(cfg.symbols)
    }
}

fn summary(cfg: &ScenarioConfig, r: &CampaignResult, grid: &ChannelGrid, active: &ActiveSet, peaks: &[(usize, f64)]) -> anyhow::Result<Value> {
    let rates = |x: &hstdr_core::multiaccess::RateReport| json!({"n_rho": num(x.n_rho), "n_t": num(x.n_t), "n_meas": num(x.n_meas)});
    let plms: Vec<Value> = r
        .plms
        .iter()
        .zip(peaks)
        .map(|(p, &(peak_index, peak_distance))| {
            json!({
                "port": p.port,
                "reflectograms": p.reflectograms,
                "transferograms": p.transferograms,
                "measurement_bins": p.measurement_bins,
                "channel_len": p.channel_len,
                "signal_power_mw": num(p.signal_power_mw),
                "noise_power_mw": num(p.noise_power_mw),
                "interference_power_mw": num(p.interference_power_mw),
                "sinr_db": num(p.sinr_db),
                "analytic_sinr_db": num(p.analytic_sinr_db),
                "decoded_noise_ratio": opt(p.decoded_noise_ratio),
                "allocated_power_dbm": num(p.allocated_power_dbm),
                "budget_power_dbm": num(p.budget_power_dbm),
                "peak_index": peak_index,
                "peak_distance_m": num(peak_distance),
                "warnings": p.warnings,
            })
        })
        .collect();
    Ok(json!({
        "scheme": r.scheme,
        "n_plm": r.n_plm,
        "periods": r.periods,
        "symbol_duration_s": num(r.t_symb),
        "channel_path": r.path,
        "method": cfg.method,
        "constellation": cfg.constellation,
        "eta": cfg.eta,
        "rates": rates(&r.rates),
        "measured_rates": rates(&r.measured_rates),
        "complexity": {
            "operations": complexity(cfg.method, grid.n_half())?.operations,
            "pc_over_ce": num(complexity_ratio(grid.n_half())?),
        },
        "total_power_dbm": num(power::total_power_dbm(cfg.tx_psd_dbm_hz, active.len(), grid)),
        "plms": plms,
        "warnings": r.warnings,
    }))
}

pub fn simulate(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let start = Instant::now();
    let (grid, active) = cfg.band.resolve()?;
    let net = cfg.network()?;
    let ports = cfg.plm_ports(&net)?;
    let vp = cfg.phase_velocity(&net, &grid);
    let target = cfg.target_range(&net, ports[0]);
    let campaign = campaign_config(cfg, grid, active.clone(), ports.len(), vp, target);
    let result = run_campaign(&campaign, &net, &ports).context("running campaign")?;

    let mut out = OutDir::create(&out_dir(cfg, "hstdr-out"))?;
    let mut peaks = Vec::new();
    for (u, p) in result.plms.iter().enumerate() {
        let rows = axis(&p.mean_reflectogram, &grid, cfg.eta, vp)?;
        let peak = rows
            .iter()
            .max_by(|a, b| a.amplitude.abs().total_cmp(&b.amplitude.abs()))
            .map_or((0, 0.0), |r| (r.index, r.distance_m));
        peaks.push(peak);
        let stem = format!("plm{u}_{}", slug(&p.port));
        out.csv(&format!("reflectogram_{stem}.csv"), rows)?;
        if !p.kept.is_empty() {
            let kept = p.kept.iter().enumerate().flat_map(|(m, r)| {
                r.iter().enumerate().map(move |(index, &amplitude)| KeptRow {
                    measurement: m,
                    index,
                    amplitude,
                })
            });
            out.csv(&format!("kept_{stem}.csv"), kept)?;
        }
    }
    let summary = summary(cfg, &result, &grid, &active, &peaks)?;
    out.json("summary.json", &summary)?;
    let files = out.files().to_vec();
    out.json("manifest.json", &manifest(cfg, "simulate", &files))?;

    println!(
        "{} with {} PLM(s), {} symbol periods, {} path",
        result.scheme.label(),
        result.n_plm,
        result.periods,
        match result.path {
            hstdr_core::txrx::ChannelPath::Time => "time",
            _ => "frequency",
        }
    );
    for (p, (_, d)) in result.plms.iter().zip(&peaks) {
        println!(
            "  {:<16} {:>5} reflectograms, SINR {:>7.2} dB (analytic {:>7.2} dB), strongest echo at {:.1} m",
            p.port, p.reflectograms, p.sinr_db, p.analytic_sinr_db, d
        );
        for w in &p.warnings {
            println!("    warning: {w}");
        }
    }
    for w in &result.warnings {
        println!("  warning: {w}");
    }
    println!("wrote {} files to {} in {:.2?}", out.files().len() + 1, out.root().display(), start.elapsed());
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    n_half: usize,
    method: &'static str,
    constellation: &'static str,
    payloads: usize,
    pslr_mean_db: f64,
    pslr_std_db: f64,
    islr_mean_db: f64,
    islr_std_db: f64,
    operations: u64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

pub fn sweep(cfg: &ScenarioConfig) -> anyhow::Result<()> {
    let start = Instant::now();
    let (base, _) = cfg.band.resolve()?;
    let mut rows = Vec::new();
    for &n in &cfg.sweep.n_half {
        let grid = ChannelGrid::new(n, base.sample_rate_hz(), 0)?;
        let active = ActiveSet::full(n);
        let mut rng = substream(cfg.seed, n as u64);
        let frame = HsOfdmFrame::random(&mut rng, Constellation::Qpsk, &active, grid, 1.0)?;
        let ce = sidelobes(&equivalent_pulse(Method::ChannelEstimation, &frame, &active, cfg.eta)?, 1)?;
        rows.push(SweepRow {
            n_half: n,
            method: Method::ChannelEstimation.label(),
            constellation: "any",
            payloads: 1,
            pslr_mean_db: ce.pslr_db.unwrap_or(f64::NAN),
            pslr_std_db: 0.0,
            islr_mean_db: ce.islr_db.unwrap_or(f64::NAN),
            islr_std_db: 0.0,
            operations: complexity(Method::ChannelEstimation, n)?.operations,
        });
        for c in Constellation::ALL {
            let (mut pslr, mut islr) = (Vec::new(), Vec::new());
            for _ in 0..cfg.sweep.payloads {
                let frame = HsOfdmFrame::random(&mut rng, c, &active, grid, 1.0)?;
                let r = sidelobes(&equivalent_pulse(Method::PulseCompression, &frame, &active, cfg.eta)?, 1)?;
                if let (Some(p), Some(i)) = (r.pslr_db, r.islr_db) {
                    pslr.push(p);
                    islr.push(i);
                }
            }
            let (pm, ps) = mean_std(&pslr);
            let (im, is) = mean_std(&islr);
            rows.push(SweepRow {
                n_half: n,
                method: Method::PulseCompression.label(),
                constellation: c.name(),
                payloads: pslr.len(),
                pslr_mean_db: pm,
                pslr_std_db: ps,
                islr_mean_db: im,
                islr_std_db: is,
                operations: complexity(Method::PulseCompression, n)?.operations,
            });
        }
    }
    println!(
        "{:>6} {:<3} {:<5} {:>10} {:>10} {:>10}",
        "N", "", "const", "PSLR dB", "ISLR dB", "ops"
    );
    for r in &rows {
        println!(
            "{:>6} {:<3} {:<5} {:>10.2} {:>10.2} {:>10}",
            r.n_half, r.method, r.constellation, r.pslr_mean_db, r.islr_mean_db, r.operations
        );
    }
    let mut out = OutDir::create(&out_dir(cfg, "hstdr-sweep"))?;
    out.csv("sweep.csv", rows)?;
    let files = out.files().to_vec();
    out.json("manifest.json", &manifest(cfg, "sweep", &files))?;
    println!("wrote {} in {:.2?}", out.root().display(), start.elapsed());
    Ok(())
}
