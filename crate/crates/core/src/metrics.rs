//! Figures of merit for pulses, channels and received symbols.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::network::ChannelResponse;
use crate::spectral::{check_finite_c, check_finite_r, dft_real, reconstruct, unitary_in_place, ChannelGrid};

/// A local minimum below this fraction of the peak closes the mainlobe.
const NULL_FRACTION: f64 = 0.01;
const TIE_TOL: f64 = 1e-9;
/// Slack on the coherence threshold so a flat channel survives rounding at `alpha = 1`.
const COHERENCE_TOL: f64 = 1e-12;

/// Sidelobe figures of a pulse; `None` where the quantity is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SidelobeReport {
    pub peak_index: usize,
    pub peak_value: f64,
    /// Inclusive bounds, possibly wrapping around the end of the pulse.
    pub mainlobe: (usize, usize),
    pub pslr_db: Option<f64>,
    pub islr_db: Option<f64>,
}

fn oversample(pulse: &[f64], eta: usize) -> Result<Vec<f64>> {
    if eta == 0 {
        return Err(invalid("eta", "oversampling factor must be >= 1"));
    }
    if eta == 1 {
        return Ok(pulse.to_vec());
    }
    reconstruct(&dft_real(pulse)?, eta)
}

/// Mainlobe and sidelobe split of a (circular) pulse.
///
/// The mainlobe grows from the peak while samples keep the peak's sign; a
/// local minimum of magnitude below 1% of the peak also ends it and
/// belongs to it.
pub fn sidelobes(pulse: &[f64], eta: usize) -> Result<SidelobeReport> {
    if pulse.is_empty() {
        return Err(Error::Empty { what: "sidelobes" });
    }
    check_finite_r("sidelobes", pulse)?;
    let p = oversample(pulse, eta)?;
    let len = p.len();
    let peak_index = (0..len).max_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()).then(b.cmp(&a))).unwrap();
    let peak = p[peak_index];
    let undefined = |mainlobe| SidelobeReport {
        peak_index,
        peak_value: peak,
        mainlobe,
        pslr_db: None,
        islr_db: None,
    };
    if peak == 0.0 {
        return Ok(undefined((0, len - 1)));
    }
    let sign = peak.signum();
    let at = |i: isize| p[i.rem_euclid(len as isize) as usize];
    let walk = |dir: isize| -> Option<isize> {
        let mut off = 0isize;
        loop {
            let next = off + dir;
            if next.unsigned_abs() >= len {
                return None;
            }
            let v = at(peak_index as isize + next);
            if v * sign <= 0.0 {
                return Some(off);
            }
            let after = at(peak_index as isize + next + dir);
            let prev = at(peak_index as isize + off);
            if v.abs() < NULL_FRACTION * peak.abs() && v.abs() <= prev.abs() && v.abs() <= after.abs() {
                return Some(next);
            }
            off = next;
        }
    };
    let (Some(right), Some(left)) = (walk(1), walk(-1)) else {
        return Ok(undefined((0, len - 1)));
    };
    let idx = |o: isize| (peak_index as isize + o).rem_euclid(len as isize) as usize;
    let mainlobe = (idx(left), idx(right));
    let width = (right - left + 1) as usize;
    if width >= len {
        return Ok(undefined((0, len - 1)));
    }
    let main_energy: f64 = (left..=right).map(|o| at(peak_index as isize + o).powi(2)).sum();
    let mut side_max = 0.0f64;
    let mut side_energy = 0.0;
    for o in right + 1..right + 1 + (len - width) as isize {
        let v = at(peak_index as isize + o);
        side_max = side_max.max(v * v);
        side_energy += v * v;
    }
    let peak_power = peak * peak;
    if side_max == 0.0 || side_max >= peak_power * (1.0 - TIE_TOL) {
        return Ok(undefined(mainlobe));
    }
    Ok(SidelobeReport {
        peak_index,
        peak_value: peak,
        mainlobe,
        pslr_db: Some(10.0 * (side_max / peak_power).log10()),
        islr_db: Some(10.0 * (side_energy / main_energy).log10()),
    })
}

/// Peak-to-sidelobe ratio in dB, `None` if undefined.
pub fn pslr(pulse: &[f64], eta: usize) -> Result<Option<f64>> {
    Ok(sidelobes(pulse, eta)?.pslr_db)
}

/// Integrated sidelobe ratio in dB, `None` if undefined.
pub fn islr(pulse: &[f64], eta: usize) -> Result<Option<f64>> {
    Ok(sidelobes(pulse, eta)?.islr_db)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, "must be positive and finite"))
    }
}

/// `v_p / (4 B)`.
pub fn range_resolution(phase_velocity: f64, bandwidth_hz: f64) -> Result<f64> {
    positive("phase_velocity", phase_velocity)?;
    positive("bandwidth_hz", bandwidth_hz)?;
    Ok(phase_velocity / (4.0 * bandwidth_hz))
}

/// `v_p T_s min(2N, L_cp) / 2`.
pub fn max_unambiguous_range(phase_velocity: f64, sample_period: f64, n_half: usize, cp_len: usize) -> Result<f64> {
    positive("phase_velocity", phase_velocity)?;
    positive("sample_period", sample_period)?;
    if n_half == 0 {
        return Err(invalid("n_half", "must be >= 1"));
    }
    Ok(phase_velocity * sample_period * (2 * n_half).min(cp_len) as f64 / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceBandwidth {
    pub bandwidth_hz: f64,
    pub shift_bins: usize,
    pub alpha: f64,
    /// `|R(m)| / |R(0)|` for every shift.
    pub correlation: Vec<f64>,
}

/// `|R(m)|` with `R(m)` the mean of `H_k conj(H_{k+m})` over the overlap.
pub fn frequency_correlation(h: &[Complex64]) -> Vec<f64> {
    let len = h.len();
    let m = (2 * len).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..len].copy_from_slice(h);
    unitary_in_place(&mut buf, false);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    unitary_in_place(&mut buf, true);
    let gain = (m as f64).sqrt();
    (0..len).map(|s| buf[s].norm() * gain / (len - s) as f64).collect()
}

/// Largest shift over which `|R|` stays at least `alpha |R(0)|`, times `df`.
///
/// A channel with no energy is treated as flat.
pub fn coherence_bandwidth(h: &[Complex64], subcarrier_spacing_hz: f64, alpha: f64) -> Result<CoherenceBandwidth> {
    if h.is_empty() {
        return Err(Error::Empty { what: "coherence_bandwidth" });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", "must lie in [0, 1]"));
    }
    positive("subcarrier_spacing_hz", subcarrier_spacing_hz)?;
    check_finite_c("coherence_bandwidth", h)?;
    let raw = frequency_correlation(h);
    let r0 = raw[0];
    let correlation: Vec<f64> = if r0 > 0.0 {
        raw.iter().map(|v| v / r0).collect()
    } else {
        vec![1.0; raw.len()]
    };
    let shift_bins = correlation
        .iter()
        .skip(1)
        .position(|&v| v < alpha * (1.0 - COHERENCE_TOL))
        .unwrap_or(correlation.len() - 1);
    Ok(CoherenceBandwidth {
        bandwidth_hz: shift_bins as f64 * subcarrier_spacing_hz,
        shift_bins,
        alpha,
        correlation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: &'static str,
    pub description: &'static str,
    pub required: f64,
    pub actual: f64,
    /// Signed slack; negative when violated.
    pub margin: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamReport {
    pub range_resolution_m: f64,
    pub max_range_m: f64,
    pub target_range_m: f64,
    pub phase_velocity_mps: f64,
    pub coherence: CoherenceBandwidth,
    pub channel_len: usize,
    pub cp_covers_channel: bool,
    pub constraints: Vec<Constraint>,
    pub pass: bool,
}

fn at_least(name: &'static str, description: &'static str, actual: f64, required: f64) -> Constraint {
    Constraint {
        name,
        description,
        required,
        actual,
        margin: actual - required,
        satisfied: actual >= required,
    }
}

/// Checks the lattice against a channel and a target range.
///
/// The coherence bandwidth is measured over one-sided bins `0..=N` of the
/// sampled reflection coefficient.
pub fn validate_params(
    grid: &ChannelGrid,
    ch: &ChannelResponse,
    target_range_m: f64,
    phase_velocity: f64,
    alpha: f64,
) -> Result<ParamReport> {
    positive("target_range_m", target_range_m)?;
    if ch.grid.n_bins() != grid.n_bins() {
        return Err(Error::LengthMismatch {
            what: "channel bins",
            expected: grid.n_bins(),
            got: ch.grid.n_bins(),
        });
    }
    let df = grid.subcarrier_spacing_hz();
    let coherence = coherence_bandwidth(&ch.gamma[..=grid.n_half()], df, alpha)?;
    let b = grid.bandwidth_hz();
    let n = grid.n_half() as f64;
    let per_sample = phase_velocity * grid.sample_period();
    let bins_needed = if coherence.bandwidth_hz > 0.0 {
        b / coherence.bandwidth_hz
    } else {
        f64::INFINITY
    };
    let constraints = vec![
        at_least("coherence_bins", "N >= B / B_c", n, bins_needed),
        at_least("range_bins", "N >= d_max / (v_p T_s)", n, target_range_m / per_sample),
        at_least("cp_range", "L_cp >= 2 d_max / (v_p T_s)", grid.cp_len() as f64, 2.0 * target_range_m / per_sample),
        at_least("spacing", "B_c >= df", coherence.bandwidth_hz, df),
    ];
    let pass = constraints.iter().all(|c| c.satisfied);
    Ok(ParamReport {
        range_resolution_m: range_resolution(phase_velocity, b)?,
        max_range_m: max_unambiguous_range(phase_velocity, grid.sample_period(), grid.n_half(), grid.cp_len())?,
        target_range_m,
        phase_velocity_mps: phase_velocity,
        coherence,
        channel_len: ch.channel_len(),
        cp_covers_channel: grid.cp_len() >= ch.channel_len(),
        constraints,
        pass,
    })
}

/// Signal-to-(noise + interference) in dB from component powers.
///
/// A zero denominator gives `+inf`.
pub fn sinr_from_powers(signal: f64, noise: f64, interference: f64) -> f64 {
    let den = noise + interference;
    if den == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / den).log10()
    }
}

/// SINR over `bins` of separately tracked received components.
pub fn sinr(signal: &[Complex64], noise: &[Complex64], interference: &[Complex64], bins: &[usize]) -> Result<f64> {
    let len = signal.len();
    for (what, v) in [("sinr noise", noise), ("sinr interference", interference)] {
        if v.len() != len {
            return Err(Error::LengthMismatch {
                what,
                expected: len,
                got: v.len(),
            });
        }
    }
    if let Some(&k) = bins.iter().find(|&&k| k >= len) {
        return Err(invalid("bins", format!("bin {k} out of range")));
    }
    let pow = |v: &[Complex64]| bins.iter().map(|&k| v[k].norm_sqr()).sum::<f64>();
    Ok(sinr_from_powers(pow(signal), pow(noise), pow(interference)))
}
