//! Pulse compression and channel estimation reflectograms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{check_finite_r, reconstruct, unitary_in_place, ChannelGrid};
use crate::txrx::{ActiveSet, HsOfdmFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PulseCompression,
    ChannelEstimation,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::PulseCompression => "PC",
            Method::ChannelEstimation => "CE",
        }
    }
}

/// A reflectogram on the `T_s` lattice together with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflectogram {
    pub method: Method,
    pub sample_period_s: f64,
    /// Spectrum `P` whose inverse DFT is `samples`.
    pub processed: Vec<Complex64>,
    pub samples: Vec<f64>,
    /// Modeled arithmetic operations, not a measurement.
    pub op_count: u64,
}

/// One row of a reflectogram written against time and distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisSample {
    pub index: usize,
    pub time_s: f64,
    pub distance_m: f64,
    pub amplitude: f64,
}

impl Reflectogram {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples oversampled by `eta`.
    pub fn reconstructed(&self, eta: usize) -> Result<Vec<f64>> {
        reconstruct(&self.processed, eta)
    }

    /// Oversampled samples against round-trip time and one-way distance.
    pub fn axis(&self, eta: usize, phase_velocity: f64) -> Result<Vec<AxisSample>> {
        let dt = self.sample_period_s / eta as f64;
        Ok(self
            .reconstructed(eta)?
            .into_iter()
            .enumerate()
            .map(|(index, amplitude)| {
                let time_s = index as f64 * dt;
                AxisSample {
                    index,
                    time_s,
                    distance_m: phase_velocity * time_s / 2.0,
                    amplitude,
                }
            })
            .collect())
    }
}

fn padded_spectrum(x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    unitary_in_place(&mut buf, false);
    buf
}

fn real_inverse(p: &[Complex64]) -> Vec<f64> {
    let mut buf = p.to_vec();
    unitary_in_place(&mut buf, true);
    buf.into_iter().map(|v| v.re).collect()
}

/// Correlates the received body `y` with the transmitted symbol `x`.
///
/// Both are zero-padded to 4N so the correlation is aperiodic; lag 0 sits
/// at index 0 and negative lags wrap to the end.
pub fn pulse_compression(x: &[f64], y: &[f64], grid: &ChannelGrid) -> Result<Reflectogram> {
    let m = grid.n_bins();
    for (what, v) in [("pulse compression x", x), ("pulse compression y", y)] {
        if v.len() != m {
            return Err(Error::LengthMismatch {
                what,
                expected: m,
                got: v.len(),
            });
        }
        check_finite_r(what, v)?;
    }
    let xz = padded_spectrum(x, 2 * m);
    let yz = padded_spectrum(y, 2 * m);
    let processed: Vec<Complex64> = yz.iter().zip(&xz).map(|(a, b)| a * b.conj()).collect();
    let samples = real_inverse(&processed);
    Ok(Reflectogram {
        method: Method::PulseCompression,
        sample_period_s: grid.sample_period(),
        processed,
        samples,
        op_count: complexity(Method::PulseCompression, grid.n_half())?.operations,
    })
}

/// Zero-forcing estimate `Y / X` on the active bins, zero elsewhere.
pub fn channel_estimate(
    x: &[Complex64],
    y: &[Complex64],
    active: &ActiveSet,
    grid: &ChannelGrid,
) -> Result<Reflectogram> {
    let m = grid.n_bins();
    for (what, v) in [("channel estimate X", x), ("channel estimate Y", y)] {
        if v.len() != m {
            return Err(Error::LengthMismatch {
                what,
                expected: m,
                got: v.len(),
            });
        }
        crate::spectral::check_finite_c(what, v)?;
    }
    if active.n_half() != grid.n_half() {
        return Err(invalid("active_set", "built for a different N"));
    }
    let mask = active.two_sided_mask();
    let mut processed = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..m {
        if mask[k] {
            if x[k].norm() == 0.0 {
                return Err(Error::ZeroSubcarrier { bin: k });
            }
            processed[k] = y[k] / x[k];
        }
    }
    let samples = real_inverse(&processed);
    Ok(Reflectogram {
        method: Method::ChannelEstimation,
        sample_period_s: grid.sample_period(),
        processed,
        samples,
        op_count: complexity(Method::ChannelEstimation, grid.n_half())?.operations,
    })
}

/// Noise-free, channel-free output of `method`, oversampled by `eta`.
///
/// Pulse compression yields the aperiodic autocorrelation of the symbol;
/// channel estimation yields the inverse DFT of the active-bin mask.
pub fn equivalent_pulse(method: Method, frame: &HsOfdmFrame, active: &ActiveSet, eta: usize) -> Result<Vec<f64>> {
    match method {
        Method::PulseCompression => {
            let xz = padded_spectrum(&frame.time, 2 * frame.grid.n_bins());
            let p: Vec<Complex64> = xz.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
            reconstruct(&p, eta)
        }
        Method::ChannelEstimation => {
            let p: Vec<Complex64> = active
                .two_sided_mask()
                .into_iter()
                .map(|on| Complex64::new(if on { 1.0 } else { 0.0 }, 0.0))
                .collect();
            reconstruct(&p, eta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    pub method: Method,
    pub n_half: usize,
    pub operations: u64,
}

/// `M log2 M` for `M` FFT points; exact for powers of two.
fn fft_ops(m: u64) -> u64 {
    if m.is_power_of_two() {
        m * u64::from(m.trailing_zeros())
    } else {
        (m as f64 * (m as f64).log2()).round() as u64
    }
}

/// Two FFTs plus one pointwise pass, at 4N points (PC) or 2N points (CE).
pub fn complexity(method: Method, n_half: usize) -> Result<ComplexityReport> {
    if n_half == 0 {
        return Err(invalid("n_half", "must be >= 1"));
    }
    let m = match method {
        Method::PulseCompression => 4 * n_half as u64,
        Method::ChannelEstimation => 2 * n_half as u64,
    };
    Ok(ComplexityReport {
        method,
        n_half,
        operations: 2 * fft_ops(m) + m,
    })
}

/// `complexity(PC) / complexity(CE)`.
pub fn complexity_ratio(n_half: usize) -> Result<f64> {
    let pc = complexity(Method::PulseCompression, n_half)?.operations as f64;
    let ce = complexity(Method::ChannelEstimation, n_half)?.operations as f64;
    Ok(pc / ce)
}
