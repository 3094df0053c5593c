//! Unitary DFT, Hermitian-symmetry helpers and the frequency lattice.
//!
//! Every transform here uses the `1/sqrt(M)` normalization in both
//! directions, so `idft(dft(x)) == x` and Parseval holds without factors.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance used when deciding whether a spectrum is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place unitary transform. No validation; callers own the input.
pub(crate) fn unitary_in_place(buf: &mut [Complex64], inverse: bool) {
    let len = buf.len();
    if len == 0 {
        return;
    }
    plan(len, inverse).process(buf);
    let scale = 1.0 / (len as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

pub(crate) fn check_finite_c(what: &'static str, x: &[Complex64]) -> Result<()> {
    match x.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_finite_r(what: &'static str, x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// Unitary forward DFT.
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::Empty { what: "dft" });
    }
    check_finite_c("dft", x)?;
    let mut buf = x.to_vec();
    unitary_in_place(&mut buf, false);
    Ok(buf)
}

/// Unitary forward DFT of a real sequence.
pub fn dft_real(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::Empty { what: "dft" });
    }
    check_finite_r("dft", x)?;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    unitary_in_place(&mut buf, false);
    Ok(buf)
}

/// Unitary inverse DFT.
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::Empty { what: "idft" });
    }
    check_finite_c("idft", x)?;
    let mut buf = x.to_vec();
    unitary_in_place(&mut buf, true);
    Ok(buf)
}

/// Inverse DFT of a Hermitian spectrum, returning the real part.
///
/// Rejects spectra that are not Hermitian within [`HERMITIAN_TOL`].
pub fn idft_real(x: &[Complex64]) -> Result<Vec<f64>> {
    require_hermitian("idft_real", x)?;
    let mut buf = x.to_vec();
    unitary_in_place(&mut buf, true);
    Ok(buf.into_iter().map(|v| v.re).collect())
}

fn hermitian_deviation(x: &[Complex64]) -> (usize, f64) {
    let m = x.len();
    let half = m / 2;
    let mut worst = (0, 0.0);
    for k in 0..=half {
        let dev = if k == 0 || k == half {
            x[k].im.abs()
        } else {
            (x[m - k] - x[k].conj()).norm()
        };
        if dev > worst.1 {
            worst = (k, dev);
        }
    }
    worst
}

fn scale_of(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// True iff `x_{M-k} = conj(x_k)` and the DC and Nyquist bins are real.
pub fn hermitian_check(x: &[Complex64]) -> Result<bool> {
    if x.is_empty() {
        return Err(Error::Empty { what: "hermitian_check" });
    }
    if x.len() % 2 != 0 {
        return Err(Error::OddLength {
            what: "hermitian_check",
            len: x.len(),
        });
    }
    check_finite_c("hermitian_check", x)?;
    let (_, dev) = hermitian_deviation(x);
    Ok(dev <= HERMITIAN_TOL * scale_of(x).max(f64::MIN_POSITIVE))
}

fn require_hermitian(what: &'static str, x: &[Complex64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty { what });
    }
    if x.len() % 2 != 0 {
        return Err(Error::OddLength { what, len: x.len() });
    }
    check_finite_c(what, x)?;
    let (bin, deviation) = hermitian_deviation(x);
    if deviation > HERMITIAN_TOL * scale_of(x).max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian {
            what,
            bin,
            deviation,
        });
    }
    Ok(())
}

/// Appends zeros up to `target` samples.
pub fn zero_pad<T: Clone + Default>(x: &[T], target: usize) -> Result<Vec<T>> {
    if target < x.len() {
        return Err(Error::PadTooShort {
            len: x.len(),
            target,
        });
    }
    let mut out = x.to_vec();
    out.resize(target, T::default());
    Ok(out)
}

/// Band-limited interpolation of a Hermitian spectrum by an integer factor.
///
/// Zeros are inserted at the Nyquist fold and the Nyquist bin is split in
/// half between the two sides. The result is scaled by `sqrt(eta)` so that
/// every `eta`-th output sample equals the lattice sample of `idft(p)`.
/// `eta == 1` returns exactly the real part of `idft(p)`.
pub fn reconstruct(p: &[Complex64], eta: usize) -> Result<Vec<f64>> {
    if eta == 0 {
        return Err(invalid("eta", "oversampling factor must be >= 1"));
    }
    require_hermitian("reconstruct", p)?;
    if eta == 1 {
        let mut buf = p.to_vec();
        unitary_in_place(&mut buf, true);
        return Ok(buf.into_iter().map(|v| v.re).collect());
    }
    let m = p.len();
    let half = m / 2;
    let big = eta * m;
    let mut q = vec![Complex64::new(0.0, 0.0); big];
    q[..half].copy_from_slice(&p[..half]);
    q[half] = p[half] * 0.5;
    q[big - half] = p[half] * 0.5;
    q[big - half + 1..].copy_from_slice(&p[half + 1..]);
    unitary_in_place(&mut q, true);
    let gain = (eta as f64).sqrt();
    Ok(q.into_iter().map(|v| v.re * gain).collect())
}

/// Sum of squared magnitudes.
pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// The 2N-point lattice shared by every signal in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFields")]
pub struct ChannelGrid {
    n_half: usize,
    sample_rate_hz: f64,
    cp_len: usize,
}

#[derive(Deserialize)]
struct GridFields {
    n_half: usize,
    sample_rate_hz: f64,
    cp_len: usize,
}

impl TryFrom<GridFields> for ChannelGrid {
    type Error = Error;
    fn try_from(f: GridFields) -> Result<Self> {
        ChannelGrid::new(f.n_half, f.sample_rate_hz, f.cp_len)
    }
}

impl ChannelGrid {
    /// `n_half` is N (half the FFT size); the DFT length is 2N.
    pub fn new(n_half: usize, sample_rate_hz: f64, cp_len: usize) -> Result<Self> {
        if n_half == 0 {
            return Err(invalid("n_half", "must be >= 1"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid("sample_rate_hz", "must be positive and finite"));
        }
        Ok(Self {
            n_half,
            sample_rate_hz,
            cp_len,
        })
    }

    #[must_use]
    pub fn with_cp(self, cp_len: usize) -> Self {
        Self { cp_len, ..self }
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    /// DFT length 2N.
    pub fn n_bins(&self) -> usize {
        2 * self.n_half
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Occupied bandwidth `F_s / 2`.
    pub fn bandwidth_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.sample_rate_hz / self.n_bins() as f64
    }

    /// Samples per transmitted symbol, `2N + L_cp`.
    pub fn symbol_len(&self) -> usize {
        self.n_bins() + self.cp_len
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate_hz
    }

    /// Signed frequency of DFT bin `k` (bins above N are negative).
    pub fn bin_frequency_hz(&self, k: usize) -> f64 {
        let k = k % self.n_bins();
        let df = self.subcarrier_spacing_hz();
        if k <= self.n_half {
            k as f64 * df
        } else {
            (k as f64 - self.n_bins() as f64) * df
        }
    }

    /// Absolute frequency of bin `k`, i.e. the one-sided frequency it mirrors.
    pub fn one_sided_frequency_hz(&self, k: usize) -> f64 {
        self.bin_frequency_hz(k).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Direct O(M^2) unitary DFT, the independent route for `dft`/`idft`.
    fn dft_matrix(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let m = x.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        let norm = 1.0 / (m as f64).sqrt();
        (0..m)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(n, &v)| {
                        let ang = sign * 2.0 * PI * (k * n % m) as f64 / m as f64;
                        v * Complex64::from_polar(1.0, ang)
                    })
                    .sum::<Complex64>()
                    * norm
            })
            .collect()
    }

    fn pseudo(m: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..m).map(|_| Complex64::new(next(), next())).collect()
    }

    #[test]
    fn dft_matches_matrix_oracle() {
        for &m in &[1usize, 2, 3, 8, 12, 64, 100, 256] {
            let x = pseudo(m, m as u64);
            let fast = dft(&x).unwrap();
            let slow = dft_matrix(&x, false);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12, "m={m}");
            }
            let back = idft(&fast).unwrap();
            let slow_back = dft_matrix(&fast, true);
            for ((a, b), c) in back.iter().zip(&slow_back).zip(&x) {
                assert!((a - b).norm() < 1e-12 && (a - c).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_and_constant() {
        let m = 16;
        let mut d = vec![Complex64::new(0.0, 0.0); m];
        d[0] = Complex64::new(1.0, 0.0);
        let flat = dft(&d).unwrap();
        for v in &flat {
            assert!((v.re - 0.25).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
        let c = vec![Complex64::new(1.0, 0.0); m];
        let spike = dft(&c).unwrap();
        assert!((spike[0].re - 4.0).abs() < 1e-14);
        assert!(spike[1..].iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(dft(&[]), Err(Error::Empty { what: "dft" }));
        let bad = [Complex64::new(f64::NAN, 0.0)];
        assert!(matches!(dft(&bad), Err(Error::NonFinite { index: 0, .. })));
        assert!(matches!(
            hermitian_check(&pseudo(5, 1)),
            Err(Error::OddLength { len: 5, .. })
        ));
        assert!(matches!(zero_pad(&[1.0, 2.0], 1), Err(Error::PadTooShort { .. })));
    }

    #[test]
    fn hermitian_check_detects_asymmetry() {
        let x: Vec<f64> = (0..32).map(|n| ((n * n) % 7) as f64 - 3.0).collect();
        let mut spec = dft_real(&x).unwrap();
        assert!(hermitian_check(&spec).unwrap());
        spec[3] += Complex64::new(0.0, 1e-3);
        assert!(!hermitian_check(&spec).unwrap());
        assert!(matches!(
            idft_real(&spec),
            Err(Error::NotHermitian { bin: 3, .. })
        ));
    }

    #[test]
    fn reconstruct_eta_one_is_idft() {
        let x: Vec<f64> = (0..64).map(|n| (0.3 * n as f64).sin()).collect();
        let spec = dft_real(&x).unwrap();
        let rec = reconstruct(&spec, 1).unwrap();
        let direct: Vec<f64> = idft(&spec).unwrap().iter().map(|v| v.re).collect();
        assert_eq!(rec, direct);
    }

    #[test]
    fn reconstruct_matches_sinc_oracle() {
        // Periodic band-limited interpolation evaluated from the trigonometric
        // series, with the Nyquist term taken as a cosine.
        let m = 32usize;
        let eta = 4usize;
        let x: Vec<f64> = (0..m).map(|n| ((n * 5) % 11) as f64 - 5.0).collect();
        let spec = dft_real(&x).unwrap();
        let rec = reconstruct(&spec, eta).unwrap();
        assert_eq!(rec.len(), m * eta);
        let norm = 1.0 / (m as f64).sqrt();
        for (i, &r) in rec.iter().enumerate() {
            let t = i as f64 / eta as f64;
            let mut acc = spec[0].re;
            for k in 1..m / 2 {
                let w = 2.0 * PI * k as f64 * t / m as f64;
                acc += 2.0 * (spec[k] * Complex64::from_polar(1.0, w)).re;
            }
            acc += spec[m / 2].re * (PI * t).cos();
            assert!((r - acc * norm).abs() < 1e-10, "i={i}");
            if i % eta == 0 {
                assert!((r - x[i / eta]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn grid_geometry() {
        let g = ChannelGrid::new(128, 1.2e6, 30).unwrap();
        assert_eq!(g.n_bins(), 256);
        assert_eq!(g.symbol_len(), 286);
        assert!((g.subcarrier_spacing_hz() - 4687.5).abs() < 1e-12);
        assert!((g.bin_frequency_hz(255) + 4687.5).abs() < 1e-9);
        assert!((g.one_sided_frequency_hz(129) - 127.0 * 4687.5).abs() < 1e-9);
        assert!(ChannelGrid::new(0, 1.0, 0).is_err());
        assert!(ChannelGrid::new(4, -1.0, 0).is_err());
    }
}
