//! HS-OFDM symbol construction, noise and the channel itself.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::ChannelResponse;
use crate::spectral::{check_finite_c, unitary_in_place, ChannelGrid};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "bpsk")]
    Bpsk,
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
}

impl Constellation {
    pub const ALL: [Constellation; 3] = [Constellation::Bpsk, Constellation::Qpsk, Constellation::Psk8];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Bpsk => 1,
            Constellation::Qpsk => 2,
            Constellation::Psk8 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Bpsk => "BPSK",
            Constellation::Qpsk => "QPSK",
            Constellation::Psk8 => "8PSK",
        }
    }

    /// Unit-energy point for a Gray-coded bit label.
    pub fn point(self, label: usize) -> Complex64 {
        let m = 1usize << self.bits_per_symbol();
        let mut index = label % m;
        // Inverse Gray code: the label of angle index i is i ^ (i >> 1).
        let mut shift = index >> 1;
        while shift != 0 {
            index ^= shift;
            shift >>= 1;
        }
        let offset = if self == Constellation::Qpsk {
            std::f64::consts::FRAC_PI_4
        } else {
            0.0
        };
        Complex64::from_polar(1.0, offset + 2.0 * std::f64::consts::PI * index as f64 / m as f64)
    }

    pub fn points(self) -> Vec<Complex64> {
        (0..1usize << self.bits_per_symbol()).map(|l| self.point(l)).collect()
    }
}

/// Maps `n * bits_per_symbol` bits (MSB first per symbol) to `n` symbols.
pub fn modulate(bits: &[bool], constellation: Constellation, n: usize) -> Result<Vec<Complex64>> {
    let bps = constellation.bits_per_symbol();
    if bits.len() < n * bps {
        return Err(Error::LengthMismatch {
            what: "modulate bits",
            expected: n * bps,
            got: bits.len(),
        });
    }
    Ok(bits
        .chunks(bps)
        .take(n)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            constellation.point(label)
        })
        .collect())
}

/// `n` uniformly random constellation points.
pub fn random_symbols<R: Rng + ?Sized>(rng: &mut R, constellation: Constellation, n: usize) -> Vec<Complex64> {
    let m = 1usize << constellation.bits_per_symbol();
    (0..n).map(|_| constellation.point(rng.random_range(0..m))).collect()
}

/// Deterministic generator for stream `stream` of a run seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Set of one-sided subcarriers (indices into `Ddot`, `0..=N`) that carry data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    n_half: usize,
    bins: Vec<usize>,
}

impl ActiveSet {
    pub fn new(n_half: usize, mut bins: Vec<usize>) -> Result<Self> {
        bins.sort_unstable();
        bins.dedup();
        if bins.is_empty() {
            return Err(invalid("active_set", "no active subcarriers"));
        }
        if let Some(&k) = bins.iter().find(|&&k| k > n_half) {
            return Err(invalid("active_set", format!("bin {k} exceeds N = {n_half}")));
        }
        Ok(Self { n_half, bins })
    }

    /// Bins `first..=last`.
    pub fn range(n_half: usize, first: usize, last: usize) -> Result<Self> {
        if first > last {
            return Err(invalid("active_set", format!("empty range {first}..={last}")));
        }
        Self::new(n_half, (first..=last).collect())
    }

    /// Every bin from DC up to, but excluding, Nyquist.
    pub fn full(n_half: usize) -> Self {
        Self {
            n_half,
            bins: (0..n_half).collect(),
        }
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.bins.binary_search(&k).is_ok()
    }

    /// Mask over the 2N DFT bins, including the mirrored half.
    pub fn two_sided_mask(&self) -> Vec<bool> {
        let m = 2 * self.n_half;
        let mut mask = vec![false; m];
        for &k in &self.bins {
            mask[k % m] = true;
            mask[(m - k) % m] = true;
        }
        mask
    }

    /// Bins common to `self` and `other`.
    pub fn intersect(&self, other: &[usize]) -> Result<Self> {
        Self::new(self.n_half, self.bins.iter().copied().filter(|k| other.contains(k)).collect())
    }
}

/// Places one symbol per active bin into `Ddot` (length N+1).
///
/// DC and Nyquist must be real, so a symbol landing there is replaced by
/// the sign of its real part, keeping `|X_k|` constant across active bins.
pub fn place_symbols(symbols: &[Complex64], active: &ActiveSet) -> Result<Vec<Complex64>> {
    if symbols.len() != active.len() {
        return Err(Error::LengthMismatch {
            what: "symbols for active set",
            expected: active.len(),
            got: symbols.len(),
        });
    }
    let n = active.n_half();
    let mut d_dot = vec![zero(); n + 1];
    for (&k, &s) in active.bins().iter().zip(symbols) {
        d_dot[k] = if k == 0 || k == n {
            Complex64::new(if s.re >= 0.0 { s.norm() } else { -s.norm() }, 0.0)
        } else {
            s
        };
    }
    Ok(d_dot)
}

fn require_real_edges(d_dot: &[Complex64]) -> Result<()> {
    let n = d_dot.len() - 1;
    let scale = d_dot.iter().map(|v| v.norm()).fold(1.0, f64::max);
    for k in [0, n] {
        if d_dot[k].im.abs() > 1e-12 * scale {
            return Err(invalid("d_dot", format!("bin {k} must be real for a Hermitian spectrum")));
        }
    }
    Ok(())
}

/// `D_k = Ddot_{k+1}` for `k < N-1`, `D_{N-1} = Ddot_0 + j Ddot_N`.
pub fn premap(d_dot: &[Complex64]) -> Result<Vec<Complex64>> {
    if d_dot.len() < 2 {
        return Err(invalid("d_dot", "needs N + 1 >= 2 entries"));
    }
    check_finite_c("premap", d_dot)?;
    require_real_edges(d_dot)?;
    let n = d_dot.len() - 1;
    let mut d = d_dot[1..n].to_vec();
    d.push(Complex64::new(d_dot[0].re, d_dot[n].re));
    Ok(d)
}

/// Inverse of [`premap`].
pub fn unpremap(d: &[Complex64]) -> Result<Vec<Complex64>> {
    if d.is_empty() {
        return Err(Error::Empty { what: "unpremap" });
    }
    check_finite_c("unpremap", d)?;
    let n = d.len();
    let last = d[n - 1];
    let mut d_dot = Vec::with_capacity(n + 1);
    d_dot.push(Complex64::new(last.re, 0.0));
    d_dot.extend_from_slice(&d[..n - 1]);
    d_dot.push(Complex64::new(last.im, 0.0));
    Ok(d_dot)
}

/// Hermitian-symmetric 2N-bin spectrum from `Ddot` (length N+1).
pub fn hs_map(d_dot: &[Complex64]) -> Result<Vec<Complex64>> {
    if d_dot.len() < 2 {
        return Err(invalid("d_dot", "needs N + 1 >= 2 entries"));
    }
    check_finite_c("hs_map", d_dot)?;
    require_real_edges(d_dot)?;
    let n = d_dot.len() - 1;
    let mut x = vec![zero(); 2 * n];
    x[0] = Complex64::new(d_dot[0].re, 0.0);
    x[n] = Complex64::new(d_dot[n].re, 0.0);
    for k in 1..n {
        x[k] = d_dot[k];
        x[2 * n - k] = d_dot[k].conj();
    }
    Ok(x)
}

/// Prepends the last `cp_len` samples.
pub fn add_cp<T: Copy>(x: &[T], cp_len: usize) -> Result<Vec<T>> {
    if cp_len > x.len() {
        return Err(invalid("cp_len", format!("{cp_len} exceeds symbol length {}", x.len())));
    }
    let mut s = Vec::with_capacity(x.len() + cp_len);
    s.extend_from_slice(&x[x.len() - cp_len..]);
    s.extend_from_slice(x);
    Ok(s)
}

pub fn remove_cp<T: Copy>(s: &[T], cp_len: usize) -> Result<Vec<T>> {
    if cp_len > s.len() {
        return Err(invalid("cp_len", format!("{cp_len} exceeds received length {}", s.len())));
    }
    Ok(s[cp_len..].to_vec())
}

/// One transmitted HS-OFDM symbol in all of its representations.
#[derive(Debug, Clone, PartialEq)]
pub struct HsOfdmFrame {
    pub grid: ChannelGrid,
    /// One-sided subcarriers, length N+1.
    pub d_dot: Vec<Complex64>,
    /// Hermitian spectrum `X`, length 2N.
    pub spectrum: Vec<Complex64>,
    /// Real time-domain symbol `x`, length 2N.
    pub time: Vec<f64>,
    /// `x` with cyclic prefix, length 2N + L_cp.
    pub transmitted: Vec<f64>,
}

impl HsOfdmFrame {
    pub fn from_subcarriers(d_dot: Vec<Complex64>, grid: ChannelGrid) -> Result<Self> {
        if d_dot.len() != grid.n_half() + 1 {
            return Err(Error::LengthMismatch {
                what: "d_dot",
                expected: grid.n_half() + 1,
                got: d_dot.len(),
            });
        }
        let spectrum = hs_map(&d_dot)?;
        let mut buf = spectrum.clone();
        unitary_in_place(&mut buf, true);
        let time: Vec<f64> = buf.iter().map(|v| v.re).collect();
        let transmitted = add_cp(&time, grid.cp_len())?;
        Ok(Self {
            grid,
            d_dot,
            spectrum,
            time,
            transmitted,
        })
    }

    /// Frame carrying the payload `D` (length N).
    pub fn from_payload(d: &[Complex64], grid: ChannelGrid) -> Result<Self> {
        if d.len() != grid.n_half() {
            return Err(Error::LengthMismatch {
                what: "payload",
                expected: grid.n_half(),
                got: d.len(),
            });
        }
        Self::from_subcarriers(unpremap(d)?, grid)
    }

    /// Random PSK symbols of magnitude `amplitude` on every active bin.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        constellation: Constellation,
        active: &ActiveSet,
        grid: ChannelGrid,
        amplitude: f64,
    ) -> Result<Self> {
        if active.n_half() != grid.n_half() {
            return Err(invalid("active_set", "built for a different N"));
        }
        let symbols: Vec<Complex64> = random_symbols(rng, constellation, active.len())
            .into_iter()
            .map(|s| s * amplitude)
            .collect();
        Self::from_subcarriers(place_symbols(&symbols, active)?, grid)
    }

    pub fn payload(&self) -> Result<Vec<Complex64>> {
        premap(&self.d_dot)
    }

    /// Same frame with every subcarrier multiplied by `factor`.
    #[must_use]
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            d_dot: self.d_dot.iter().map(|v| v * factor).collect(),
            spectrum: self.spectrum.iter().map(|v| v * factor).collect(),
            time: self.time.iter().map(|v| v * factor).collect(),
            transmitted: self.transmitted.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Conversions between PSD levels and per-bin powers.
///
/// PSDs are given one-sided in dBm/Hz. A bin of the 2N-point unitary DFT
/// carries `S_two * 2N * df` with `S_two = S_one / 2`; this holds for both
/// transmitted and noise spectra, so per-bin SNR equals the one-sided ratio.
pub mod power {
    use crate::spectral::ChannelGrid;

    pub fn dbm_to_mw(dbm: f64) -> f64 {
        10f64.powf(dbm / 10.0)
    }

    pub fn mw_to_dbm(mw: f64) -> f64 {
        10.0 * mw.log10()
    }

    pub fn two_sided_mw_hz(one_sided_dbm_hz: f64) -> f64 {
        dbm_to_mw(one_sided_dbm_hz) / 2.0
    }

    /// Expected `|X_k|^2` (mW) of a bin at the given one-sided PSD.
    pub fn bin_power_mw(one_sided_dbm_hz: f64, grid: &ChannelGrid) -> f64 {
        two_sided_mw_hz(one_sided_dbm_hz) * grid.n_bins() as f64 * grid.subcarrier_spacing_hz()
    }

    /// Subcarrier magnitude for a flat PSK spectrum at the given PSD.
    pub fn bin_amplitude(one_sided_dbm_hz: f64, grid: &ChannelGrid) -> f64 {
        bin_power_mw(one_sided_dbm_hz, grid).sqrt()
    }

    /// Total power of `n_active` one-sided subcarriers, dBm.
    pub fn total_power_dbm(one_sided_dbm_hz: f64, n_active: usize, grid: &ChannelGrid) -> f64 {
        one_sided_dbm_hz + 10.0 * (n_active as f64 * grid.subcarrier_spacing_hz()).log10()
    }
}

/// One-sided noise PSD `floor + amplitude * exp(-decay * f / 1 kHz)` dBm/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisePsd {
    pub floor_dbm_hz: f64,
    pub amplitude_db: f64,
    pub decay_per_khz: f64,
}

impl Default for NoisePsd {
    fn default() -> Self {
        Self {
            floor_dbm_hz: -93.0,
            amplitude_db: 52.98,
            decay_per_khz: 0.0032,
        }
    }
}

impl NoisePsd {
    pub fn one_sided_dbm_hz(&self, f_hz: f64) -> f64 {
        self.floor_dbm_hz + self.amplitude_db * (-self.decay_per_khz * f_hz.abs() / 1e3).exp()
    }
}

/// Additive Gaussian noise, or none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default, flatten)]
    pub psd: NoisePsd,
}

fn yes() -> bool {
    true
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::colored(NoisePsd::default())
    }
}

impl NoiseModel {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            psd: NoisePsd::default(),
        }
    }

    pub fn colored(psd: NoisePsd) -> Self {
        Self { enabled: true, psd }
    }

    /// `E|V_k|^2` in mW for every DFT bin.
    pub fn bin_variances(&self, grid: &ChannelGrid) -> Vec<f64> {
        let m = grid.n_bins();
        if !self.enabled {
            return vec![0.0; m];
        }
        let scale = m as f64 * grid.subcarrier_spacing_hz();
        (0..m)
            .map(|k| power::two_sided_mw_hz(self.psd.one_sided_dbm_hz(grid.one_sided_frequency_hz(k))) * scale)
            .collect()
    }
}

/// Hermitian Gaussian noise spectrum with the given per-bin variances.
pub fn draw_noise<R: Rng + ?Sized>(variances: &[f64], rng: &mut R) -> Vec<Complex64> {
    let m = variances.len();
    let n = m / 2;
    let mut v = vec![zero(); m];
    if m == 0 {
        return v;
    }
    let mut gauss = || -> f64 { StandardNormal.sample(rng) };
    v[0] = Complex64::new(variances[0].sqrt() * gauss(), 0.0);
    if m % 2 == 0 && n > 0 {
        v[n] = Complex64::new(variances[n].sqrt() * gauss(), 0.0);
    }
    for k in 1..m.div_ceil(2) {
        let s = (variances[k] / 2.0).sqrt();
        v[k] = Complex64::new(s * gauss(), s * gauss());
        v[m - k] = v[k].conj();
    }
    v
}

/// How a symbol is pushed through the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPath {
    /// `Y = X (.) H + V`, exact only when the prefix covers the channel.
    Frequency,
    /// Linear convolution of the transmitted stream with `h`.
    Time,
    /// Time when `L_cp < L_h`, frequency otherwise.
    #[default]
    Auto,
}

impl ChannelPath {
    pub fn resolve(self, cp_len: usize, channel_len: usize) -> ChannelPath {
        match self {
            ChannelPath::Auto if cp_len < channel_len => ChannelPath::Time,
            ChannelPath::Auto => ChannelPath::Frequency,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    /// Received spectrum `Y` after prefix removal.
    pub spectrum: Vec<Complex64>,
    pub path: ChannelPath,
    /// Prefix shorter than the channel, so symbols interfere.
    pub isi: bool,
}

/// Linear convolution through the FFT.
pub fn linear_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let m = out_len.next_power_of_two();
    let mut fa = vec![zero(); m];
    let mut fb = vec![zero(); m];
    for (d, &v) in fa.iter_mut().zip(a) {
        d.re = v;
    }
    for (d, &v) in fb.iter_mut().zip(b) {
        d.re = v;
    }
    unitary_in_place(&mut fa, false);
    unitary_in_place(&mut fb, false);
    let gain = (m as f64).sqrt();
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y * gain;
    }
    unitary_in_place(&mut fa, true);
    fa.truncate(out_len);
    fa.into_iter().map(|v| v.re).collect()
}

/// Received symbol body when `prev` then `cur` (both with prefix) pass `h`.
pub fn receive_window(prev: Option<&[f64]>, cur: &[f64], h: &[f64], cp_len: usize, n_bins: usize) -> Vec<f64> {
    let sym = cur.len();
    let mut stream = vec![0.0; 2 * sym];
    if let Some(p) = prev {
        stream[sym - p.len().min(sym)..sym].copy_from_slice(&p[p.len().saturating_sub(sym)..]);
    }
    stream[sym..].copy_from_slice(cur);
    let start = sym + cp_len;
    let first = start.saturating_sub(h.len().saturating_sub(1));
    let r = linear_convolve(&stream[first..start + n_bins], h);
    r[start - first..start - first + n_bins].to_vec()
}

/// Passes `frame` through `ch` and adds the noise spectrum `noise`.
///
/// `prev` is the symbol sent just before on the same link; it only
/// matters on the time path when the prefix does not cover the channel.
pub fn channel_pass(
    frame: &HsOfdmFrame,
    ch: &ChannelResponse,
    noise: &[Complex64],
    path: ChannelPath,
    prev: Option<&HsOfdmFrame>,
) -> Result<Reception> {
    let m = frame.grid.n_bins();
    if ch.grid.n_bins() != m {
        return Err(Error::LengthMismatch {
            what: "channel bins",
            expected: m,
            got: ch.grid.n_bins(),
        });
    }
    if noise.len() != m {
        return Err(Error::LengthMismatch {
            what: "noise bins",
            expected: m,
            got: noise.len(),
        });
    }
    let cp = frame.grid.cp_len();
    let isi = cp < ch.channel_len();
    let path = path.resolve(cp, ch.channel_len());
    let mut y = match path {
        ChannelPath::Time => {
            let body = receive_window(
                prev.map(|p| p.transmitted.as_slice()),
                &frame.transmitted,
                &ch.impulse_response,
                cp,
                m,
            );
            let mut buf: Vec<Complex64> = body.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
            unitary_in_place(&mut buf, false);
            buf
        }
        _ => frame.spectrum.iter().zip(&ch.freq_response).map(|(x, h)| x * h).collect(),
    };
    for (a, v) in y.iter_mut().zip(noise) {
        *a += v;
    }
    Ok(Reception { spectrum: y, path, isi })
}
