//! Several modems sharing one network: TDMA, interleaved FDMA and CDMA.

use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{sinr_from_powers, validate_params};
use crate::network::{reflection_channel, transfer_channel, ChannelResponse, NetworkModel};
use crate::reflectogram::{channel_estimate, pulse_compression, Method};
use crate::spectral::{check_finite_c, hermitian_check, unitary_in_place, ChannelGrid};
use crate::txrx::{draw_noise, place_symbols, power, random_symbols, substream, ActiveSet, ChannelPath, Constellation, HsOfdmFrame, NoiseModel};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Tdma,
    Fdma,
    Cdma,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Tdma, Scheme::Fdma, Scheme::Cdma];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Tdma => "TDMA",
            Scheme::Fdma => "FDMA",
            Scheme::Cdma => "CDMA",
        }
    }
}

/// Interleaved comb `{u, u + N_PLM, ...}` over `Ddot` indices `0..N`.
pub fn fdma_allocate(u: usize, n_plm: usize, n_half: usize) -> Result<Vec<usize>> {
    if n_plm == 0 || n_half == 0 {
        return Err(invalid("n_plm", "N_PLM and N must be >= 1"));
    }
    if n_half % n_plm != 0 {
        return Err(invalid(
            "n_plm",
            format!("N_PLM = {n_plm} does not divide N = {n_half}; pick a divisor of N (e.g. a power of two)"),
        ));
    }
    if u >= n_plm {
        return Err(invalid("u", format!("PLM index {u} must be below N_PLM = {n_plm}")));
    }
    Ok((u..n_half).step_by(n_plm).collect())
}

/// One-sided fold of a Hermitian 2N spectrum: `P_0`, `2 P_1 .. 2 P_{N-1}`, `P_N`.
pub fn fdma_fold(p: &[Complex64]) -> Result<Vec<Complex64>> {
    if !hermitian_check(p)? {
        return Err(Error::NotHermitian {
            what: "fdma_fold",
            bin: 0,
            deviation: f64::NAN,
        });
    }
    let n = p.len() / 2;
    Ok((0..=n).map(|k| if k == 0 || k == n { p[k] } else { p[k] * 2.0 }).collect())
}

/// Reflectogram of length `2N / N_PLM` from the folded spectrum on comb `comb`.
///
/// `N_PLM` is inferred as `N / |comb|`; the comb must have that stride.
pub fn fdma_reflectogram(p_dot: &[Complex64], comb: &[usize], n_half: usize) -> Result<Vec<f64>> {
    if p_dot.len() != n_half + 1 {
        return Err(Error::LengthMismatch {
            what: "folded reflectogram",
            expected: n_half + 1,
            got: p_dot.len(),
        });
    }
    check_finite_c("fdma_reflectogram", p_dot)?;
    if comb.is_empty() || n_half % comb.len() != 0 {
        return Err(invalid("comb", format!("{} bins cannot form a comb over N = {n_half}", comb.len())));
    }
    let n_plm = n_half / comb.len();
    let u = comb[0];
    if u >= n_plm || comb.iter().enumerate().any(|(i, &k)| k != u + i * n_plm) {
        return Err(invalid("comb", format!("not the stride-{n_plm} comb starting at {}", comb[0])));
    }
    let len = 2 * n_half / n_plm;
    let scale = 1.0 / (len as f64).sqrt();
    let w = std::f64::consts::PI / n_half as f64;
    Ok((0..len)
        .map(|n| {
            comb.iter()
                .map(|&k| {
                    let ang = w * ((k * n) % (2 * n_half)) as f64;
                    p_dot[k].re * ang.cos() - p_dot[k].im * ang.sin()
                })
                .sum::<f64>()
                * scale
        })
        .collect())
}

/// Sylvester Hadamard matrix of order `n` (a power of two).
pub fn hadamard(n: usize) -> Result<Vec<Vec<i8>>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid("n_plm", format!("Hadamard order {n} must be a power of two")));
    }
    let mut h = vec![vec![1i8]];
    while h.len() < n {
        let m = h.len();
        let mut next = vec![vec![0i8; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][j] = h[i][j];
                next[i][j + m] = h[i][j];
                next[i + m][j] = h[i][j];
                next[i + m][j + m] = -h[i][j];
            }
        }
        h = next;
    }
    Ok(h)
}

/// Spread symbol matrix `C_u D^T`, one row per transmitted symbol.
pub fn cdma_encode(d: &[Complex64], code: &[i8]) -> Vec<Vec<Complex64>> {
    code.iter().map(|&c| d.iter().map(|&v| v * f64::from(c)).collect()).collect()
}

/// `(C_u^T Y_C)^T / |C_u|`.
pub fn cdma_decode(rows: &[Vec<Complex64>], code: &[i8]) -> Result<Vec<Complex64>> {
    if rows.len() != code.len() || code.is_empty() {
        return Err(Error::LengthMismatch {
            what: "cdma rows",
            expected: code.len(),
            got: rows.len(),
        });
    }
    let len = rows[0].len();
    if rows.iter().any(|r| r.len() != len) {
        return Err(invalid("rows", "rows differ in length"));
    }
    let card = code.iter().map(|&c| i32::from(c) * i32::from(c)).sum::<i32>() as f64;
    let mut out = vec![zero(); len];
    for (row, &c) in rows.iter().zip(code) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v * f64::from(c);
        }
    }
    for o in out.iter_mut() {
        *o /= card;
    }
    Ok(out)
}

/// Per-PLM measurement rates, in measurements per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub n_rho: f64,
    pub n_t: f64,
    pub n_meas: f64,
}

pub fn rates(scheme: Scheme, n_plm: usize, t_symb: f64) -> Result<RateReport> {
    if n_plm == 0 {
        return Err(invalid("n_plm", "must be >= 1"));
    }
    if !(t_symb.is_finite() && t_symb > 0.0) {
        return Err(invalid("t_symb", "must be positive and finite"));
    }
    let n = n_plm as f64;
    Ok(match scheme {
        Scheme::Tdma | Scheme::Cdma => RateReport {
            n_rho: 1.0 / (n * t_symb),
            n_t: (n - 1.0) / (n * t_symb),
            n_meas: 1.0 / t_symb,
        },
        Scheme::Fdma => RateReport {
            n_rho: 1.0 / t_symb,
            n_t: (n - 1.0) / t_symb,
            n_meas: n / t_symb,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    Slot(usize),
    Comb(Vec<usize>),
    Code(Vec<i8>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccessPlan {
    pub scheme: Scheme,
    pub n_plm: usize,
    pub assignments: Vec<Assignment>,
    pub t_symb: f64,
}

impl AccessPlan {
    /// Round-robin slots, combs anchored at the first active bin, or Hadamard rows.
    ///
    /// FDMA gives PLM `u` the comb with offset `(k_first + u) mod N_PLM`, so a
    /// higher index always owns higher frequencies within the active band.
    pub fn new(scheme: Scheme, n_plm: usize, grid: &ChannelGrid, active: &ActiveSet) -> Result<Self> {
        Self::with_slots(scheme, n_plm, grid, active, None)
    }

    pub fn with_slots(
        scheme: Scheme,
        n_plm: usize,
        grid: &ChannelGrid,
        active: &ActiveSet,
        slots: Option<&[usize]>,
    ) -> Result<Self> {
        if n_plm == 0 {
            return Err(invalid("n_plm", "must be >= 1"));
        }
        let assignments = match scheme {
            Scheme::Tdma => {
                let order: Vec<usize> = slots.map_or_else(|| (0..n_plm).collect(), <[usize]>::to_vec);
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..n_plm).collect::<Vec<_>>() {
                    return Err(invalid("slots", "TDMA slots must be a permutation of 0..N_PLM"));
                }
                order.into_iter().map(Assignment::Slot).collect()
            }
            Scheme::Fdma => {
                let first = active.bins()[0];
                (0..n_plm)
                    .map(|u| fdma_allocate((first + u) % n_plm, n_plm, grid.n_half()).map(Assignment::Comb))
                    .collect::<Result<_>>()?
            }
            Scheme::Cdma => hadamard(n_plm)?.into_iter().map(Assignment::Code).collect(),
        };
        Ok(Self {
            scheme,
            n_plm,
            assignments,
            t_symb: grid.symbol_duration(),
        })
    }

    pub fn rates(&self) -> Result<RateReport> {
        rates(self.scheme, self.n_plm, self.t_symb)
    }
}

/// Reflection channel of each PLM and transfer channel of each ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub reflection: Vec<ChannelResponse>,
    /// `transfer[a][b]`, `None` on the diagonal.
    pub transfer: Vec<Vec<Option<ChannelResponse>>>,
}

impl ChannelMatrix {
    pub fn build(net: &NetworkModel, ports: &[usize], grid: &ChannelGrid) -> Result<Self> {
        let reflection = ports
            .iter()
            .map(|&p| reflection_channel(net, p, grid))
            .collect::<Result<Vec<_>>>()?;
        let mut transfer = vec![vec![None; ports.len()]; ports.len()];
        for a in 0..ports.len() {
            for b in 0..ports.len() {
                if a != b {
                    transfer[a][b] = Some(transfer_channel(net, ports[a], ports[b], grid)?);
                }
            }
        }
        Ok(Self { reflection, transfer })
    }

    /// Channel from transmitter `from` to receiver `to`.
    pub fn link(&self, from: usize, to: usize) -> &ChannelResponse {
        if from == to {
            &self.reflection[from]
        } else {
            self.transfer[from][to].as_ref().expect("off-diagonal transfer")
        }
    }

    pub fn max_channel_len(&self) -> usize {
        self.reflection
            .iter()
            .chain(self.transfer.iter().flatten().flatten())
            .map(ChannelResponse::channel_len)
            .max()
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scheme: Scheme,
    pub n_plm: usize,
    pub grid: ChannelGrid,
    pub active: ActiveSet,
    pub constellation: Constellation,
    pub method: Method,
    pub tx_psd_dbm_hz: f64,
    pub noise: NoiseModel,
    pub duration_s: f64,
    pub seed: u64,
    pub path: ChannelPath,
    /// Individual reflectograms kept per PLM besides the running mean.
    pub keep_reflectograms: usize,
    pub record_transferograms: bool,
    pub slots: Option<Vec<usize>>,
    /// Range the deployment must cover, checked per PLM when given.
    pub target_range_m: Option<f64>,
    pub phase_velocity_mps: Option<f64>,
    pub alpha: f64,
}

impl CampaignConfig {
    /// QPSK channel estimation at the MV transmit PSD for one round of `n_plm` symbols.
    pub fn new(scheme: Scheme, n_plm: usize, grid: ChannelGrid, active: ActiveSet) -> Self {
        Self {
            scheme,
            n_plm,
            duration_s: n_plm as f64 * grid.symbol_duration(),
            grid,
            active,
            constellation: Constellation::Qpsk,
            method: Method::ChannelEstimation,
            tx_psd_dbm_hz: crate::presets::MV_TX_PSD_DBM_HZ,
            noise: NoiseModel::default(),
            seed: 0,
            path: ChannelPath::Auto,
            keep_reflectograms: 0,
            record_transferograms: true,
            slots: None,
            target_range_m: None,
            phase_velocity_mps: None,
            alpha: 0.9,
        }
    }

    #[must_use]
    pub fn with_symbols(mut self, symbols: usize) -> Self {
        self.duration_s = symbols as f64 * self.grid.symbol_duration();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlmResult {
    pub port: String,
    pub reflectograms: usize,
    pub transferograms: usize,
    /// Running mean of the reflectograms on the `T_s` lattice.
    pub mean_reflectogram: Vec<f64>,
    pub kept: Vec<Vec<f64>>,
    /// Processed spectrum of the first reflectogram.
    #[serde(skip)]
    pub first_spectrum: Vec<Complex64>,
    pub measurement_bins: usize,
    pub signal_power_mw: f64,
    pub noise_power_mw: f64,
    pub interference_power_mw: f64,
    pub sinr_db: f64,
    /// Expected-value SINR with the decoded noise PSD reduced by `sqrt(N_PLM)` for CDMA.
    pub analytic_sinr_db: f64,
    /// CDMA: decoded over raw noise power per received symbol (1/N_PLM expected).
    pub decoded_noise_ratio: Option<f64>,
    pub allocated_power_dbm: f64,
    pub budget_power_dbm: f64,
    pub channel_len: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResult {
    pub scheme: Scheme,
    pub n_plm: usize,
    pub periods: usize,
    pub t_symb: f64,
    pub path: ChannelPath,
    pub rates: RateReport,
    pub measured_rates: RateReport,
    pub plan: AccessPlan,
    pub plms: Vec<PlmResult>,
    pub warnings: Vec<String>,
}

/// Transmitter state for one period.
struct Tx {
    spectrum: Vec<Complex64>,
    transmitted: Vec<f64>,
}

/// Received components at one PLM for one period.
struct Rx {
    own: Vec<Complex64>,
    interference: Vec<Complex64>,
    noise: Vec<Complex64>,
}

impl Rx {
    fn total(&self) -> Vec<Complex64> {
        self.own
            .iter()
            .zip(&self.interference)
            .zip(&self.noise)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Pushes every transmitter through every link, by spectrum or by stream.
struct Propagator {
    time: bool,
    n_bins: usize,
    cp: usize,
    sym: usize,
    fft_len: usize,
    /// `freq[w][u]`: DFT of link taps on the 2N grid (frequency path) or the
    /// FFT grid (time path), non-unitary.
    freq: Vec<Vec<Vec<Complex64>>>,
}

impl Propagator {
    fn new(channels: &ChannelMatrix, grid: &ChannelGrid, time: bool) -> Self {
        let n = channels.reflection.len();
        let sym = grid.symbol_len();
        let fft_len = (2 * sym + channels.max_channel_len()).next_power_of_two();
        let freq = (0..n)
            .map(|w| {
                (0..n)
                    .map(|u| {
                        let link = channels.link(w, u);
                        if time {
                            crate::network::spectrum_of_taps(&link.impulse_response, fft_len)
                        } else {
                            link.freq_response.clone()
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            time,
            n_bins: grid.n_bins(),
            cp: grid.cp_len(),
            sym,
            fft_len,
            freq,
        }
    }

    /// Own and interference spectra at each receiver.
    fn propagate(&self, prev: &[Option<Tx>], cur: &[Option<Tx>]) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
        let n = cur.len();
        if !self.time {
            return (0..n)
                .map(|u| {
                    let mut own = vec![zero(); self.n_bins];
                    let mut other = vec![zero(); self.n_bins];
                    for (w, tx) in cur.iter().enumerate() {
                        if let Some(tx) = tx {
                            let acc = if w == u { &mut own } else { &mut other };
                            for ((a, x), h) in acc.iter_mut().zip(&tx.spectrum).zip(&self.freq[w][u]) {
                                *a += x * h;
                            }
                        }
                    }
                    (own, other)
                })
                .collect();
        }
        let streams: Vec<Option<Vec<Complex64>>> = (0..n)
            .map(|w| {
                if prev[w].is_none() && cur[w].is_none() {
                    return None;
                }
                let mut buf = vec![zero(); self.fft_len];
                if let Some(p) = &prev[w] {
                    for (b, &v) in buf.iter_mut().zip(&p.transmitted) {
                        b.re = v;
                    }
                }
                if let Some(c) = &cur[w] {
                    for (b, &v) in buf[self.sym..].iter_mut().zip(&c.transmitted) {
                        b.re = v;
                    }
                }
                unitary_in_place(&mut buf, false);
                Some(buf)
            })
            .collect();
        (0..n)
            .map(|u| {
                let mut own = vec![zero(); self.fft_len];
                let mut other = vec![zero(); self.fft_len];
                for (w, s) in streams.iter().enumerate() {
                    if let Some(s) = s {
                        let acc = if w == u { &mut own } else { &mut other };
                        for ((a, x), h) in acc.iter_mut().zip(s).zip(&self.freq[w][u]) {
                            *a += x * h;
                        }
                    }
                }
                (self.window(own), self.window(other))
            })
            .collect()
    }

    fn window(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        unitary_in_place(&mut spec, true);
        let start = self.sym + self.cp;
        let mut body: Vec<Complex64> = spec[start..start + self.n_bins]
            .iter()
            .map(|v| Complex64::new(v.re, 0.0))
            .collect();
        unitary_in_place(&mut body, false);
        body
    }
}

struct Accumulator {
    count: usize,
    sum: Vec<f64>,
    kept: Vec<Vec<f64>>,
    first_spectrum: Vec<Complex64>,
    keep: usize,
    transferograms: usize,
    signal: f64,
    noise: f64,
    interference: f64,
    raw_noise: f64,
    decoded_noise: f64,
}

impl Accumulator {
    fn new(keep: usize) -> Self {
        Self {
            count: 0,
            sum: Vec::new(),
            kept: Vec::new(),
            first_spectrum: Vec::new(),
            keep,
            transferograms: 0,
            signal: 0.0,
            noise: 0.0,
            interference: 0.0,
            raw_noise: 0.0,
            decoded_noise: 0.0,
        }
    }

    fn push(&mut self, samples: Vec<f64>, spectrum: &[Complex64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; samples.len()];
            self.first_spectrum = spectrum.to_vec();
        }
        for (s, v) in self.sum.iter_mut().zip(&samples) {
            *s += v;
        }
        if self.kept.len() < self.keep {
            self.kept.push(samples);
        }
        self.count += 1;
    }

    fn account(&mut self, rx: &Rx, bins: &[usize]) {
        let pow = |v: &[Complex64]| bins.iter().map(|&k| v[k].norm_sqr()).sum::<f64>();
        self.signal += pow(&rx.own);
        self.noise += pow(&rx.noise);
        self.interference += pow(&rx.interference);
    }
}

fn mask_bins(active: &ActiveSet) -> Vec<usize> {
    active
        .two_sided_mask()
        .iter()
        .enumerate()
        .filter_map(|(k, &on)| on.then_some(k))
        .collect()
}

fn frame_for(rng: &mut ChaCha20Rng, cfg: &CampaignConfig, active: &ActiveSet, amplitude: f64) -> Result<HsOfdmFrame> {
    let symbols: Vec<Complex64> = random_symbols(rng, cfg.constellation, active.len())
        .into_iter()
        .map(|s| s * amplitude)
        .collect();
    HsOfdmFrame::from_subcarriers(place_symbols(&symbols, active)?, cfg.grid)
}

fn estimate(
    method: Method,
    frame: &HsOfdmFrame,
    y: &[Complex64],
    active: &ActiveSet,
    grid: &ChannelGrid,
) -> Result<crate::reflectogram::Reflectogram> {
    match method {
        Method::ChannelEstimation => channel_estimate(&frame.spectrum, y, active, grid),
        Method::PulseCompression => {
            let mut buf = y.to_vec();
            unitary_in_place(&mut buf, true);
            let body: Vec<f64> = buf.iter().map(|v| v.re).collect();
            pulse_compression(&frame.time, &body, grid)
        }
    }
}

/// Runs a multi-PLM measurement campaign on `net` with PLMs at `ports`.
pub fn run_campaign(cfg: &CampaignConfig, net: &NetworkModel, ports: &[usize]) -> Result<CampaignResult> {
    let n = cfg.n_plm;
    if ports.len() != n {
        return Err(Error::LengthMismatch {
            what: "PLM ports",
            expected: n,
            got: ports.len(),
        });
    }
    if cfg.active.n_half() != cfg.grid.n_half() {
        return Err(invalid("active_set", "built for a different N"));
    }
    if cfg.scheme != Scheme::Tdma && cfg.method != Method::ChannelEstimation {
        return Err(invalid("method", "FDMA and CDMA campaigns use channel estimation"));
    }
    if !(cfg.duration_s.is_finite() && cfg.duration_s > 0.0) {
        return Err(invalid("duration_s", "must be positive and finite"));
    }
    let plan = AccessPlan::with_slots(cfg.scheme, n, &cfg.grid, &cfg.active, cfg.slots.as_deref())?;
    let t_symb = cfg.grid.symbol_duration();
    let mut periods = (cfg.duration_s / t_symb * (1.0 + 1e-12)).floor() as usize;
    if cfg.scheme == Scheme::Cdma {
        periods -= periods % n;
    }
    if periods == 0 {
        return Err(invalid("duration_s", "shorter than one measurement"));
    }

    let channels = ChannelMatrix::build(net, ports, &cfg.grid)?;
    let path = cfg.path.resolve(cfg.grid.cp_len(), channels.max_channel_len());
    let prop = Propagator::new(&channels, &cfg.grid, path == ChannelPath::Time);
    let amplitude = power::bin_amplitude(cfg.tx_psd_dbm_hz, &cfg.grid);
    let variances = cfg.noise.bin_variances(&cfg.grid);

    let own_active: Vec<ActiveSet> = plan
        .assignments
        .iter()
        .map(|a| match a {
            Assignment::Comb(comb) => cfg.active.intersect(comb),
            _ => Ok(cfg.active.clone()),
        })
        .collect::<Result<_>>()?;
    let own_bins: Vec<Vec<usize>> = own_active.iter().map(mask_bins).collect();

    let mut warnings = Vec::new();
    if path == ChannelPath::Frequency && cfg.grid.cp_len() < channels.max_channel_len() {
        warnings.push(format!(
            "cyclic prefix {} shorter than channel length {}: frequency path ignores ISI",
            cfg.grid.cp_len(),
            channels.max_channel_len()
        ));
    }

    let mut payload_rng: Vec<ChaCha20Rng> = (0..n).map(|u| substream(cfg.seed, 2 * u as u64)).collect();
    let mut noise_rng: Vec<ChaCha20Rng> = (0..n).map(|u| substream(cfg.seed, 2 * u as u64 + 1)).collect();
    let mut acc: Vec<Accumulator> = (0..n).map(|_| Accumulator::new(cfg.keep_reflectograms)).collect();

    let codes: Vec<&[i8]> = plan
        .assignments
        .iter()
        .filter_map(|a| match a {
            Assignment::Code(c) => Some(c.as_slice()),
            _ => None,
        })
        .collect();
    let slot_owner: Vec<usize> = {
        let mut owner = vec![0; n];
        for (u, a) in plan.assignments.iter().enumerate() {
            if let Assignment::Slot(s) = a {
                owner[*s] = u;
            }
        }
        owner
    };

    let mut prev: Vec<Option<Tx>> = (0..n).map(|_| None).collect();
    let mut frames: Vec<Option<HsOfdmFrame>> = vec![None; n];
    // CDMA: decoded components per receiver, plus full rows for transferograms.
    let mut decoded: Vec<Rx> = Vec::new();
    let mut rows: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); n];

    for t in 0..periods {
        let mut cur: Vec<Option<Tx>> = (0..n).map(|_| None).collect();
        match cfg.scheme {
            Scheme::Tdma => {
                let v = slot_owner[t % n];
                let f = frame_for(&mut payload_rng[v], cfg, &cfg.active, amplitude)?;
                cur[v] = Some(Tx {
                    spectrum: f.spectrum.clone(),
                    transmitted: f.transmitted.clone(),
                });
                frames = vec![None; n];
                frames[v] = Some(f);
            }
            Scheme::Fdma => {
                for u in 0..n {
                    let f = frame_for(&mut payload_rng[u], cfg, &own_active[u], amplitude)?;
                    cur[u] = Some(Tx {
                        spectrum: f.spectrum.clone(),
                        transmitted: f.transmitted.clone(),
                    });
                    frames[u] = Some(f);
                }
            }
            Scheme::Cdma => {
                let r = t % n;
                if r == 0 {
                    for u in 0..n {
                        frames[u] = Some(frame_for(&mut payload_rng[u], cfg, &cfg.active, amplitude)?);
                    }
                    decoded = (0..n)
                        .map(|_| Rx {
                            own: vec![zero(); cfg.grid.n_bins()],
                            interference: vec![zero(); cfg.grid.n_bins()],
                            noise: vec![zero(); cfg.grid.n_bins()],
                        })
                        .collect();
                    rows = vec![Vec::new(); n];
                }
                for u in 0..n {
                    let f = frames[u].as_ref().expect("frame drawn at group start");
                    let c = f64::from(codes[u][r]);
                    cur[u] = Some(Tx {
                        spectrum: f.spectrum.iter().map(|v| v * c).collect(),
                        transmitted: f.transmitted.iter().map(|v| v * c).collect(),
                    });
                }
            }
        }

        let received = prop.propagate(&prev, &cur);
        for (u, (own, interference)) in received.into_iter().enumerate() {
            let rx = Rx {
                own,
                interference,
                noise: draw_noise(&variances, &mut noise_rng[u]),
            };
            match cfg.scheme {
                Scheme::Tdma => {
                    let v = slot_owner[t % n];
                    let f = frames[v].as_ref().expect("slot frame");
                    let y = rx.total();
                    if u == v {
                        let r = estimate(cfg.method, f, &y, &cfg.active, &cfg.grid)?;
                        acc[u].push(r.samples.clone(), &r.processed);
                        acc[u].account(&rx, &own_bins[u]);
                    } else if cfg.record_transferograms {
                        estimate(cfg.method, f, &y, &cfg.active, &cfg.grid)?;
                        acc[u].transferograms += 1;
                    }
                }
                Scheme::Fdma => {
                    let y = rx.total();
                    let f = frames[u].as_ref().expect("own frame");
                    let r = channel_estimate(&f.spectrum, &y, &own_active[u], &cfg.grid)?;
                    let Assignment::Comb(comb) = &plan.assignments[u] else { unreachable!() };
                    let rho = fdma_reflectogram(&fdma_fold(&r.processed)?, comb, cfg.grid.n_half())?;
                    acc[u].push(rho, &r.processed);
                    acc[u].account(&rx, &own_bins[u]);
                    if cfg.record_transferograms {
                        for v in (0..n).filter(|&v| v != u) {
                            let fv = frames[v].as_ref().expect("frame");
                            channel_estimate(&fv.spectrum, &y, &own_active[v], &cfg.grid)?;
                            acc[u].transferograms += 1;
                        }
                    }
                }
                Scheme::Cdma => {
                    let r = t % n;
                    let c = f64::from(codes[u][r]) / n as f64;
                    acc[u].raw_noise += own_bins[u].iter().map(|&k| rx.noise[k].norm_sqr()).sum::<f64>() / n as f64;
                    let d = &mut decoded[u];
                    for k in 0..cfg.grid.n_bins() {
                        d.own[k] += rx.own[k] * c;
                        d.interference[k] += rx.interference[k] * c;
                        d.noise[k] += rx.noise[k] * c;
                    }
                    rows[u].push(rx.total());
                    if r == n - 1 {
                        let f = frames[u].as_ref().expect("own frame");
                        let y = decoded[u].total();
                        let est = channel_estimate(&f.spectrum, &y, &cfg.active, &cfg.grid)?;
                        acc[u].push(est.samples.clone(), &est.processed);
                        let bins = own_bins[u].clone();
                        let pow = |v: &[Complex64]| bins.iter().map(|&k| v[k].norm_sqr()).sum::<f64>();
                        acc[u].decoded_noise += pow(&decoded[u].noise);
                        acc[u].account(&decoded[u], &own_bins[u]);
                        if cfg.record_transferograms {
                            for v in (0..n).filter(|&v| v != u) {
                                let yv = cdma_decode(&rows[u], codes[v])?;
                                let fv = frames[v].as_ref().expect("frame");
                                channel_estimate(&fv.spectrum, &yv, &cfg.active, &cfg.grid)?;
                                acc[u].transferograms += 1;
                            }
                        }
                    }
                }
            }
        }
        prev = cur;
    }

    let duration = periods as f64 * t_symb;
    let total_dbm = power::total_power_dbm(cfg.tx_psd_dbm_hz, cfg.active.len(), &cfg.grid);
    let mut plms = Vec::with_capacity(n);
    for (u, a) in acc.into_iter().enumerate() {
        let ch = &channels.reflection[u];
        let bins = &own_bins[u];
        let expected_signal: f64 = bins.iter().map(|&k| amplitude * amplitude * ch.freq_response[k].norm_sqr()).sum();
        let mut expected_noise: f64 = bins.iter().map(|&k| variances[k]).sum();
        if cfg.scheme == Scheme::Cdma {
            expected_noise /= (n as f64).sqrt();
        }
        let mut plm_warnings = Vec::new();
        if !ch.near_singular_bins.is_empty() {
            plm_warnings.push(format!("near-singular input impedance at bins {:?}", ch.near_singular_bins));
        }
        if cfg.grid.cp_len() < ch.channel_len() {
            plm_warnings.push(format!(
                "L_cp = {} < L_h = {}: inter-symbol interference",
                cfg.grid.cp_len(),
                ch.channel_len()
            ));
        }
        if let (Some(target), Some(vp)) = (cfg.target_range_m, cfg.phase_velocity_mps) {
            let report = validate_params(&cfg.grid, ch, target, vp, cfg.alpha)?;
            for c in report.constraints.iter().filter(|c| !c.satisfied) {
                plm_warnings.push(format!("constraint {} ({}) violated by {:.3}", c.name, c.description, -c.margin));
            }
            if cfg.scheme == Scheme::Fdma && report.coherence.bandwidth_hz < n as f64 * cfg.grid.subcarrier_spacing_hz() {
                plm_warnings.push("FDMA comb spacing exceeds the coherence bandwidth; reflectogram distorted".into());
            }
        }
        let count = a.count.max(1) as f64;
        let port = &net.ports()[ports[u]];
        plms.push(PlmResult {
            port: port.name.clone(),
            reflectograms: a.count,
            transferograms: a.transferograms,
            mean_reflectogram: a.sum.iter().map(|v| v / count).collect(),
            kept: a.kept,
            first_spectrum: a.first_spectrum,
            measurement_bins: bins.len(),
            signal_power_mw: a.signal,
            noise_power_mw: a.noise,
            interference_power_mw: a.interference,
            sinr_db: sinr_from_powers(a.signal, a.noise, a.interference),
            analytic_sinr_db: sinr_from_powers(expected_signal, expected_noise, 0.0),
            decoded_noise_ratio: (cfg.scheme == Scheme::Cdma && a.raw_noise > 0.0).then(|| a.decoded_noise / a.raw_noise),
            allocated_power_dbm: power::total_power_dbm(cfg.tx_psd_dbm_hz, own_active[u].len(), &cfg.grid),
            budget_power_dbm: if cfg.scheme == Scheme::Fdma {
                total_dbm - 10.0 * (n as f64).log10()
            } else {
                total_dbm
            },
            channel_len: ch.channel_len(),
            warnings: plm_warnings,
        });
    }
    let measured = {
        let p = &plms[0];
        RateReport {
            n_rho: p.reflectograms as f64 / duration,
            n_t: p.transferograms as f64 / duration,
            n_meas: (p.reflectograms + p.transferograms) as f64 / duration,
        }
    };
    Ok(CampaignResult {
        scheme: cfg.scheme,
        n_plm: n,
        periods,
        t_symb,
        path,
        rates: plan.rates()?,
        measured_rates: measured,
        plan,
        plms,
        warnings,
    })
}
