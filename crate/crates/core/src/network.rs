//! Tree-structured transmission-line networks and their sampled channels.
//!
//! A network is an undirected tree of RLGC segments with shunt loads at the
//! nodes. Any node can host a modem port; the tree is re-rooted at that port
//! for every evaluation, so the same model serves every PLM on a network.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{unitary_in_place, ChannelGrid};

/// Impedance that stands in for an open circuit.
pub const OPEN_OHMS: f64 = 1e12;

/// Default modem impedance.
pub const DEFAULT_Z_PLM: f64 = 50.0;

/// Fraction of impulse-response energy kept when truncating to `L_h`.
pub const DEFAULT_ENERGY_FRACTION: f64 = 0.9999;

const DC_FRACTION: f64 = 0.01;
const SINGULAR_REL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A per-unit-length line constant, optionally frequency dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUnit {
    Constant(f64),
    /// `dc + per_sqrt_hz * sqrt(f)`, the usual skin-effect form.
    Skin { dc: f64, per_sqrt_hz: f64 },
    /// Piecewise-linear in frequency, held constant outside the table.
    Table { points: Vec<(f64, f64)> },
}

impl PerUnit {
    pub fn at(&self, f: f64) -> f64 {
        match self {
            PerUnit::Constant(v) => *v,
            PerUnit::Skin { dc, per_sqrt_hz } => dc + per_sqrt_hz * f.max(0.0).sqrt(),
            PerUnit::Table { points } => interpolate(points, f),
        }
    }

    fn validate(&self, name: &'static str, strictly_positive: bool) -> Result<()> {
        let ok = |v: f64| v.is_finite() && if strictly_positive { v > 0.0 } else { v >= 0.0 };
        let good = match self {
            PerUnit::Constant(v) => ok(*v),
            PerUnit::Skin { dc, per_sqrt_hz } => ok(*dc) && per_sqrt_hz.is_finite() && *per_sqrt_hz >= 0.0,
            PerUnit::Table { points } => {
                !points.is_empty()
                    && points.iter().all(|&(f, v)| f.is_finite() && ok(v))
                    && points.windows(2).all(|w| w[0].0 < w[1].0)
            }
        };
        if good {
            Ok(())
        } else {
            Err(invalid(name, "must be finite and non-negative (L', C' strictly positive), tables sorted by frequency"))
        }
    }
}

fn interpolate(points: &[(f64, f64)], f: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if f <= first.0 {
        return first.1;
    }
    if f >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= f);
    let (f0, v0) = points[i - 1];
    let (f1, v1) = points[i];
    v0 + (v1 - v0) * (f - f0) / (f1 - f0)
}

/// RLGC constants of a two-conductor line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableParams {
    pub resistance_ohm_per_m: PerUnit,
    pub inductance_h_per_m: PerUnit,
    pub conductance_s_per_m: PerUnit,
    pub capacitance_f_per_m: PerUnit,
}

impl CableParams {
    pub fn constant(r: f64, l: f64, g: f64, cap: f64) -> Self {
        Self {
            resistance_ohm_per_m: PerUnit::Constant(r),
            inductance_h_per_m: PerUnit::Constant(l),
            conductance_s_per_m: PerUnit::Constant(g),
            capacitance_f_per_m: PerUnit::Constant(cap),
        }
    }

    pub fn lossless(l: f64, cap: f64) -> Self {
        Self::constant(0.0, l, 0.0, cap)
    }

    /// Underground LV cable, Z0 about 66.7 ohm and v_p about 1.5e8 m/s.
    pub fn lv_underground() -> Self {
        Self {
            resistance_ohm_per_m: PerUnit::Skin {
                dc: 2.06e-4,
                per_sqrt_hz: 2.5e-7,
            },
            inductance_h_per_m: PerUnit::Constant(0.4444e-6),
            conductance_s_per_m: PerUnit::Constant(0.0),
            capacitance_f_per_m: PerUnit::Constant(0.1e-9),
        }
    }

    /// Overhead MV line, Z0 = 400 ohm and v_p = 2.56e8 m/s.
    pub fn mv_overhead() -> Self {
        Self::constant(2e-3, 1.5625e-6, 0.0, 9.765625e-12)
    }

    pub fn validate(&self) -> Result<()> {
        self.resistance_ohm_per_m.validate("resistance_ohm_per_m", false)?;
        self.inductance_h_per_m.validate("inductance_h_per_m", true)?;
        self.conductance_s_per_m.validate("conductance_s_per_m", false)?;
        self.capacitance_f_per_m.validate("capacitance_f_per_m", true)
    }

    /// Propagation constant and characteristic impedance at `f` (Hz, > 0).
    pub fn propagation(&self, f: f64) -> (Complex64, Complex64) {
        let w = 2.0 * std::f64::consts::PI * f;
        let z = Complex64::new(self.resistance_ohm_per_m.at(f), w * self.inductance_h_per_m.at(f));
        let y = Complex64::new(self.conductance_s_per_m.at(f), w * self.capacitance_f_per_m.at(f));
        let gamma = (z * y).sqrt();
        (gamma, z / gamma)
    }

    pub fn phase_velocity(&self, f: f64) -> f64 {
        let (gamma, _) = self.propagation(f);
        2.0 * std::f64::consts::PI * f / gamma.im
    }

    pub fn characteristic_impedance(&self, f: f64) -> Complex64 {
        self.propagation(f).1
    }
}

/// Named cable presets usable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CablePreset {
    LvUnderground,
    MvOverhead,
}

impl CablePreset {
    pub fn params(self) -> CableParams {
        match self {
            CablePreset::LvUnderground => CableParams::lv_underground(),
            CablePreset::MvOverhead => CableParams::mv_overhead(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CableSpec {
    Preset(CablePreset),
    Custom(CableParams),
}

impl CableSpec {
    pub fn params(&self) -> CableParams {
        match self {
            CableSpec::Preset(p) => p.params(),
            CableSpec::Custom(c) => c.clone(),
        }
    }
}

/// A shunt load attached to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Load {
    Open,
    Short,
    /// Characteristic impedance of the single segment reaching this node.
    Matched,
    Resistor(f64),
    Impedance { re: f64, im: f64 },
    /// Series R-L-C; a missing capacitance means no capacitor.
    SeriesRlc {
        r_ohm: f64,
        l_h: f64,
        #[serde(default)]
        c_f: Option<f64>,
    },
}

impl Load {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Load::Open | Load::Short | Load::Matched => true,
            Load::Resistor(r) => r.is_finite() && *r >= 0.0,
            Load::Impedance { re, im } => re.is_finite() && im.is_finite() && *re >= 0.0,
            Load::SeriesRlc { r_ohm, l_h, c_f } => {
                r_ohm.is_finite()
                    && *r_ohm >= 0.0
                    && l_h.is_finite()
                    && *l_h >= 0.0
                    && c_f.map_or(true, |v| v.is_finite() && v > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Network(format!("load {self:?} is not passive or not finite")))
        }
    }

    /// Impedance at `f`; `None` for an open circuit.
    fn impedance(&self, f: f64, z0_adjacent: Complex64) -> Option<Complex64> {
        let w = 2.0 * std::f64::consts::PI * f;
        match self {
            Load::Open => None,
            Load::Short => Some(c(0.0)),
            Load::Matched => Some(z0_adjacent),
            Load::Resistor(r) => Some(c(*r)),
            Load::Impedance { re, im } => Some(Complex64::new(*re, *im)),
            Load::SeriesRlc { r_ohm, l_h, c_f } => {
                let xc = c_f.map_or(0.0, |cf| -1.0 / (w * cf));
                Some(Complex64::new(*r_ohm, w * l_h + xc))
            }
        }
    }
}

/// How modems that are not part of a link affect the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortLoading {
    /// Idle modems are high-impedance taps.
    #[default]
    Isolated,
    /// Every modem port is terminated in `Z_PLM` at all times.
    Loaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub branches: Vec<BranchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub length_m: f64,
    pub cable: CableSpec,
    pub node: NodeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub node: String,
}

fn default_z_plm() -> f64 {
    DEFAULT_Z_PLM
}

/// Nested description of a network as found in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default = "default_z_plm")]
    pub z_plm_ohm: f64,
    #[serde(default)]
    pub plm_loading: PortLoading,
    pub root: NodeSpec,
    pub ports: Vec<PortSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub a: usize,
    pub b: usize,
    pub length_m: f64,
    pub cable: CableParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub node: usize,
}

/// A validated tree network with its modem ports.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    ports: Vec<Port>,
    adjacency: Vec<Vec<(usize, usize)>>,
    z_plm: f64,
    loading: PortLoading,
}

/// Input impedance seen from a port, with a flag for clamped resonances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortImpedance {
    pub z: Complex64,
    pub near_singular: bool,
}

impl NetworkModel {
    pub fn new(
        nodes: Vec<Node>,
        segments: Vec<Segment>,
        ports: Vec<Port>,
        z_plm: f64,
        loading: PortLoading,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Network("network has no nodes".into()));
        }
        if !(z_plm.is_finite() && z_plm > 0.0) {
            return Err(invalid("z_plm_ohm", "must be positive and finite"));
        }
        let mut seen = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if seen.insert(n.name.as_str(), i).is_some() {
                return Err(Error::Network(format!("duplicate node name `{}`", n.name)));
            }
            for l in &n.loads {
                l.validate()?;
            }
        }
        if segments.len() + 1 != nodes.len() {
            return Err(Error::Network(format!(
                "a tree on {} nodes needs {} segments, got {}",
                nodes.len(),
                nodes.len() - 1,
                segments.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (s, seg) in segments.iter().enumerate() {
            if seg.a >= nodes.len() || seg.b >= nodes.len() || seg.a == seg.b {
                return Err(Error::Network(format!("segment {s} has invalid endpoints")));
            }
            if !(seg.length_m.is_finite() && seg.length_m >= 0.0) {
                return Err(invalid("length_m", format!("segment {s}: must be finite and >= 0")));
            }
            seg.cable.validate()?;
            adjacency[seg.a].push((s, seg.b));
            adjacency[seg.b].push((s, seg.a));
        }
        let mut visited = vec![false; nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(n) = queue.pop_front() {
            for &(_, m) in &adjacency[n] {
                if !visited[m] {
                    visited[m] = true;
                    queue.push_back(m);
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::Network("network is not connected (or contains a cycle)".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.loads.contains(&Load::Matched) && adjacency[i].len() != 1 {
                return Err(Error::Network(format!(
                    "matched load at `{}` needs exactly one adjacent segment",
                    n.name
                )));
            }
        }
        if ports.is_empty() {
            return Err(Error::Network("network has no ports".into()));
        }
        let mut port_names = HashMap::new();
        for p in &ports {
            if p.node >= nodes.len() {
                return Err(Error::Network(format!("port `{}` refers to a missing node", p.name)));
            }
            if port_names.insert(p.name.as_str(), ()).is_some() {
                return Err(Error::Network(format!("duplicate port name `{}`", p.name)));
            }
        }
        Ok(Self {
            nodes,
            segments,
            ports,
            adjacency,
            z_plm,
            loading,
        })
    }

    pub fn from_spec(spec: &NetworkSpec) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut segments = Vec::new();
        let mut stack = vec![(&spec.root, None::<(usize, &BranchSpec)>)];
        while let Some((node, parent)) = stack.pop() {
            let idx = nodes.len();
            nodes.push(Node {
                name: node.name.clone(),
                loads: node.loads.clone(),
            });
            if let Some((p, br)) = parent {
                segments.push(Segment {
                    a: p,
                    b: idx,
                    length_m: br.length_m,
                    cable: br.cable.params(),
                });
            }
            for br in node.branches.iter().rev() {
                stack.push((&br.node, Some((idx, br))));
            }
        }
        let mut ports = Vec::new();
        for p in &spec.ports {
            let node = nodes
                .iter()
                .position(|n| n.name == p.node)
                .ok_or_else(|| Error::Network(format!("port `{}` names unknown node `{}`", p.name, p.node)))?;
            ports.push(Port {
                name: p.name.clone(),
                node,
            });
        }
        Self::new(nodes, segments, ports, spec.z_plm_ohm, spec.plm_loading)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn z_plm(&self) -> f64 {
        self.z_plm
    }

    pub fn loading(&self) -> PortLoading {
        self.loading
    }

    #[must_use]
    pub fn with_loading(mut self, loading: PortLoading) -> Self {
        self.loading = loading;
        self
    }

    fn port(&self, index: usize) -> Result<&Port> {
        self.ports
            .get(index)
            .ok_or_else(|| invalid("port", format!("index {index} out of range ({} ports)", self.ports.len())))
    }

    /// Number of extra `Z_PLM` shunts per node for a link between `active` ports.
    fn shunt_counts(&self, active: &[usize], terminated: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.nodes.len()];
        for &t in terminated {
            counts[self.ports[t].node] += 1;
        }
        if self.loading == PortLoading::Loaded {
            for (i, p) in self.ports.iter().enumerate() {
                if !active.contains(&i) && !terminated.contains(&i) {
                    counts[p.node] += 1;
                }
            }
        }
        counts
    }

    /// Impedance looking into `node` away from segment `from`.
    fn z_looking(&self, node: usize, from: Option<usize>, f: f64, shunts: &[usize], flag: &mut bool) -> Complex64 {
        let mut admittance = c(shunts[node] as f64 / self.z_plm);
        for load in &self.nodes[node].loads {
            let z0 = if matches!(load, Load::Matched) {
                let (s, _) = self.adjacency[node][0];
                self.segments[s].cable.characteristic_impedance(f)
            } else {
                c(0.0)
            };
            match load.impedance(f, z0) {
                None => {}
                Some(z) if z.norm() == 0.0 => return c(0.0),
                Some(z) => admittance += z.inv(),
            }
        }
        for &(s, next) in &self.adjacency[node] {
            if Some(s) == from {
                continue;
            }
            let zl = self.z_looking(next, Some(s), f, shunts, flag);
            let z = transform(&self.segments[s], zl, f, flag);
            if z.norm() == 0.0 {
                return c(0.0);
            }
            admittance += z.inv();
        }
        if admittance.norm() <= 1.0 / OPEN_OHMS {
            c(OPEN_OHMS)
        } else {
            admittance.inv()
        }
    }

    /// Impedance seen by the modem at `port` looking into the network.
    pub fn input_impedance(&self, port: usize, f: f64) -> Result<PortImpedance> {
        if !(f.is_finite() && f > 0.0) {
            return Err(invalid("frequency", "must be positive and finite"));
        }
        self.port(port)?;
        let shunts = self.shunt_counts(&[port], &[]);
        Ok(self.impedance_with(port, f, &shunts))
    }

    fn impedance_with(&self, port: usize, f: f64, shunts: &[usize]) -> PortImpedance {
        let mut near_singular = false;
        let z = self.z_looking(self.ports[port].node, None, f, shunts, &mut near_singular);
        PortImpedance { z, near_singular }
    }

    /// Reflection coefficient against `Z_PLM` at `port`.
    pub fn reflection_coefficient(&self, port: usize, f: f64) -> Result<(Complex64, bool)> {
        let pz = self.input_impedance(port, f)?;
        let zp = c(self.z_plm);
        Ok(((pz.z - zp) / (pz.z + zp), pz.near_singular))
    }

    /// `S21` from `a` to `b`: `2 V_b / E_a` with `Z_PLM` at both ends.
    pub fn transfer_coefficient(&self, a: usize, b: usize, f: f64) -> Result<(Complex64, bool)> {
        if !(f.is_finite() && f > 0.0) {
            return Err(invalid("frequency", "must be positive and finite"));
        }
        self.port(a)?;
        self.port(b)?;
        if a == b {
            return Err(invalid("port", "transfer needs two distinct ports"));
        }
        let shunts = self.shunt_counts(&[a, b], &[b]);
        let mut flag = false;
        let na = self.ports[a].node;
        let nb = self.ports[b].node;
        let zin = self.z_looking(na, None, f, &shunts, &mut flag);
        let zp = c(self.z_plm);
        let mut v = zin / (zin + zp);
        for (s, child) in self.path(na, nb) {
            let seg = &self.segments[s];
            let zc = self.z_looking(child, Some(s), f, &shunts, &mut flag);
            let (gamma, z0) = seg.cable.propagation(f);
            let g = (zc - z0) / (zc + z0);
            let e1 = (-gamma * seg.length_m).exp();
            let den = c(1.0) + g * e1 * e1;
            if den.norm() < SINGULAR_REL {
                flag = true;
            }
            v *= (c(1.0) + g) * e1 / den;
        }
        Ok((v * 2.0, flag))
    }

    /// Segments from `from` to `to`, each paired with its far node.
    fn path(&self, from: usize, to: usize) -> Vec<(usize, usize)> {
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        let mut seen = vec![false; self.nodes.len()];
        seen[from] = true;
        while let Some(n) = queue.pop_front() {
            if n == to {
                break;
            }
            for &(s, m) in &self.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    prev[m] = Some((s, n));
                    queue.push_back(m);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = to;
        while let Some((s, p)) = prev[cur] {
            out.push((s, cur));
            cur = p;
        }
        out.reverse();
        out
    }
}

/// Input impedance of a segment terminated in `zl`.
///
/// Written with `e^{-2 gamma d}` so long lossy lines do not overflow.
fn transform(seg: &Segment, zl: Complex64, f: f64, flag: &mut bool) -> Complex64 {
    if seg.length_m == 0.0 {
        return zl;
    }
    let (gamma, z0) = seg.cable.propagation(f);
    let e = (-gamma * (2.0 * seg.length_m)).exp();
    let num = zl * (c(1.0) + e) + z0 * (c(1.0) - e);
    let den = z0 * (c(1.0) + e) + zl * (c(1.0) - e);
    if den.norm() < SINGULAR_REL * z0.norm() {
        *flag = true;
        return c(OPEN_OHMS);
    }
    z0 * num / den
}

/// A sampled, Hermitian channel on a [`ChannelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    pub grid: ChannelGrid,
    /// Physical coefficient sampled on all 2N bins (passive: `|gamma| <= 1`).
    pub gamma: Vec<Complex64>,
    /// `H = W [h; 0]`, the DFT of the truncated impulse response.
    pub freq_response: Vec<Complex64>,
    /// The first `L_h` taps of `h = W^{-1} gamma`.
    pub impulse_response: Vec<f64>,
    pub near_singular_bins: Vec<usize>,
    /// `None` for a time-invariant network.
    pub coherence_time_s: Option<f64>,
}

pub type ReflectionChannel = ChannelResponse;

impl ChannelResponse {
    pub fn channel_len(&self) -> usize {
        self.impulse_response.len()
    }

    /// Builds a channel from one-sided samples at bins `0..=N`.
    ///
    /// DC and Nyquist samples keep only their real part so the result is the
    /// spectrum of a real impulse response.
    pub fn from_one_sided(
        grid: ChannelGrid,
        one_sided: &[Complex64],
        energy_fraction: f64,
        near_singular_bins: Vec<usize>,
    ) -> Result<Self> {
        let n = grid.n_half();
        if one_sided.len() != n + 1 {
            return Err(Error::LengthMismatch {
                what: "one-sided channel",
                expected: n + 1,
                got: one_sided.len(),
            });
        }
        if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
            return Err(invalid("energy_fraction", "must lie in (0, 1]"));
        }
        crate::spectral::check_finite_c("channel", one_sided)?;
        let m = grid.n_bins();
        let mut gamma = vec![c(0.0); m];
        for (k, &v) in one_sided.iter().enumerate() {
            gamma[k] = v;
        }
        gamma[0] = c(gamma[0].re);
        gamma[n] = c(gamma[n].re);
        for k in 1..n {
            gamma[m - k] = gamma[k].conj();
        }
        let mut buf = gamma.clone();
        unitary_in_place(&mut buf, true);
        let scale = 1.0 / (m as f64).sqrt();
        let h_full: Vec<f64> = buf.iter().map(|v| v.re * scale).collect();
        let len = energy_prefix(&h_full, energy_fraction);
        let impulse_response = h_full[..len].to_vec();
        let freq_response = spectrum_of_taps(&impulse_response, m);
        Ok(Self {
            grid,
            gamma,
            freq_response,
            impulse_response,
            near_singular_bins,
            coherence_time_s: None,
        })
    }
}

/// `W_M [h; 0]` with the non-unitary DFT matrix.
pub fn spectrum_of_taps(h: &[f64], m: usize) -> Vec<Complex64> {
    let mut buf = vec![c(0.0); m];
    for (b, &v) in buf.iter_mut().zip(h) {
        *b = c(v);
    }
    unitary_in_place(&mut buf, false);
    let scale = (m as f64).sqrt();
    buf.iter().map(|v| v * scale).collect()
}

/// Smallest prefix length holding `fraction` of the total energy (at least 1).
pub fn energy_prefix(h: &[f64], fraction: f64) -> usize {
    let total: f64 = h.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 1;
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (i, v) in h.iter().enumerate() {
        acc += v * v;
        if acc >= target * (1.0 - 1e-15) {
            return i + 1;
        }
    }
    h.len()
}

fn sample_frequencies(grid: &ChannelGrid) -> Vec<f64> {
    let df = grid.subcarrier_spacing_hz();
    (0..=grid.n_half())
        .map(|k| if k == 0 { df * DC_FRACTION } else { k as f64 * df })
        .collect()
}

/// Reflection channel seen by the modem at `port`.
pub fn reflection_channel(net: &NetworkModel, port: usize, grid: &ChannelGrid) -> Result<ReflectionChannel> {
    reflection_channel_with(net, port, grid, DEFAULT_ENERGY_FRACTION)
}

pub fn reflection_channel_with(
    net: &NetworkModel,
    port: usize,
    grid: &ChannelGrid,
    energy_fraction: f64,
) -> Result<ReflectionChannel> {
    let mut samples = Vec::with_capacity(grid.n_half() + 1);
    let mut singular = Vec::new();
    for (k, f) in sample_frequencies(grid).into_iter().enumerate() {
        let (g, flag) = net.reflection_coefficient(port, f)?;
        if flag {
            singular.push(k);
        }
        samples.push(g);
    }
    ChannelResponse::from_one_sided(*grid, &samples, energy_fraction, singular)
}

/// Transfer channel (`S21`) from port `a` to port `b`.
pub fn transfer_channel(net: &NetworkModel, a: usize, b: usize, grid: &ChannelGrid) -> Result<ChannelResponse> {
    let mut samples = Vec::with_capacity(grid.n_half() + 1);
    let mut singular = Vec::new();
    for (k, f) in sample_frequencies(grid).into_iter().enumerate() {
        let (t, flag) = net.transfer_coefficient(a, b, f)?;
        if flag {
            singular.push(k);
        }
        samples.push(t);
    }
    ChannelResponse::from_one_sided(*grid, &samples, DEFAULT_ENERGY_FRACTION, singular)
}
