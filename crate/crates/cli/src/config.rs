//! Scenario files: what to simulate and where to put the results.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hstdr_core::multiaccess::Scheme;
use hstdr_core::network::{NetworkModel, NetworkSpec, PortLoading};
use hstdr_core::presets::{self, CpChoice, Regulation};
use hstdr_core::reflectogram::Method;
use hstdr_core::txrx::{ActiveSet, ChannelPath, Constellation, NoiseModel};
use hstdr_core::ChannelGrid;
use serde::{Deserialize, Serialize};

/// A regulatory band plan or an explicit lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Band {
    Preset {
        regulation: Regulation,
        #[serde(default)]
        cp: CpChoice,
    },
    Custom {
        sample_rate_hz: f64,
        fft_size: usize,
        active_first: usize,
        active_last: usize,
        cp_len: usize,
    },
}

impl Default for Band {
    fn default() -> Self {
        Band::Preset {
            regulation: Regulation::Fcc,
            cp: CpChoice::Standard,
        }
    }
}

impl Band {
    pub fn resolve(&self) -> anyhow::Result<(ChannelGrid, ActiveSet)> {
        let (sample_rate, fft, first, last, cp) = match *self {
            Band::Preset { regulation, cp } => {
                let p = regulation.preset();
                (p.sample_rate_hz, p.fft_size, p.active_first, p.active_last, p.cp_len(cp)?)
            }
            Band::Custom {
                sample_rate_hz,
                fft_size,
                active_first,
                active_last,
                cp_len,
            } => (sample_rate_hz, fft_size, active_first, active_last, cp_len),
        };
        if fft < 2 || fft % 2 != 0 {
            bail!("band.fft_size must be an even number >= 2, got {fft}");
        }
        let grid = ChannelGrid::new(fft / 2, sample_rate, cp)?;
        let active = ActiveSet::range(grid.n_half(), first, last)?;
        Ok((grid, active))
    }

    /// Occupied bandwidth: the band plan's figure, or the active bins times `df`.
    pub fn occupied_bandwidth_hz(&self) -> anyhow::Result<f64> {
        Ok(match *self {
            Band::Preset { regulation, .. } => regulation.preset().bandwidth_hz,
            Band::Custom { .. } => {
                let (grid, active) = self.resolve()?;
                active.len() as f64 * grid.subcarrier_spacing_hz()
            }
        })
    }
}

/// Built-in network or a full description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkChoice {
    Preset(NetworkPreset),
    Custom(NetworkSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkPreset {
    Mv,
    Lv,
}

impl Default for NetworkChoice {
    fn default() -> Self {
        NetworkChoice::Preset(NetworkPreset::Mv)
    }
}

impl NetworkChoice {
    pub fn spec(&self) -> NetworkSpec {
        match self {
            NetworkChoice::Preset(NetworkPreset::Mv) => presets::mv_network(),
            NetworkChoice::Preset(NetworkPreset::Lv) => presets::lv_network(),
            NetworkChoice::Custom(spec) => spec.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_sweep_sizes")]
    pub n_half: Vec<usize>,
    #[serde(default = "default_payloads")]
    pub payloads: usize,
}

fn default_sweep_sizes() -> Vec<usize> {
    (6..=12).map(|p| 1 << p).collect()
}

fn default_payloads() -> usize {
    100
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_half: default_sweep_sizes(),
            payloads: default_payloads(),
        }
    }
}

fn default_psd() -> f64 {
    presets::MV_TX_PSD_DBM_HZ
}

fn default_eta() -> usize {
    1
}

fn default_alpha() -> f64 {
    0.9
}

fn default_symbols() -> usize {
    100
}

fn default_keep() -> usize {
    4
}

const fn default_scheme() -> Scheme {
    Scheme::Tdma
}

fn default_constellation() -> Constellation {
    Constellation::Qpsk
}

fn default_method() -> Method {
    Method::ChannelEstimation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub band: Band,
    #[serde(default = "default_constellation")]
    pub constellation: Constellation,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub network: NetworkChoice,
    /// Overrides the network's own PLM port loading.
    #[serde(default)]
    pub plm_loading: Option<PortLoading>,
    /// Port names that host a PLM, in PLM index order; all ports when empty.
    #[serde(default)]
    pub plms: Vec<String>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_psd")]
    pub tx_psd_dbm_hz: f64,
    /// Symbol periods to simulate.
    #[serde(default = "default_symbols")]
    pub symbols: usize,
    #[serde(default)]
    pub path: ChannelPath,
    #[serde(default = "default_keep")]
    pub keep_reflectograms: usize,
    #[serde(default = "default_eta")]
    pub eta: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Defaults to the first segment's cable at mid-band.
    #[serde(default)]
    pub phase_velocity_mps: Option<f64>,
    /// Defaults to the farthest node from each PLM.
    #[serde(default)]
    pub target_range_m: Option<f64>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.eta == 0 {
            bail!("eta must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            bail!("alpha must lie in [0, 1], got {}", self.alpha);
        }
        if self.symbols == 0 {
            bail!("symbols must be >= 1");
        }
        if !self.tx_psd_dbm_hz.is_finite() {
            bail!("tx_psd_dbm_hz must be finite");
        }
        if let Some(v) = self.phase_velocity_mps {
            if !(v.is_finite() && v > 0.0) {
                bail!("phase_velocity_mps must be positive");
            }
        }
        self.band.resolve()?;
        Ok(())
    }

    pub fn network(&self) -> anyhow::Result<NetworkModel> {
        let mut spec = self.network.spec();
        if let Some(loading) = self.plm_loading {
            spec.plm_loading = loading;
        }
        Ok(NetworkModel::from_spec(&spec)?)
    }

    /// Port indices of the PLMs.
    pub fn plm_ports(&self, net: &NetworkModel) -> anyhow::Result<Vec<usize>> {
        if self.plms.is_empty() {
            return Ok((0..net.ports().len()).collect());
        }
        self.plms
            .iter()
            .map(|name| {
                net.ports()
                    .iter()
                    .position(|p| &p.name == name)
                    .with_context(|| format!("plms: no port named `{name}`"))
            })
            .collect()
    }

    pub fn phase_velocity(&self, net: &NetworkModel, grid: &ChannelGrid) -> f64 {
        self.phase_velocity_mps.unwrap_or_else(|| {
            let mid = grid.bandwidth_hz() / 2.0;
            net.segments()
                .first()
                .map_or(presets::LV_PHASE_VELOCITY_MPS, |s| s.cable.phase_velocity(mid))
        })
    }

    pub fn target_range(&self, net: &NetworkModel, port: usize) -> f64 {
        self.target_range_m.unwrap_or_else(|| farthest_node_m(net, net.ports()[port].node))
    }
}

/// Distance along the tree from `from` to the farthest node.
pub fn farthest_node_m(net: &NetworkModel, from: usize) -> f64 {
    let mut dist = vec![f64::NAN; net.nodes().len()];
    dist[from] = 0.0;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for s in net.segments() {
            let v = if s.a == u {
                s.b
            } else if s.b == u {
                s.a
            } else {
                continue;
            };
            if dist[v].is_nan() {
                dist[v] = dist[u] + s.length_m;
                stack.push(v);
            }
        }
    }
    dist.into_iter().filter(|d| !d.is_nan()).fold(0.0, f64::max)
}
