//! Regulatory band plans and reference networks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::network::{BranchSpec, CableSpec, CablePreset, Load, NetworkSpec, NodeSpec, PortLoading, PortSpec, DEFAULT_Z_PLM};
use crate::spectral::ChannelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regulation {
    Fcc,
    Arib,
    Cenelec,
}

impl Regulation {
    pub const ALL: [Regulation; 3] = [Regulation::Fcc, Regulation::Arib, Regulation::Cenelec];

    pub fn preset(self) -> RegulatoryPreset {
        match self {
            Regulation::Fcc => RegulatoryPreset {
                name: "FCC",
                band_start_hz: 10e3,
                band_stop_hz: 490e3,
                bandwidth_hz: 480e3,
                sample_rate_hz: 1.2e6,
                fft_size: 256,
                active_first: 3,
                active_last: 104,
                cp_standard: 30,
                cp_long: Some(52),
            },
            Regulation::Arib => RegulatoryPreset {
                name: "ARIB",
                band_start_hz: 10e3,
                band_stop_hz: 450e3,
                bandwidth_hz: 440e3,
                sample_rate_hz: 1.2e6,
                fft_size: 256,
                active_first: 3,
                active_last: 96,
                cp_standard: 30,
                cp_long: Some(52),
            },
            Regulation::Cenelec => RegulatoryPreset {
                name: "CENELEC",
                band_start_hz: 3e3,
                band_stop_hz: 148.5e3,
                bandwidth_hz: 145.5e3,
                sample_rate_hz: 0.4e6,
                fft_size: 256,
                active_first: 2,
                active_last: 95,
                cp_standard: 30,
                cp_long: None,
            },
        }
    }
}

/// Which cyclic prefix of a band plan to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpChoice {
    #[default]
    Standard,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegulatoryPreset {
    pub name: &'static str,
    pub band_start_hz: f64,
    pub band_stop_hz: f64,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub fft_size: usize,
    pub active_first: usize,
    pub active_last: usize,
    pub cp_standard: usize,
    pub cp_long: Option<usize>,
}

impl RegulatoryPreset {
    pub fn n_active(&self) -> usize {
        self.active_last - self.active_first + 1
    }

    pub fn cp_len(&self, choice: CpChoice) -> Result<usize> {
        match choice {
            CpChoice::Standard => Ok(self.cp_standard),
            CpChoice::Long => self
                .cp_long
                .ok_or_else(|| invalid("cp", format!("{} defines no long cyclic prefix", self.name))),
        }
    }

    pub fn grid(&self, choice: CpChoice) -> Result<ChannelGrid> {
        ChannelGrid::new(self.fft_size / 2, self.sample_rate_hz, self.cp_len(choice)?)
    }
}

/// Transmit PSD used for the MV campaign, dBm/Hz.
pub const MV_TX_PSD_DBM_HZ: f64 = -36.81;

/// Nominal phase velocities of the two cable presets, m/s.
pub const LV_PHASE_VELOCITY_MPS: f64 = 1.5e8;
pub const MV_PHASE_VELOCITY_MPS: f64 = 2.56e8;

fn bare(name: &str) -> NodeSpec {
    NodeSpec {
        name: name.into(),
        loads: Vec::new(),
        branches: Vec::new(),
    }
}

/// MV overhead feeder: 1 km to a tap, then 1.73 km to an unloaded delta load.
///
/// Phase pairs A-B and C-B are reduced to one differential-mode line, with
/// two modems at the feeder and two at the 1 km tap.
pub fn mv_network() -> NetworkSpec {
    let load = NodeSpec {
        loads: vec![Load::Open],
        ..bare("delta_load")
    };
    let tap = NodeSpec {
        branches: vec![BranchSpec {
            length_m: 1730.0,
            cable: CableSpec::Preset(CablePreset::MvOverhead),
            node: load,
        }],
        ..bare("tap_1km")
    };
    let feeder = NodeSpec {
        branches: vec![BranchSpec {
            length_m: 1000.0,
            cable: CableSpec::Preset(CablePreset::MvOverhead),
            node: tap,
        }],
        ..bare("feeder")
    };
    let port = |name: &str, node: &str| PortSpec {
        name: name.into(),
        node: node.into(),
    };
    NetworkSpec {
        z_plm_ohm: DEFAULT_Z_PLM,
        plm_loading: PortLoading::Isolated,
        root: feeder,
        ports: vec![
            port("plm_ab_feeder", "feeder"),
            port("plm_cb_feeder", "feeder"),
            port("plm_ab_1km", "tap_1km"),
            port("plm_cb_1km", "tap_1km"),
        ],
    }
}

/// Short LV service: 150 m of cable to a resistive customer load with a
/// 40 m spur to a second customer.
pub fn lv_network() -> NetworkSpec {
    let house = |name: &str, ohm: f64| NodeSpec {
        loads: vec![Load::Resistor(ohm)],
        ..bare(name)
    };
    let joint = NodeSpec {
        branches: vec![
            BranchSpec {
                length_m: 40.0,
                cable: CableSpec::Preset(CablePreset::LvUnderground),
                node: house("house_b", 80.0),
            },
            BranchSpec {
                length_m: 80.0,
                cable: CableSpec::Preset(CablePreset::LvUnderground),
                node: house("house_a", 60.0),
            },
        ],
        ..bare("joint")
    };
    NetworkSpec {
        z_plm_ohm: DEFAULT_Z_PLM,
        plm_loading: PortLoading::Isolated,
        root: NodeSpec {
            loads: vec![Load::Matched],
            branches: vec![BranchSpec {
                length_m: 70.0,
                cable: CableSpec::Preset(CablePreset::LvUnderground),
                node: joint,
            }],
            ..bare("substation")
        },
        ports: vec![PortSpec {
            name: "plm_substation".into(),
            node: "substation".into(),
        }],
    }
}
