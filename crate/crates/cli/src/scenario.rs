//! Scenario files (TOML).
//!
//! ```toml
//! [settings]
//! seed = 7
//!
//! [[topology.nodes]]
//! name = "d-gNB"
//! rat = "NR"
//! ngu_ip = "10.0.0.1"
//!
//! [[topology.ues]]
//! name = "UE-1"
//! attach = "d-gNB"
//!
//! [[topology.ues.sessions]]
//! id = 1
//! drbs = [1]
//! flows = [{ id = 1, ip_dst = "10.45.0.1", proto = "tcp", l4_dst = 43, drb = 1 }]
//!
//! [[script]]
//! at = 1
//! action = "power_on"
//! ue = "UE-1"
//! ```

use std::fmt;
use std::net::Ipv4Addr;

use open5g_core::controller::{QosFlowRequest, SessionRequest};
use open5g_core::netsim::{Action, Scenario, SimConfig, Stimulus, Topology, UeSpec};
use open5g_core::node::{NodeDescriptor, NodeId, Rat};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub settings: Settings,
    pub topology: TopologySection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    pub admission_cap: usize,
    pub max_events: u64,
}

impl Default for Settings {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            seed: 0,
            admission_cap: d.admission_cap,
            max_events: d.max_events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ues: Vec<UeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: String,
    pub rat: Rat,
    pub ngu_ip: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeEntry {
    pub name: String,
    pub attach: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sessions: Vec<SessionEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub id: u8,
    pub drbs: Vec<u8>,
    #[serde(default)]
    pub flows: Vec<FlowEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub id: u8,
    pub ip_dst: Ipv4Addr,
    pub proto: Proto,
    pub l4_dst: u16,
    pub drb: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptEntry {
    PowerOn {
        at: u64,
        ue: String,
    },
    Uplink {
        at: u64,
        ue: String,
        bearer: u8,
        payload: String,
    },
    Downlink {
        at: u64,
        ue: String,
        session: u8,
        ip_dst: Ipv4Addr,
        proto: Proto,
        l4_dst: u16,
        payload: String,
    },
}

/// IP protocol number; written as `"tcp"`, `"udp"`, `"sctp"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Proto(pub u8);

impl Proto {
    pub const TCP: Proto = Proto(6);
    pub const UDP: Proto = Proto(17);
    pub const SCTP: Proto = Proto(132);

    pub fn name(self) -> Option<&'static str> {
        match self {
            Proto::TCP => Some("tcp"),
            Proto::UDP => Some("udp"),
            Proto::SCTP => Some("sctp"),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "tcp" => Some(Proto::TCP),
            "udp" => Some(Proto::UDP),
            "sctp" => Some(Proto::SCTP),
            _ => None,
        }
    }
}

impl fmt::Display for Proto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "{}", self.0),
        }
    }
}

impl Serialize for Proto {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.name() {
            Some(n) => s.serialize_str(n),
            None => s.serialize_u8(self.0),
        }
    }
}

impl<'de> Deserialize<'de> for Proto {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ProtoVisitor;

        impl Visitor<'_> for ProtoVisitor {
            type Value = Proto;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"tcp\", \"udp\", \"sctp\" or a protocol number 0-255")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Proto, E> {
                Proto::from_name(v).ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Proto, E> {
                u8::try_from(v)
                    .map(Proto)
                    .map_err(|_| E::invalid_value(de::Unexpected::Signed(v), &self))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Proto, E> {
                u8::try_from(v)
                    .map(Proto)
                    .map_err(|_| E::invalid_value(de::Unexpected::Unsigned(v), &self))
            }
        }

        d.deserialize_any(ProtoVisitor)
    }
}

impl ScriptEntry {
    pub fn at(&self) -> u64 {
        match self {
            ScriptEntry::PowerOn { at, .. } | ScriptEntry::Uplink { at, .. } | ScriptEntry::Downlink { at, .. } => *at,
        }
    }

    fn to_stimulus(&self) -> Stimulus {
        let action = match self.clone() {
            ScriptEntry::PowerOn { ue, .. } => Action::PowerOn { ue },
            ScriptEntry::Uplink {
                ue, bearer, payload, ..
            } => Action::UplinkData {
                ue,
                bearer_id: bearer,
                payload: payload.into_bytes(),
            },
            ScriptEntry::Downlink {
                ue,
                session,
                ip_dst,
                proto,
                l4_dst,
                payload,
                ..
            } => Action::DownlinkData {
                ue,
                session_id: session,
                ip_dst,
                ip_proto: proto.0,
                l4_dst,
                payload: payload.into_bytes(),
            },
        };
        Stimulus { at: self.at(), action }
    }
}

impl SessionEntry {
    fn to_request(&self) -> SessionRequest {
        SessionRequest {
            session_id: self.id,
            drbs: self.drbs.clone(),
            flows: self
                .flows
                .iter()
                .map(|f| QosFlowRequest {
                    flow_id: f.id,
                    ip_dst: f.ip_dst,
                    ip_proto: f.proto.0,
                    l4_dst: f.l4_dst,
                    drb: f.drb,
                })
                .collect(),
        }
    }
}

/// 1-based line of byte offset `pos` in `text`.
pub fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            ParseError {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    /// Simulator input. Node ids follow file order starting at 1.
    pub fn scenario(&self) -> Scenario {
        let nodes = self
            .topology
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeDescriptor {
                node_id: NodeId(i as u16 + 1),
                name: n.name.clone(),
                rat: n.rat,
                ngu_ip: n.ngu_ip,
            })
            .collect();
        let ues = self
            .topology
            .ues
            .iter()
            .map(|u| UeSpec {
                name: u.name.clone(),
                attach: u.attach.clone(),
                sessions: u.sessions.iter().map(SessionEntry::to_request).collect(),
            })
            .collect();
        Scenario {
            topology: Topology {
                nodes,
                ues,
                seed: self.settings.seed,
            },
            script: self.script.iter().map(ScriptEntry::to_stimulus).collect(),
            config: SimConfig {
                admission_cap: self.settings.admission_cap,
                max_events: self.settings.max_events,
            },
        }
    }
}
