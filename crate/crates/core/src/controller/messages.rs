//! Simplified RRC and NG-AP messages.
//!
//! These stand in for the ASN.1 encodings; each serializes to canonical JSON,
//! which is both the radio/tunnel payload and the input to trace digests.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrbConfig {
    pub session_id: u8,
    /// Label of the DRB inside its session, as requested by the core.
    pub label: u8,
    pub bearer_id: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RrcMessage {
    #[serde(rename = "RRCSetupRequest")]
    SetupRequest { ue_identity: u32 },
    #[serde(rename = "RRCSetup")]
    Setup { crnti: u16, srb1_bearer: u8 },
    #[serde(rename = "RRCSetupComplete")]
    SetupComplete { nas_payload: Vec<u8> },
    #[serde(rename = "SecurityModeCommand")]
    SecurityModeCommand { security_info: Vec<u8> },
    #[serde(rename = "SecurityModeComplete")]
    SecurityModeComplete {},
    #[serde(rename = "RRCReconfiguration")]
    Reconfiguration { srb2_bearer: u8, drbs: Vec<DrbConfig> },
    #[serde(rename = "RRCReconfigurationComplete")]
    ReconfigurationComplete {},
}

impl RrcMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            RrcMessage::SetupRequest { .. } => "RRCSetupRequest",
            RrcMessage::Setup { .. } => "RRCSetup",
            RrcMessage::SetupComplete { .. } => "RRCSetupComplete",
            RrcMessage::SecurityModeCommand { .. } => "SecurityModeCommand",
            RrcMessage::SecurityModeComplete {} => "SecurityModeComplete",
            RrcMessage::Reconfiguration { .. } => "RRCReconfiguration",
            RrcMessage::ReconfigurationComplete {} => "RRCReconfigurationComplete",
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("RRC messages always serialize")
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(data)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QosFlowRequest {
    pub flow_id: u8,
    pub ip_dst: Ipv4Addr,
    pub ip_proto: u8,
    pub l4_dst: u16,
    /// DRB label the flow maps to.
    pub drb: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub session_id: u8,
    /// DRB labels of the session.
    pub drbs: Vec<u8>,
    pub flows: Vec<QosFlowRequest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResource {
    pub session_id: u8,
    pub ran_ip: Ipv4Addr,
    pub udp_port: u16,
    pub teid: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NgapMessage {
    #[serde(rename = "InitialUEMessage")]
    InitialUeMessage { ran_ue_id: u32, nas_payload: Vec<u8> },
    #[serde(rename = "InitialContextSetupRequest")]
    InitialContextSetupRequest {
        ran_ue_id: u32,
        sessions: Vec<SessionRequest>,
        security_info: Vec<u8>,
    },
    #[serde(rename = "InitialContextSetupResponse")]
    InitialContextSetupResponse {
        ran_ue_id: u32,
        sessions: Vec<SessionResource>,
    },
}

impl NgapMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            NgapMessage::InitialUeMessage { .. } => "InitialUEMessage",
            NgapMessage::InitialContextSetupRequest { .. } => "InitialContextSetupRequest",
            NgapMessage::InitialContextSetupResponse { .. } => "InitialContextSetupResponse",
        }
    }

    pub fn ran_ue_id(&self) -> u32 {
        match self {
            NgapMessage::InitialUeMessage { ran_ue_id, .. }
            | NgapMessage::InitialContextSetupRequest { ran_ue_id, .. }
            | NgapMessage::InitialContextSetupResponse { ran_ue_id, .. } => *ran_ue_id,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("NGAP messages always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rrc_round_trip_and_kind_tag() {
        let m = RrcMessage::Setup {
            crnti: 61,
            srb1_bearer: 3,
        };
        let b = m.to_bytes();
        assert_eq!(b, br#"{"kind":"RRCSetup","crnti":61,"srb1_bearer":3}"#);
        assert_eq!(RrcMessage::from_bytes(&b).unwrap(), m);
        let c = RrcMessage::SecurityModeComplete {};
        assert_eq!(RrcMessage::from_bytes(&c.to_bytes()).unwrap(), c);
        assert!(RrcMessage::from_bytes(b"{\"kind\":\"Bogus\"}").is_err());
    }
}
