//! AMF and UPF stand-ins.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::controller::{NgapMessage, SessionRequest};
use crate::wire::{self, PseudoIp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("unknown UE {0:?}")]
    UnknownUe(String),
    #[error("unexpected NGAP {0}")]
    Unexpected(&'static str),
    #[error("malformed GTP-U frame")]
    BadFrame,
    #[error("no session {session} for UE {ue:?}")]
    UnknownSession { ue: String, session: u8 },
}

/// Where the UPF sends downlink traffic of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionEndpoint {
    pub teid: u32,
    pub ran_ip: Ipv4Addr,
    pub udp_port: u16,
}

#[derive(Debug, Clone, Default)]
pub struct Upf {
    sessions: BTreeMap<(String, u8), SessionEndpoint>,
    /// Uplink receipts: `(teid, payload)`.
    pub received: Vec<(u32, Vec<u8>)>,
    pub bad_frames: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpfEvent {
    Uplink { teid: u32, payload: Vec<u8> },
    BadFrame,
}

impl Upf {
    pub fn register(&mut self, ue: &str, session_id: u8, ep: SessionEndpoint) {
        self.sessions.insert((ue.to_string(), session_id), ep);
    }

    pub fn endpoint(&self, ue: &str, session_id: u8) -> Option<SessionEndpoint> {
        self.sessions.get(&(ue.to_string(), session_id)).copied()
    }

    /// Consumes an uplink GTP-U frame.
    pub fn uplink(&mut self, frame: &[u8]) -> UpfEvent {
        match wire::decap_gtpu(frame) {
            Ok((teid, payload)) => {
                self.received.push((teid, payload.to_vec()));
                UpfEvent::Uplink {
                    teid,
                    payload: payload.to_vec(),
                }
            }
            Err(_) => {
                self.bad_frames += 1;
                UpfEvent::BadFrame
            }
        }
    }

    /// Wraps a downlink packet for `ue`'s session. Returns the endpoint and
    /// the GTP-U frame.
    pub fn downlink(
        &self,
        ue: &str,
        session_id: u8,
        hdr: PseudoIp,
        data: &[u8],
    ) -> Result<(SessionEndpoint, Vec<u8>), CoreError> {
        let ep = self.endpoint(ue, session_id).ok_or_else(|| CoreError::UnknownSession {
            ue: ue.to_string(),
            session: session_id,
        })?;
        let packet = hdr.build(data).map_err(|_| CoreError::BadFrame)?;
        let frame = wire::encap_gtpu(&packet, ep.teid).map_err(|_| CoreError::BadFrame)?;
        Ok((ep, frame))
    }
}

/// Answers registrations from the session specs of the topology.
#[derive(Debug, Clone)]
pub struct Amf {
    specs: BTreeMap<String, Vec<SessionRequest>>,
    ran_ue: BTreeMap<u32, String>,
}

impl Amf {
    pub fn new(specs: impl IntoIterator<Item = (String, Vec<SessionRequest>)>) -> Self {
        Self {
            specs: specs.into_iter().collect(),
            ran_ue: BTreeMap::new(),
        }
    }

    /// UE name behind a RAN UE id, once registered.
    pub fn ue_name(&self, ran_ue_id: u32) -> Option<&str> {
        self.ran_ue.get(&ran_ue_id).map(String::as_str)
    }

    /// Handles an uplink NGAP message. `security_info` is used for the
    /// context setup request.
    pub fn handle(
        &mut self,
        msg: &NgapMessage,
        security_info: Vec<u8>,
        upf: &mut Upf,
    ) -> Result<Option<NgapMessage>, CoreError> {
        match msg {
            NgapMessage::InitialUeMessage { ran_ue_id, nas_payload } => {
                let text = String::from_utf8_lossy(nas_payload);
                let name = text.strip_prefix("REGISTRATION:").unwrap_or(&text).to_string();
                let sessions = self
                    .specs
                    .get(&name)
                    .ok_or_else(|| CoreError::UnknownUe(name.clone()))?
                    .clone();
                self.ran_ue.insert(*ran_ue_id, name);
                Ok(Some(NgapMessage::InitialContextSetupRequest {
                    ran_ue_id: *ran_ue_id,
                    sessions,
                    security_info,
                }))
            }
            NgapMessage::InitialContextSetupResponse { ran_ue_id, sessions } => {
                let name = self
                    .ran_ue
                    .get(ran_ue_id)
                    .ok_or_else(|| CoreError::UnknownUe(format!("ran-ue-{ran_ue_id}")))?;
                for s in sessions {
                    upf.register(
                        name,
                        s.session_id,
                        SessionEndpoint {
                            teid: s.teid,
                            ran_ip: s.ran_ip,
                            udp_port: s.udp_port,
                        },
                    );
                }
                Ok(None)
            }
            other => Err(CoreError::Unexpected(other.kind())),
        }
    }
}
