//! Reactive UE model.

use thiserror::Error;

use crate::controller::RrcMessage;
use crate::wire::{self, SRB0_BEARER, SRB1_BEARER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeState {
    Idle,
    AwaitingSetup,
    Connected,
    Secured,
    Configured,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UeError {
    #[error("UE is not idle")]
    NotIdle,
    #[error("UE has no C-RNTI yet")]
    NotConnected,
}

/// Radio transmission from the UE: `(crnti, bearer_id, payload)`.
pub type Uplink = (u16, u8, Vec<u8>);

#[derive(Debug, Clone)]
pub struct UeModel {
    pub name: String,
    pub tmp_id: u32,
    pub state: UeState,
    pub crnti: Option<u16>,
    /// DRB bearer ids from the last reconfiguration.
    pub drbs: Vec<u8>,
    /// Data received on DRBs: `(bearer_id, payload)`.
    pub received: Vec<(u8, Vec<u8>)>,
    /// Downlink messages the model could not make sense of.
    pub ignored: u64,
}

impl UeModel {
    pub fn new(name: impl Into<String>, tmp_id: u32) -> Self {
        Self {
            name: name.into(),
            tmp_id,
            state: UeState::Idle,
            crnti: None,
            drbs: Vec::new(),
            received: Vec::new(),
            ignored: 0,
        }
    }

    pub fn nas_registration(&self) -> Vec<u8> {
        format!("REGISTRATION:{}", self.name).into_bytes()
    }

    pub fn power_on(&mut self) -> Result<Uplink, UeError> {
        if self.state != UeState::Idle {
            return Err(UeError::NotIdle);
        }
        self.state = UeState::AwaitingSetup;
        let rrc = RrcMessage::SetupRequest {
            ue_identity: self.tmp_id,
        };
        let frame = wire::wrap_srb0(self.tmp_id, &rrc.to_bytes()).expect("small message");
        Ok((0, SRB0_BEARER, frame))
    }

    pub fn send_data(&self, bearer_id: u8, payload: Vec<u8>) -> Result<Uplink, UeError> {
        let crnti = self.crnti.ok_or(UeError::NotConnected)?;
        Ok((crnti, bearer_id, payload))
    }

    /// Common channel delivery. Returns the reply, if any.
    pub fn on_common(&mut self, payload: &[u8]) -> Option<Uplink> {
        let Ok((tmp_id, rrc)) = wire::unwrap_srb0(payload) else {
            self.ignored += 1;
            return None;
        };
        match (tmp_id == self.tmp_id, RrcMessage::from_bytes(rrc)) {
            (true, Ok(RrcMessage::Setup { crnti, srb1_bearer })) if self.state == UeState::AwaitingSetup => {
                self.crnti = Some(crnti);
                self.state = UeState::Connected;
                let reply = RrcMessage::SetupComplete {
                    nas_payload: self.nas_registration(),
                };
                Some((crnti, srb1_bearer, reply.to_bytes()))
            }
            _ => {
                self.ignored += 1;
                None
            }
        }
    }

    /// Delivery on a dedicated bearer. Returns the reply, if any.
    pub fn on_bearer(&mut self, bearer_id: u8, payload: &[u8]) -> Option<Uplink> {
        let crnti = self.crnti?;
        if bearer_id != SRB1_BEARER {
            if self.drbs.contains(&bearer_id) {
                self.received.push((bearer_id, payload.to_vec()));
            } else {
                self.ignored += 1;
            }
            return None;
        }
        let reply = match RrcMessage::from_bytes(payload) {
            Ok(RrcMessage::SecurityModeCommand { .. }) if self.state == UeState::Connected => {
                self.state = UeState::Secured;
                RrcMessage::SecurityModeComplete {}
            }
            Ok(RrcMessage::Reconfiguration { drbs, .. }) if self.state == UeState::Secured => {
                self.state = UeState::Configured;
                self.drbs = drbs.iter().map(|d| d.bearer_id).collect();
                RrcMessage::ReconfigurationComplete {}
            }
            _ => {
                self.ignored += 1;
                return None;
            }
        };
        Some((crnti, SRB1_BEARER, reply.to_bytes()))
    }
}
