//! SDN RAN controller.
//!
//! Hosts the Open5G configuration point (port and flow commands), the per-UE
//! RRC state machine and the NG-AP endpoint toward the AMF. Identifiers are
//! allocated deterministically: C-RNTIs sequentially from 0x003D per node,
//! port ids and xids sequentially per node, TEIDs and signaling tunnel ids
//! sequentially across the whole controller.

mod config;
mod messages;

use std::collections::{BTreeMap, HashMap};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::node::{NodeDescriptor, NodeId, Rat};
use crate::wire::{
    self, Body, ErrorCode, FlowMod, Message, PortId, PortMod, GTPU_UDP_PORT, MAX_BEARER_ID, MAX_CRNTI, SRB0_BEARER,
    SRB1_BEARER, SRB2_BEARER,
};

pub use config::{build_session_config, layer_config, PortRole, DEFAULT_PRIORITY};
pub use messages::{DrbConfig, NgapMessage, QosFlowRequest, RrcMessage, SessionRequest, SessionResource};

pub const FIRST_CRNTI: u16 = 0x003D;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} already registered")]
    DuplicateNode(NodeId),
    #[error("node {0} already bootstrapped")]
    AlreadyBootstrapped(NodeId),
    #[error("node {0} not bootstrapped")]
    NotBootstrapped(NodeId),
    #[error("unknown signaling tunnel {0}")]
    UnknownTunnel(u32),
    #[error("tunnel {tunnel_id} does not belong to {node}")]
    ForeignTunnel { tunnel_id: u32, node: NodeId },
    #[error("{kind} not allowed in state {state:?}")]
    ProtocolViolation { kind: &'static str, state: RrcState },
    #[error("unknown UE {0}")]
    UnknownUe(u32),
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("undecodable signaling payload: {0}")]
    BadPayload(String),
    #[error("identifier space exhausted: {0}")]
    Exhausted(&'static str),
    #[error("procedure for UE {0} was aborted")]
    ProcedureFailed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RrcState {
    Idle,
    SetupRequested,
    Connected,
    Secured,
    Configured,
}

/// What a controller signaling tunnel carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunnelKind {
    Srb0,
    Srb1 { ran_ue_id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TunnelBinding {
    pub node: NodeId,
    pub kind: TunnelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrbPorts {
    pub radio_port: PortId,
    pub sig_port: Option<PortId>,
    pub tunnel_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QosFlow {
    pub flow_id: u8,
    pub ip_dst: Ipv4Addr,
    pub ip_proto: u8,
    pub l4_dst: u16,
    /// Bearer id of the DRB serving the flow.
    pub mapped_drb: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Drb {
    pub label: u8,
    pub bearer_id: u8,
    pub radio_port_id: PortId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NguTunnel {
    pub port_id: PortId,
    pub local_ip: Ipv4Addr,
    pub remote_ip: Ipv4Addr,
    pub udp_port: u16,
    pub teid: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PduSessionCtx {
    pub session_id: u8,
    pub qos_flows: Vec<QosFlow>,
    pub drbs: Vec<Drb>,
    pub ngu_tunnel: NguTunnel,
}

impl PduSessionCtx {
    /// Every QoS flow must map onto a DRB of this session.
    pub fn check(&self) -> Result<(), ControllerError> {
        for f in &self.qos_flows {
            if !self.drbs.iter().any(|d| d.bearer_id == f.mapped_drb) {
                return Err(ControllerError::InvalidSession(format!(
                    "session {} flow {} maps to missing DRB bearer {}",
                    self.session_id, f.flow_id, f.mapped_drb
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeContext {
    pub ran_ue_id: u32,
    pub ue_tmp_id: u32,
    pub crnti: u16,
    pub serving_node: NodeId,
    pub rrc_state: RrcState,
    pub security_mode_sent: bool,
    pub failed: bool,
    pub srbs: BTreeMap<u8, SrbPorts>,
    pub pdu_sessions: Vec<PduSessionCtx>,
    pub security_info: Vec<u8>,
}

impl UeContext {
    fn srb1_tunnel(&self) -> u32 {
        self.srbs[&SRB1_BEARER].tunnel_id.expect("SRB1 always has a tunnel")
    }
}

/// Details of an RRC setup request considered for admission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdmissionRequest {
    pub ue_tmp_id: u32,
}

pub trait AdmissionPolicy: Send + Sync {
    fn admit(&self, node: NodeId, current_ues: usize, request: &AdmissionRequest) -> bool;
}

/// Admits while the node serves fewer than `cap` UEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapPolicy {
    pub cap: usize,
}

impl AdmissionPolicy for CapPolicy {
    fn admit(&self, _node: NodeId, current_ues: usize, _request: &AdmissionRequest) -> bool {
        current_ues < self.cap
    }
}

/// A set of Open5G commands for one node, sent together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigBatch {
    pub node: NodeId,
    pub messages: Vec<Message>,
}

impl ConfigBatch {
    pub fn encode(&self) -> Vec<Vec<u8>> {
        self.messages
            .iter()
            .map(|m| wire::encode_message(m).expect("controller builds valid messages"))
            .collect()
    }

    pub fn port_mods(&self) -> impl Iterator<Item = &PortMod> {
        self.messages.iter().filter_map(|m| match &m.body {
            Body::PortMod(p) => Some(p),
            _ => None,
        })
    }

    pub fn flow_mods(&self) -> impl Iterator<Item = &FlowMod> {
        self.messages.iter().filter_map(|m| match &m.body {
            Body::FlowMod(f) => Some(f),
            _ => None,
        })
    }
}

/// RRC message headed for a UE through a node's signaling tunnel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrcDownlink {
    pub node: NodeId,
    pub tunnel_id: u32,
    /// Set for the common SRB0 tunnel, which needs the envelope.
    pub ue_tmp_id: Option<u32>,
    pub msg: RrcMessage,
}

impl RrcDownlink {
    /// Signaling tunnel frame carrying the message.
    pub fn frame(&self) -> Vec<u8> {
        let rrc = self.msg.to_bytes();
        let payload = match self.ue_tmp_id {
            Some(ue) => wire::wrap_srb0(ue, &rrc).expect("RRC messages are small"),
            None => rrc,
        };
        wire::encap_sig(&payload, self.tunnel_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Open5G(ConfigBatch),
    Rrc(RrcDownlink),
    Ngap(NgapMessage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerConfig {
    pub controller_ip: Ipv4Addr,
    pub upf_ip: Ipv4Addr,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            controller_ip: Ipv4Addr::new(10, 0, 0, 254),
            upf_ip: Ipv4Addr::new(10, 0, 100, 1),
        }
    }
}

#[derive(Debug, Clone)]
struct NodeCtl {
    rat: Rat,
    ngu_ip: Ipv4Addr,
    bootstrapped: bool,
    srb0_tunnel: Option<u32>,
    next_port: PortId,
    next_crnti: u16,
    next_xid: u32,
    ue_count: usize,
}

impl NodeCtl {
    fn port(&mut self) -> PortId {
        let p = self.next_port;
        self.next_port += 1;
        p
    }

    fn xid(&mut self) -> u32 {
        let x = self.next_xid;
        self.next_xid = self.next_xid.wrapping_add(1);
        x
    }

    fn batch(&mut self, node: NodeId, ports: Vec<PortMod>, flows: Vec<FlowMod>) -> ConfigBatch {
        let messages = ports
            .into_iter()
            .map(Body::PortMod)
            .chain(flows.into_iter().map(Body::FlowMod))
            .map(|body| Message { xid: self.xid(), body })
            .collect();
        ConfigBatch { node, messages }
    }
}

pub struct Controller {
    cfg: ControllerConfig,
    policy: Box<dyn AdmissionPolicy>,
    nodes: BTreeMap<NodeId, NodeCtl>,
    ues: BTreeMap<u32, UeContext>,
    by_tmp_id: HashMap<(NodeId, u32), u32>,
    tunnels: BTreeMap<u32, TunnelBinding>,
    xid_owner: HashMap<(NodeId, u32), u32>,
    next_ran_ue_id: u32,
    next_teid: u32,
    next_tunnel_id: u32,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, policy: Box<dyn AdmissionPolicy>) -> Self {
        Self {
            cfg,
            policy,
            nodes: BTreeMap::new(),
            ues: BTreeMap::new(),
            by_tmp_id: HashMap::new(),
            tunnels: BTreeMap::new(),
            xid_owner: HashMap::new(),
            next_ran_ue_id: 1,
            next_teid: 1,
            next_tunnel_id: 1,
        }
    }

    pub fn with_cap(cap: usize) -> Self {
        Self::new(ControllerConfig::default(), Box::new(CapPolicy { cap }))
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn add_node(&mut self, desc: &NodeDescriptor) -> Result<(), ControllerError> {
        if self.nodes.contains_key(&desc.node_id) {
            return Err(ControllerError::DuplicateNode(desc.node_id));
        }
        self.nodes.insert(
            desc.node_id,
            NodeCtl {
                rat: desc.rat,
                ngu_ip: desc.ngu_ip,
                bootstrapped: false,
                srb0_tunnel: None,
                next_port: 1,
                next_crnti: FIRST_CRNTI,
                next_xid: 1,
                ue_count: 0,
            },
        );
        Ok(())
    }

    pub fn ue(&self, ran_ue_id: u32) -> Option<&UeContext> {
        self.ues.get(&ran_ue_id)
    }

    pub fn ues(&self) -> impl Iterator<Item = &UeContext> {
        self.ues.values()
    }

    pub fn ue_by_tmp_id(&self, node: NodeId, ue_tmp_id: u32) -> Option<&UeContext> {
        self.by_tmp_id.get(&(node, ue_tmp_id)).and_then(|id| self.ues.get(id))
    }

    pub fn tunnel(&self, tunnel_id: u32) -> Option<TunnelBinding> {
        self.tunnels.get(&tunnel_id).copied()
    }

    pub fn ue_count(&self, node: NodeId) -> usize {
        self.nodes.get(&node).map_or(0, |n| n.ue_count)
    }

    fn node_mut(&mut self, node: NodeId) -> Result<&mut NodeCtl, ControllerError> {
        self.nodes.get_mut(&node).ok_or(ControllerError::UnknownNode(node))
    }

    fn tunnel_id(&mut self) -> u32 {
        let t = self.next_tunnel_id;
        self.next_tunnel_id += 1;
        t
    }

    fn teid(&mut self) -> u32 {
        let t = self.next_teid;
        self.next_teid += 1;
        t
    }

    /// Startup configuration of the common SRB0 path on `node`.
    pub fn bootstrap_node(&mut self, node: NodeId) -> Result<ConfigBatch, ControllerError> {
        let ctl = self.nodes.get(&node).ok_or(ControllerError::UnknownNode(node))?;
        if ctl.bootstrapped {
            return Err(ControllerError::AlreadyBootstrapped(node));
        }
        let tunnel_id = self.tunnel_id();
        let controller_ip = self.cfg.controller_ip;
        let ctl = self.node_mut(node)?;
        let radio = ctl.port();
        let sig = ctl.port();
        let (ports, flows) = config::srb0_path(ctl.rat, radio, sig, controller_ip, tunnel_id);
        ctl.bootstrapped = true;
        ctl.srb0_tunnel = Some(tunnel_id);
        let batch = ctl.batch(node, ports, flows);
        self.tunnels.insert(
            tunnel_id,
            TunnelBinding {
                node,
                kind: TunnelKind::Srb0,
            },
        );
        Ok(batch)
    }

    pub fn admit_ue(&self, node: NodeId, request: &AdmissionRequest) -> bool {
        self.policy.admit(node, self.ue_count(node), request)
    }

    /// Handles a signaling tunnel frame received from `node`.
    pub fn on_sig_frame(&mut self, node: NodeId, frame: &[u8]) -> Result<Vec<Output>, ControllerError> {
        let (tunnel_id, payload) = wire::decap_sig(frame).map_err(|e| ControllerError::BadPayload(e.to_string()))?;
        let binding = self
            .tunnel(tunnel_id)
            .ok_or(ControllerError::UnknownTunnel(tunnel_id))?;
        let (envelope, rrc) = match binding.kind {
            TunnelKind::Srb0 => {
                let (ue, rrc) = wire::unwrap_srb0(payload).map_err(|e| ControllerError::BadPayload(e.to_string()))?;
                (Some(ue), rrc)
            }
            TunnelKind::Srb1 { .. } => (None, payload),
        };
        let rrc = RrcMessage::from_bytes(rrc).map_err(|e| ControllerError::BadPayload(e.to_string()))?;
        self.on_rrc_uplink(node, tunnel_id, envelope, rrc)
    }

    /// Drives the UE state machine with an uplink RRC message.
    pub fn on_rrc_uplink(
        &mut self,
        node: NodeId,
        tunnel_id: u32,
        ue_envelope: Option<u32>,
        rrc: RrcMessage,
    ) -> Result<Vec<Output>, ControllerError> {
        let binding = self
            .tunnel(tunnel_id)
            .ok_or(ControllerError::UnknownTunnel(tunnel_id))?;
        if binding.node != node {
            return Err(ControllerError::ForeignTunnel { tunnel_id, node });
        }
        match binding.kind {
            TunnelKind::Srb0 => {
                let ue_tmp_id =
                    ue_envelope.ok_or_else(|| ControllerError::BadPayload("SRB0 message without envelope".into()))?;
                self.on_srb0(node, tunnel_id, ue_tmp_id, rrc)
            }
            TunnelKind::Srb1 { ran_ue_id } => self.on_srb1(ran_ue_id, rrc),
        }
    }

    fn on_srb0(
        &mut self,
        node: NodeId,
        srb0_tunnel: u32,
        ue_tmp_id: u32,
        rrc: RrcMessage,
    ) -> Result<Vec<Output>, ControllerError> {
        let existing = self.ue_by_tmp_id(node, ue_tmp_id).map(|u| u.rrc_state);
        let state = existing.unwrap_or(RrcState::Idle);
        if !matches!(rrc, RrcMessage::SetupRequest { .. }) || state != RrcState::Idle {
            return Err(ControllerError::ProtocolViolation {
                kind: rrc.kind(),
                state,
            });
        }
        if !self.admit_ue(node, &AdmissionRequest { ue_tmp_id }) {
            return Ok(Vec::new());
        }
        let controller_ip = self.cfg.controller_ip;
        let tunnel_id = self.tunnel_id();
        let ran_ue_id = self.next_ran_ue_id;
        let ctl = self.node_mut(node)?;
        if ctl.next_crnti > MAX_CRNTI {
            return Err(ControllerError::Exhausted("C-RNTI"));
        }
        let crnti = ctl.next_crnti;
        ctl.next_crnti += 1;
        ctl.ue_count += 1;
        let radio = ctl.port();
        let sig = ctl.port();
        let layers = layer_config(ctl.rat, PortRole::Srb);
        let (ports, flows) = config::srb_path(radio, sig, crnti, SRB1_BEARER, layers, controller_ip, tunnel_id);
        let batch = ctl.batch(node, ports, flows);
        self.next_ran_ue_id += 1;
        for m in &batch.messages {
            self.xid_owner.insert((node, m.xid), ran_ue_id);
        }
        self.tunnels.insert(
            tunnel_id,
            TunnelBinding {
                node,
                kind: TunnelKind::Srb1 { ran_ue_id },
            },
        );
        let mut srbs = BTreeMap::new();
        srbs.insert(
            SRB1_BEARER,
            SrbPorts {
                radio_port: radio,
                sig_port: Some(sig),
                tunnel_id: Some(tunnel_id),
            },
        );
        self.ues.insert(
            ran_ue_id,
            UeContext {
                ran_ue_id,
                ue_tmp_id,
                crnti,
                serving_node: node,
                rrc_state: RrcState::SetupRequested,
                security_mode_sent: false,
                failed: false,
                srbs,
                pdu_sessions: Vec::new(),
                security_info: Vec::new(),
            },
        );
        self.by_tmp_id.insert((node, ue_tmp_id), ran_ue_id);
        Ok(vec![
            Output::Open5G(batch),
            Output::Rrc(RrcDownlink {
                node,
                tunnel_id: srb0_tunnel,
                ue_tmp_id: Some(ue_tmp_id),
                msg: RrcMessage::Setup {
                    crnti,
                    srb1_bearer: SRB1_BEARER,
                },
            }),
        ])
    }

    fn on_srb1(&mut self, ran_ue_id: u32, rrc: RrcMessage) -> Result<Vec<Output>, ControllerError> {
        let ue = self
            .ues
            .get_mut(&ran_ue_id)
            .ok_or(ControllerError::UnknownUe(ran_ue_id))?;
        if ue.failed {
            return Err(ControllerError::ProcedureFailed(ran_ue_id));
        }
        let violation = ControllerError::ProtocolViolation {
            kind: rrc.kind(),
            state: ue.rrc_state,
        };
        match (ue.rrc_state, rrc) {
            (RrcState::SetupRequested, RrcMessage::SetupComplete { nas_payload }) => {
                if nas_payload.is_empty() {
                    return Err(violation);
                }
                ue.rrc_state = RrcState::Connected;
                Ok(vec![Output::Ngap(NgapMessage::InitialUeMessage {
                    ran_ue_id,
                    nas_payload,
                })])
            }
            (RrcState::Connected, RrcMessage::SecurityModeComplete {}) if ue.security_mode_sent => {
                ue.rrc_state = RrcState::Secured;
                let drbs = ue
                    .pdu_sessions
                    .iter()
                    .flat_map(|s| {
                        s.drbs.iter().map(|d| DrbConfig {
                            session_id: s.session_id,
                            label: d.label,
                            bearer_id: d.bearer_id,
                        })
                    })
                    .collect();
                Ok(vec![Output::Rrc(RrcDownlink {
                    node: ue.serving_node,
                    tunnel_id: ue.srb1_tunnel(),
                    ue_tmp_id: None,
                    msg: RrcMessage::Reconfiguration {
                        srb2_bearer: SRB2_BEARER,
                        drbs,
                    },
                })])
            }
            (RrcState::Secured, RrcMessage::ReconfigurationComplete {}) => {
                ue.rrc_state = RrcState::Configured;
                let ran_ip = self.nodes[&ue.serving_node].ngu_ip;
                let sessions = ue
                    .pdu_sessions
                    .iter()
                    .map(|s| SessionResource {
                        session_id: s.session_id,
                        ran_ip,
                        udp_port: s.ngu_tunnel.udp_port,
                        teid: s.ngu_tunnel.teid,
                    })
                    .collect();
                Ok(vec![Output::Ngap(NgapMessage::InitialContextSetupResponse {
                    ran_ue_id,
                    sessions,
                })])
            }
            _ => Err(violation),
        }
    }

    /// Handles an NG-AP message from the AMF.
    pub fn on_ngap(&mut self, msg: NgapMessage) -> Result<Vec<Output>, ControllerError> {
        let NgapMessage::InitialContextSetupRequest {
            ran_ue_id,
            sessions,
            security_info,
        } = msg
        else {
            let state = self.ues.get(&msg.ran_ue_id()).map_or(RrcState::Idle, |u| u.rrc_state);
            return Err(ControllerError::ProtocolViolation {
                kind: msg.kind(),
                state,
            });
        };
        let ue = self
            .ues
            .get(&ran_ue_id)
            .ok_or(ControllerError::UnknownUe(ran_ue_id))?
            .clone();
        if ue.failed {
            return Err(ControllerError::ProcedureFailed(ran_ue_id));
        }
        if ue.rrc_state != RrcState::Connected || ue.security_mode_sent {
            return Err(ControllerError::ProtocolViolation {
                kind: "InitialContextSetupRequest",
                state: ue.rrc_state,
            });
        }
        validate_sessions(&sessions)?;
        let node = ue.serving_node;
        let crnti = ue.crnti;
        let upf_ip = self.cfg.upf_ip;

        let teids: Vec<u32> = sessions.iter().map(|_| self.teid()).collect();
        let ctl = self.nodes.get_mut(&node).expect("UE nodes are registered");
        let rat = ctl.rat;
        let ngu_ip = ctl.ngu_ip;

        let srb2_port = ctl.port();
        let mut ports = vec![config::radio_port(
            srb2_port,
            crnti,
            SRB2_BEARER,
            wire::BearerKind::Srb,
            layer_config(rat, PortRole::Srb),
        )];
        let mut flows = Vec::new();
        let mut bearer_ids = (1..=MAX_BEARER_ID).filter(|b| ![SRB0_BEARER, SRB1_BEARER, SRB2_BEARER].contains(b));
        let mut ctxs = Vec::with_capacity(sessions.len());
        for (req, teid) in sessions.iter().zip(teids) {
            let mut drbs = Vec::with_capacity(req.drbs.len());
            for &label in &req.drbs {
                let bearer_id = bearer_ids.next().ok_or(ControllerError::Exhausted("DRB bearer id"))?;
                drbs.push(Drb {
                    label,
                    bearer_id,
                    radio_port_id: ctl.port(),
                });
            }
            let qos_flows = req
                .flows
                .iter()
                .map(|f| QosFlow {
                    flow_id: f.flow_id,
                    ip_dst: f.ip_dst,
                    ip_proto: f.ip_proto,
                    l4_dst: f.l4_dst,
                    mapped_drb: drbs.iter().find(|d| d.label == f.drb).map_or(0, |d| d.bearer_id),
                })
                .collect();
            let session = PduSessionCtx {
                session_id: req.session_id,
                qos_flows,
                drbs,
                ngu_tunnel: NguTunnel {
                    port_id: ctl.port(),
                    local_ip: ngu_ip,
                    remote_ip: upf_ip,
                    udp_port: GTPU_UDP_PORT,
                    teid,
                },
            };
            let (p, f) = build_session_config(&ue, &session, &layer_config(rat, PortRole::Drb))?;
            ports.extend(p);
            flows.extend(f);
            ctxs.push(session);
        }
        let batch = ctl.batch(node, ports, flows);
        for m in &batch.messages {
            self.xid_owner.insert((node, m.xid), ran_ue_id);
        }
        let ue = self.ues.get_mut(&ran_ue_id).expect("checked above");
        ue.srbs.insert(
            SRB2_BEARER,
            SrbPorts {
                radio_port: srb2_port,
                sig_port: None,
                tunnel_id: None,
            },
        );
        ue.pdu_sessions = ctxs;
        ue.security_info = security_info.clone();
        ue.security_mode_sent = true;
        Ok(vec![
            Output::Open5G(batch),
            Output::Rrc(RrcDownlink {
                node,
                tunnel_id: ue.srb1_tunnel(),
                ue_tmp_id: None,
                msg: RrcMessage::SecurityModeCommand { security_info },
            }),
        ])
    }

    /// Handles an Open5G ERROR from a node. The UE whose command failed is
    /// marked failed and its procedure stops; returns that UE if any.
    pub fn on_node_error(&mut self, node: NodeId, data: &[u8]) -> Option<(u32, ErrorCode)> {
        let msg = wire::decode_message(data).ok()?;
        let Body::Error(err) = msg.body else {
            return None;
        };
        let ran_ue_id = *self.xid_owner.get(&(node, msg.xid))?;
        let ue = self.ues.get_mut(&ran_ue_id)?;
        ue.failed = true;
        Some((ran_ue_id, err.code))
    }
}

fn validate_sessions(sessions: &[SessionRequest]) -> Result<(), ControllerError> {
    let mut seen = Vec::new();
    let mut total_drbs = 0;
    for s in sessions {
        if seen.contains(&s.session_id) {
            return Err(ControllerError::InvalidSession(format!(
                "session {} listed twice",
                s.session_id
            )));
        }
        seen.push(s.session_id);
        let mut labels = s.drbs.clone();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != s.drbs.len() {
            return Err(ControllerError::InvalidSession(format!(
                "session {} repeats a DRB label",
                s.session_id
            )));
        }
        total_drbs += labels.len();
        for f in &s.flows {
            if !labels.contains(&f.drb) {
                return Err(ControllerError::InvalidSession(format!(
                    "session {} flow {} maps to missing DRB {}",
                    s.session_id, f.flow_id, f.drb
                )));
            }
        }
    }
    // Bearer ids 1..=31 minus the three SRB ids.
    if total_drbs > MAX_BEARER_ID as usize - 2 {
        return Err(ControllerError::Exhausted("DRB bearer id"));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
