//! Deterministic discrete-event harness.
//!
//! Wires a controller, the data-plane nodes, UEs and the core stubs together
//! over implicit links (node-controller, node-core, UE-node). Every link
//! delivers after exactly one tick and in send order, and each delivery
//! becomes one trace record.

mod core_stub;
mod trace;
mod ue;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::controller::{
    CapPolicy, Controller, ControllerConfig, NgapMessage, Output, RrcMessage, SessionRequest, TunnelKind,
};
use crate::exec;
use crate::node::{DataplaneNode, Emission, NodeDescriptor, NodeId, RadioTarget};
use crate::wire::{self, PseudoIp, MAX_BEARER_ID, SRB0_BEARER, SRB1_BEARER, SRB2_BEARER};

pub use core_stub::{Amf, CoreError, SessionEndpoint, Upf, UpfEvent};
pub use trace::{fnv1a, fnv1a_parts, Channel, TraceRecord, UnknownChannel};
pub use ue::{UeError, UeModel, UeState, Uplink};

pub const SRC_NAME: &str = "SRC";
pub const AMF_NAME: &str = "AMF";
pub const UPF_NAME: &str = "UPF";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeSpec {
    pub name: String,
    /// Name of the node the UE attaches to.
    pub attach: String,
    /// Sessions the core requests for this UE.
    pub sessions: Vec<SessionRequest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub nodes: Vec<NodeDescriptor>,
    pub ues: Vec<UeSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    PowerOn {
        ue: String,
    },
    UplinkData {
        ue: String,
        bearer_id: u8,
        payload: Vec<u8>,
    },
    DownlinkData {
        ue: String,
        session_id: u8,
        ip_dst: Ipv4Addr,
        ip_proto: u8,
        l4_dst: u16,
        payload: Vec<u8>,
    },
}

impl Action {
    pub fn ue(&self) -> &str {
        match self {
            Action::PowerOn { ue } | Action::UplinkData { ue, .. } | Action::DownlinkData { ue, .. } => ue,
        }
    }
}

/// A scripted action at virtual time `at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub at: u64,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// UEs admitted per node.
    pub admission_cap: usize,
    /// Processed events before the run is abandoned.
    pub max_events: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            admission_cap: 32,
            max_events: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub topology: Topology,
    pub script: Vec<Stimulus>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("script entry {index}: {reason}")]
    Script { index: usize, reason: String },
    #[error("event budget of {limit} exceeded")]
    BudgetExceeded { limit: u64 },
    #[error("{ue}: {source}")]
    Ue { ue: String, source: UeError },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Data packet accounting. For each direction,
/// `injected == delivered + dropped` once the run is quiescent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DataCounters {
    pub uplink_injected: u64,
    pub uplink_delivered: u64,
    pub uplink_dropped: u64,
    pub downlink_injected: u64,
    pub downlink_delivered: u64,
    pub downlink_dropped: u64,
}

impl DataCounters {
    pub fn conserved(&self) -> bool {
        self.uplink_injected == self.uplink_delivered + self.uplink_dropped
            && self.downlink_injected == self.downlink_delivered + self.downlink_dropped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    Src,
    Amf,
    Upf,
    Node(usize),
    Ue(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LinkMsg {
    Config(Vec<Vec<u8>>),
    NodeError(Vec<u8>),
    Sig(Vec<u8>),
    Ngap(NgapMessage),
    Ngu {
        udp_port: u16,
        frame: Vec<u8>,
    },
    RadioUp {
        crnti: u16,
        bearer_id: u8,
        payload: Vec<u8>,
    },
    RadioDown {
        target: RadioTarget,
        payload: Vec<u8>,
    },
}

#[derive(Debug)]
enum Event {
    Stimulus(usize),
    Deliver { src: Entity, dst: Entity, msg: LinkMsg },
}

#[derive(Debug)]
struct Pending {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

fn is_srb(bearer_id: u8) -> bool {
    matches!(bearer_id, SRB0_BEARER | SRB1_BEARER | SRB2_BEARER)
}

fn bearer_channel(bearer_id: u8) -> Channel {
    match bearer_id {
        SRB0_BEARER => Channel::Srb0,
        SRB1_BEARER => Channel::Srb1,
        SRB2_BEARER => Channel::Srb2,
        _ => Channel::RadioData,
    }
}

fn rrc_kind(data: &[u8]) -> String {
    RrcMessage::from_bytes(data).map_or_else(|_| "Unknown".to_string(), |m| m.kind().to_string())
}

fn enveloped_rrc_kind(data: &[u8]) -> String {
    wire::unwrap_srb0(data).map_or_else(|_| "Unknown".to_string(), |(_, rrc)| rrc_kind(rrc))
}

pub struct Simulation {
    topology: Topology,
    script: Vec<Stimulus>,
    config: SimConfig,
    controller: Controller,
    nodes: Vec<DataplaneNode>,
    ues: Vec<UeModel>,
    ue_node: Vec<usize>,
    amf: Amf,
    upf: Upf,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    now: u64,
    processed: u64,
    trace: Vec<TraceRecord>,
    data: DataCounters,
    diagnostics: Vec<String>,
    config_log: Vec<Vec<Vec<Vec<u8>>>>,
}

impl Simulation {
    /// Builds the topology and queues the bootstrap of every node at time 0.
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let Scenario {
            topology,
            script,
            config,
        } = scenario;
        let node_index = validate_topology(&topology)?;
        let ue_node: Vec<usize> = topology.ues.iter().map(|u| node_index[u.attach.as_str()]).collect();
        validate_script(&topology, &script)?;

        let mut rng = ChaCha8Rng::seed_from_u64(topology.seed);
        let mut taken = HashSet::new();
        let ues = topology
            .ues
            .iter()
            .zip(&ue_node)
            .map(|(spec, &node)| {
                let tmp_id = loop {
                    let id: u32 = rng.random();
                    if taken.insert((node, id)) {
                        break id;
                    }
                };
                UeModel::new(spec.name.clone(), tmp_id)
            })
            .collect();

        let mut controller = Controller::new(
            ControllerConfig::default(),
            Box::new(CapPolicy {
                cap: config.admission_cap,
            }),
        );
        let nodes = topology
            .nodes
            .iter()
            .map(|d| {
                controller.add_node(d).map_err(|e| SimError::Topology(e.to_string()))?;
                Ok(DataplaneNode::new(d.clone()))
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let amf = Amf::new(topology.ues.iter().map(|u| (u.name.clone(), u.sessions.clone())));

        let config_log = vec![Vec::new(); nodes.len()];
        let mut sim = Self {
            config_log,
            topology,
            script,
            config,
            controller,
            nodes,
            ues,
            ue_node,
            amf,
            upf: Upf::default(),
            rng,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            processed: 0,
            trace: Vec::new(),
            data: DataCounters::default(),
            diagnostics: Vec::new(),
        };
        for i in 0..sim.nodes.len() {
            let batch = sim
                .controller
                .bootstrap_node(sim.nodes[i].id())
                .map_err(|e| SimError::Topology(e.to_string()))?;
            sim.send(Entity::Src, Entity::Node(i), LinkMsg::Config(batch.encode()));
        }
        for i in 0..sim.script.len() {
            let at = sim.script[i].at;
            sim.push(at, Event::Stimulus(i));
        }
        Ok(sim)
    }

    fn push(&mut self, time: u64, event: Event) {
        self.queue.push(Reverse(Pending {
            time,
            seq: self.seq,
            event,
        }));
        self.seq += 1;
    }

    fn send(&mut self, src: Entity, dst: Entity, msg: LinkMsg) {
        self.push(self.now + 1, Event::Deliver { src, dst, msg });
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn nodes(&self) -> &[DataplaneNode] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&DataplaneNode> {
        self.nodes.iter().find(|n| n.descriptor().name == name)
    }

    pub fn ue(&self, name: &str) -> Option<&UeModel> {
        self.ues.iter().find(|u| u.name == name)
    }

    pub fn upf(&self) -> &Upf {
        &self.upf
    }

    pub fn data_counters(&self) -> DataCounters {
        self.data
    }

    /// Non-fatal failures reported by entities during the run.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// Open5G batches delivered to `node`, in order, as encoded messages.
    pub fn config_batches(&self, node: &str) -> Option<&[Vec<Vec<u8>>]> {
        let i = self.nodes.iter().position(|n| n.descriptor().name == node)?;
        Some(&self.config_log[i])
    }

    pub fn is_quiescent(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn entity_name(&self, e: Entity) -> &str {
        match e {
            Entity::Src => SRC_NAME,
            Entity::Amf => AMF_NAME,
            Entity::Upf => UPF_NAME,
            Entity::Node(i) => &self.topology.nodes[i].name,
            Entity::Ue(i) => &self.ues[i].name,
        }
    }

    /// Processes the next event. Returns `false` once nothing is pending.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(Reverse(p)) = self.queue.pop() else {
            return Ok(false);
        };
        self.processed += 1;
        if self.processed > self.config.max_events {
            return Err(SimError::BudgetExceeded {
                limit: self.config.max_events,
            });
        }
        self.now = p.time;
        match p.event {
            Event::Stimulus(i) => self.stimulus(i)?,
            Event::Deliver { src, dst, msg } => {
                self.record(src, dst, &msg);
                self.deliver(src, dst, msg)?;
            }
        }
        Ok(true)
    }

    /// Runs to quiescence.
    pub fn run(&mut self) -> Result<(), SimError> {
        while self.step()? {}
        Ok(())
    }

    /// Runs until `step` records exist or the run is quiescent.
    pub fn run_to_step(&mut self, step: u64) -> Result<(), SimError> {
        while (self.trace.len() as u64) < step && self.step()? {}
        Ok(())
    }

    fn record(&mut self, src: Entity, dst: Entity, msg: &LinkMsg) {
        let (channel, kind, digest) = self.classify(msg);
        let rec = TraceRecord {
            step: self.trace.len() as u64 + 1,
            time: self.now,
            src: self.entity_name(src).to_string(),
            dst: self.entity_name(dst).to_string(),
            channel,
            kind,
            digest,
        };
        self.trace.push(rec);
    }

    fn classify(&self, msg: &LinkMsg) -> (Channel, String, u64) {
        match msg {
            LinkMsg::Config(b) => (Channel::Open5G, "Open5GConfig".into(), fnv1a_parts(b)),
            LinkMsg::NodeError(b) => (Channel::Open5G, "Open5GError".into(), fnv1a(b)),
            LinkMsg::Sig(frame) => {
                let (channel, kind) = match wire::decap_sig(frame) {
                    Ok((tunnel_id, inner)) => match self.controller.tunnel(tunnel_id).map(|b| b.kind) {
                        Some(TunnelKind::Srb0) => (Channel::Srb0, enveloped_rrc_kind(inner)),
                        Some(TunnelKind::Srb1 { .. }) => (Channel::Srb1, rrc_kind(inner)),
                        None if wire::unwrap_srb0(inner).is_ok() => (Channel::Srb0, enveloped_rrc_kind(inner)),
                        None => (Channel::Srb1, rrc_kind(inner)),
                    },
                    Err(_) => (Channel::Srb1, "Unknown".into()),
                };
                (channel, kind, fnv1a(frame))
            }
            LinkMsg::Ngap(m) => (Channel::Ngap, m.kind().into(), fnv1a(&m.to_bytes())),
            LinkMsg::Ngu { frame, .. } => (Channel::Ngu, "GTPU".into(), fnv1a(frame)),
            LinkMsg::RadioUp { bearer_id, payload, .. } => (
                bearer_channel(*bearer_id),
                self.radio_kind(*bearer_id, payload),
                fnv1a(payload),
            ),
            LinkMsg::RadioDown { target, payload } => {
                let bearer_id = match target {
                    RadioTarget::Common { .. } => SRB0_BEARER,
                    RadioTarget::Bearer(k) => k.bearer_id,
                };
                (
                    bearer_channel(bearer_id),
                    self.radio_kind(bearer_id, payload),
                    fnv1a(payload),
                )
            }
        }
    }

    fn radio_kind(&self, bearer_id: u8, payload: &[u8]) -> String {
        match bearer_channel(bearer_id) {
            Channel::Srb0 => enveloped_rrc_kind(payload),
            Channel::RadioData => "Data".into(),
            _ => rrc_kind(payload),
        }
    }

    fn ue_index(&self, name: &str) -> usize {
        self.ues.iter().position(|u| u.name == name).expect("script validated")
    }

    fn stimulus(&mut self, i: usize) -> Result<(), SimError> {
        let action = self.script[i].action.clone();
        let u = self.ue_index(action.ue());
        let node = Entity::Node(self.ue_node[u]);
        let ue_err = |source| SimError::Ue {
            ue: action.ue().to_string(),
            source,
        };
        match &action {
            Action::PowerOn { .. } => {
                let (crnti, bearer_id, payload) = self.ues[u].power_on().map_err(ue_err)?;
                self.send(
                    Entity::Ue(u),
                    node,
                    LinkMsg::RadioUp {
                        crnti,
                        bearer_id,
                        payload,
                    },
                );
            }
            Action::UplinkData { bearer_id, payload, .. } => {
                let (crnti, bearer_id, payload) = self.ues[u].send_data(*bearer_id, payload.clone()).map_err(ue_err)?;
                self.data.uplink_injected += 1;
                self.send(
                    Entity::Ue(u),
                    node,
                    LinkMsg::RadioUp {
                        crnti,
                        bearer_id,
                        payload,
                    },
                );
            }
            Action::DownlinkData {
                ue,
                session_id,
                ip_dst,
                ip_proto,
                l4_dst,
                payload,
            } => {
                let hdr = PseudoIp::new(*ip_dst, *ip_proto, *l4_dst);
                let (ep, frame) = self.upf.downlink(ue, *session_id, hdr, payload)?;
                let target = self
                    .nodes
                    .iter()
                    .position(|n| n.descriptor().ngu_ip == ep.ran_ip)
                    .ok_or_else(|| SimError::Script {
                        index: i,
                        reason: format!("no node with NG-U address {}", ep.ran_ip),
                    })?;
                self.data.downlink_injected += 1;
                self.send(
                    Entity::Upf,
                    Entity::Node(target),
                    LinkMsg::Ngu {
                        udp_port: ep.udp_port,
                        frame,
                    },
                );
            }
        }
        Ok(())
    }

    fn deliver(&mut self, src: Entity, dst: Entity, msg: LinkMsg) -> Result<(), SimError> {
        match dst {
            Entity::Node(i) => self.at_node(i, msg),
            Entity::Src => self.at_src(src, msg),
            Entity::Amf => self.at_amf(msg),
            Entity::Upf => {
                if let LinkMsg::Ngu { frame, .. } = msg {
                    match self.upf.uplink(&frame) {
                        UpfEvent::Uplink { .. } => self.data.uplink_delivered += 1,
                        UpfEvent::BadFrame => {
                            self.data.uplink_dropped += 1;
                            self.diagnostics.push(format!("{UPF_NAME}: {}", CoreError::BadFrame));
                        }
                    }
                }
            }
            Entity::Ue(u) => self.at_ue(u, msg),
        }
        Ok(())
    }

    fn at_node(&mut self, i: usize, msg: LinkMsg) {
        let before = self.nodes[i].drop_count();
        let (emissions, data_dir) = match msg {
            LinkMsg::Config(batch) => {
                let out = self.nodes[i].handle_open5g_batch(&batch);
                self.config_log[i].push(batch);
                (out, None)
            }
            LinkMsg::Sig(frame) => (self.nodes[i].ingress_sigtunnel(&frame).into_iter().collect(), None),
            LinkMsg::Ngu { udp_port, frame } => (
                self.nodes[i].ingress_ngu(udp_port, &frame).into_iter().collect(),
                Some(false),
            ),
            LinkMsg::RadioUp {
                crnti,
                bearer_id,
                payload,
            } => (
                self.nodes[i]
                    .ingress_radio(crnti, bearer_id, payload)
                    .into_iter()
                    .collect::<Vec<_>>(),
                (!is_srb(bearer_id)).then_some(true),
            ),
            other => {
                self.diagnostics
                    .push(format!("{}: unexpected {other:?}", self.entity_name(Entity::Node(i))));
                (Vec::new(), None)
            }
        };
        let dropped = self.nodes[i].drop_count() - before;
        match data_dir {
            Some(true) => self.data.uplink_dropped += dropped,
            Some(false) => self.data.downlink_dropped += dropped,
            None if dropped > 0 => self.diagnostics.push(format!(
                "{}: dropped {dropped} signaling packet(s)",
                self.entity_name(Entity::Node(i))
            )),
            None => {}
        }
        for e in emissions {
            self.route_emission(i, e, data_dir);
        }
    }

    fn route_emission(&mut self, i: usize, e: Emission, data_dir: Option<bool>) {
        let from = Entity::Node(i);
        match e {
            Emission::Open5GError(b) => self.send(from, Entity::Src, LinkMsg::NodeError(b)),
            Emission::Sig(f) => self.send(from, Entity::Src, LinkMsg::Sig(f)),
            Emission::Ngu { udp_port, frame, .. } => self.send(from, Entity::Upf, LinkMsg::Ngu { udp_port, frame }),
            Emission::Radio { target, payload } => {
                let ue = (0..self.ues.len()).find(|&u| {
                    self.ue_node[u] == i
                        && match target {
                            RadioTarget::Common { ue_tmp_id } => self.ues[u].tmp_id == ue_tmp_id,
                            RadioTarget::Bearer(k) => self.ues[u].crnti == Some(k.crnti),
                        }
                });
                match ue {
                    Some(u) => self.send(from, Entity::Ue(u), LinkMsg::RadioDown { target, payload }),
                    None => {
                        match data_dir {
                            Some(true) => self.data.uplink_dropped += 1,
                            Some(false) => self.data.downlink_dropped += 1,
                            None => {}
                        }
                        self.diagnostics
                            .push(format!("{}: no UE for {target:?}", self.entity_name(from)));
                    }
                }
            }
        }
    }

    fn at_src(&mut self, src: Entity, msg: LinkMsg) {
        let node = match src {
            Entity::Node(i) => Some(self.nodes[i].id()),
            _ => None,
        };
        let result = match (msg, node) {
            (LinkMsg::Sig(frame), Some(node)) => self.controller.on_sig_frame(node, &frame),
            (LinkMsg::Ngap(m), None) => self.controller.on_ngap(m),
            (LinkMsg::NodeError(bytes), Some(node)) => {
                if let Some((ue, code)) = self.controller.on_node_error(node, &bytes) {
                    self.diagnostics
                        .push(format!("{SRC_NAME}: UE {ue} aborted by {}", code.name()));
                }
                return;
            }
            (other, _) => {
                self.diagnostics.push(format!("{SRC_NAME}: unexpected {other:?}"));
                return;
            }
        };
        match result {
            Ok(outputs) => self.emit_controller(outputs),
            Err(e) => self.diagnostics.push(format!("{SRC_NAME}: {e}")),
        }
    }

    fn node_index(&self, id: NodeId) -> usize {
        self.nodes
            .iter()
            .position(|n| n.id() == id)
            .expect("controller only knows simulated nodes")
    }

    fn emit_controller(&mut self, outputs: Vec<Output>) {
        for o in outputs {
            match o {
                Output::Open5G(batch) => {
                    let n = self.node_index(batch.node);
                    self.send(Entity::Src, Entity::Node(n), LinkMsg::Config(batch.encode()));
                }
                Output::Rrc(d) => {
                    let n = self.node_index(d.node);
                    self.send(Entity::Src, Entity::Node(n), LinkMsg::Sig(d.frame()));
                }
                Output::Ngap(m) => self.send(Entity::Src, Entity::Amf, LinkMsg::Ngap(m)),
            }
        }
    }

    fn at_amf(&mut self, msg: LinkMsg) {
        let LinkMsg::Ngap(m) = msg else {
            self.diagnostics.push(format!("{AMF_NAME}: unexpected {msg:?}"));
            return;
        };
        let mut security_info = vec![0u8; 16];
        self.rng.fill(&mut security_info[..]);
        match self.amf.handle(&m, security_info, &mut self.upf) {
            Ok(Some(reply)) => self.send(Entity::Amf, Entity::Src, LinkMsg::Ngap(reply)),
            Ok(None) => {}
            Err(e) => self.diagnostics.push(format!("{AMF_NAME}: {e}")),
        }
    }

    fn at_ue(&mut self, u: usize, msg: LinkMsg) {
        let LinkMsg::RadioDown { target, payload } = msg else {
            return;
        };
        let reply = match target {
            RadioTarget::Common { .. } => self.ues[u].on_common(&payload),
            RadioTarget::Bearer(k) if is_srb(k.bearer_id) => self.ues[u].on_bearer(k.bearer_id, &payload),
            RadioTarget::Bearer(k) => {
                let before = self.ues[u].received.len();
                self.ues[u].on_bearer(k.bearer_id, &payload);
                if self.ues[u].received.len() > before {
                    self.data.downlink_delivered += 1;
                } else {
                    self.data.downlink_dropped += 1;
                }
                None
            }
        };
        if let Some((crnti, bearer_id, payload)) = reply {
            let node = Entity::Node(self.ue_node[u]);
            self.send(
                Entity::Ue(u),
                node,
                LinkMsg::RadioUp {
                    crnti,
                    bearer_id,
                    payload,
                },
            );
        }
    }
}

fn validate_topology(t: &Topology) -> Result<BTreeMap<&str, usize>, SimError> {
    let mut names: HashSet<&str> = [SRC_NAME, AMF_NAME, UPF_NAME].into_iter().collect();
    let mut ids = HashSet::new();
    let mut ips = HashSet::new();
    let mut index = BTreeMap::new();
    for (i, n) in t.nodes.iter().enumerate() {
        if !names.insert(&n.name) {
            return Err(SimError::Topology(format!("duplicate entity name {:?}", n.name)));
        }
        if !ids.insert(n.node_id) {
            return Err(SimError::Topology(format!("duplicate node id {}", n.node_id)));
        }
        if !ips.insert(n.ngu_ip) {
            return Err(SimError::Topology(format!("duplicate NG-U address {}", n.ngu_ip)));
        }
        index.insert(n.name.as_str(), i);
    }
    for u in &t.ues {
        if !names.insert(&u.name) {
            return Err(SimError::Topology(format!("duplicate entity name {:?}", u.name)));
        }
        if !index.contains_key(u.attach.as_str()) {
            return Err(SimError::Topology(format!(
                "UE {:?} attaches to unknown node {:?}",
                u.name, u.attach
            )));
        }
    }
    Ok(index)
}

fn validate_script(t: &Topology, script: &[Stimulus]) -> Result<(), SimError> {
    let mut last = 0;
    for (index, s) in script.iter().enumerate() {
        let err = |reason: String| SimError::Script { index, reason };
        if s.at < last {
            return Err(err(format!("time {} goes backwards", s.at)));
        }
        last = s.at;
        if !t.ues.iter().any(|u| u.name == s.action.ue()) {
            return Err(err(format!("unknown UE {:?}", s.action.ue())));
        }
        if let Action::UplinkData { bearer_id, .. } = s.action {
            if is_srb(bearer_id) || bearer_id == 0 || bearer_id > MAX_BEARER_ID {
                return Err(err(format!("bearer {bearer_id} is not a data bearer")));
            }
        }
    }
    Ok(())
}

/// Runs a scenario to quiescence and returns its trace.
pub fn run_scenario(scenario: Scenario) -> Result<Vec<TraceRecord>, SimError> {
    let mut sim = Simulation::new(scenario)?;
    sim.run()?;
    Ok(sim.into_trace())
}

/// Runs independent scenarios, in parallel when enabled. Results are in
/// input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<Vec<TraceRecord>, SimError>> {
    exec::map(scenarios, |s| run_scenario(s.clone()))
}

/// Sequential reference for [`run_batch`].
pub fn run_batch_seq(scenarios: &[Scenario]) -> Vec<Result<Vec<TraceRecord>, SimError>> {
    exec::map_seq(scenarios, |s| run_scenario(s.clone()))
}

#[cfg(test)]
mod tests;
