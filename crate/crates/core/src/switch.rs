//! Logical-port registry and flow table of a data-plane node.
//!
//! Lookups go through a tuple-space classifier: entries are grouped by which
//! match fields they populate, and each group is an exact-match hash on those
//! fields. A lookup probes every group once and keeps the best hit under the
//! (highest priority, lowest entry id) order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::exec;
use crate::wire::{ErrorCode, FlowAction, FlowCommand, FlowMatch, FlowMod, PortId, PortMod, PortSpec, RadioKey};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwitchError {
    #[error("port {0} already exists")]
    DuplicatePort(PortId),
    #[error("port {0} does not exist")]
    UnknownPort(PortId),
    #[error("bearer (crnti={}, bearer={}) already bound to port {port}", key.crnti, key.bearer_id)]
    DuplicateBearer { key: RadioKey, port: PortId },
    #[error("tunnel already bound to port {0}")]
    DuplicateTunnel(PortId),
    #[error("output port {0} does not exist")]
    UnknownOutPort(PortId),
    #[error("an entry with the same priority and match exists (entry {0})")]
    DuplicateEntry(u64),
}

impl SwitchError {
    pub fn code(&self) -> ErrorCode {
        match self {
            SwitchError::DuplicatePort(_) => ErrorCode::DUPLICATE_PORT,
            SwitchError::UnknownPort(_) => ErrorCode::UNKNOWN_PORT,
            SwitchError::DuplicateBearer { .. } => ErrorCode::DUPLICATE_BEARER,
            SwitchError::DuplicateTunnel(_) => ErrorCode::DUPLICATE_TUNNEL,
            SwitchError::UnknownOutPort(_) => ErrorCode::UNKNOWN_OUT_PORT,
            SwitchError::DuplicateEntry(_) => ErrorCode::DUPLICATE_ENTRY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortState {
    Active,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalPort {
    pub port_id: PortId,
    pub spec: PortSpec,
    pub state: PortState,
}

/// Ports of one node, with reverse indexes for ingress resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PortRegistry {
    ports: BTreeMap<PortId, LogicalPort>,
    radio: HashMap<RadioKey, PortId>,
    gtp: HashMap<(u16, u32), PortId>,
    sig: HashMap<u32, PortId>,
}

enum IndexKey {
    Radio(RadioKey),
    Gtp(u16, u32),
    Sig(u32),
}

fn index_key(spec: &PortSpec) -> IndexKey {
    match spec {
        PortSpec::Radio(r) => IndexKey::Radio(r.key()),
        PortSpec::Gtp(g) => IndexKey::Gtp(g.udp_port, g.teid),
        PortSpec::Sig(s) => IndexKey::Sig(s.tunnel_id),
    }
}

impl PortRegistry {
    pub fn get(&self, port_id: PortId) -> Option<&LogicalPort> {
        self.ports.get(&port_id).filter(|p| p.state == PortState::Active)
    }

    pub fn contains(&self, port_id: PortId) -> bool {
        self.get(port_id).is_some()
    }

    /// Active ports in id order.
    pub fn active(&self) -> impl Iterator<Item = &LogicalPort> {
        self.ports.values().filter(|p| p.state == PortState::Active)
    }

    pub fn len(&self) -> usize {
        self.active().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn by_radio(&self, key: RadioKey) -> Option<PortId> {
        self.radio.get(&key).copied()
    }

    pub fn by_gtp(&self, udp_port: u16, teid: u32) -> Option<PortId> {
        self.gtp.get(&(udp_port, teid)).copied()
    }

    pub fn by_sig(&self, tunnel_id: u32) -> Option<PortId> {
        self.sig.get(&tunnel_id).copied()
    }

    fn holder(&self, key: &IndexKey) -> Option<PortId> {
        match key {
            IndexKey::Radio(k) => self.by_radio(*k),
            IndexKey::Gtp(u, t) => self.by_gtp(*u, *t),
            IndexKey::Sig(t) => self.by_sig(*t),
        }
    }

    fn check_unique(&self, port_id: PortId, spec: &PortSpec) -> Result<(), SwitchError> {
        let key = index_key(spec);
        match self.holder(&key) {
            Some(other) if other != port_id => Err(match key {
                IndexKey::Radio(key) => SwitchError::DuplicateBearer { key, port: other },
                _ => SwitchError::DuplicateTunnel(other),
            }),
            _ => Ok(()),
        }
    }

    fn unindex(&mut self, spec: &PortSpec) {
        match index_key(spec) {
            IndexKey::Radio(k) => self.radio.remove(&k),
            IndexKey::Gtp(u, t) => self.gtp.remove(&(u, t)),
            IndexKey::Sig(t) => self.sig.remove(&t),
        };
    }

    fn index(&mut self, port_id: PortId, spec: &PortSpec) {
        match index_key(spec) {
            IndexKey::Radio(k) => self.radio.insert(k, port_id),
            IndexKey::Gtp(u, t) => self.gtp.insert((u, t), port_id),
            IndexKey::Sig(t) => self.sig.insert(t, port_id),
        };
    }

    /// Applies a PORT_MOD. Returns the removed port on DELETE.
    fn apply(&mut self, body: &PortMod) -> Result<Option<LogicalPort>, SwitchError> {
        match body {
            PortMod::Create { port_id, spec } => {
                if self.contains(*port_id) {
                    return Err(SwitchError::DuplicatePort(*port_id));
                }
                self.check_unique(*port_id, spec)?;
                self.index(*port_id, spec);
                self.ports.insert(
                    *port_id,
                    LogicalPort {
                        port_id: *port_id,
                        spec: spec.clone(),
                        state: PortState::Active,
                    },
                );
                Ok(None)
            }
            PortMod::Modify { port_id, spec } => {
                let old = self
                    .get(*port_id)
                    .ok_or(SwitchError::UnknownPort(*port_id))?
                    .spec
                    .clone();
                self.check_unique(*port_id, spec)?;
                self.unindex(&old);
                self.index(*port_id, spec);
                if let Some(p) = self.ports.get_mut(port_id) {
                    p.spec = spec.clone();
                }
                Ok(None)
            }
            PortMod::Delete { port_id } => {
                if !self.contains(*port_id) {
                    return Err(SwitchError::UnknownPort(*port_id));
                }
                let port = self.ports.get_mut(port_id).expect("checked above");
                port.state = PortState::Deleted;
                let removed = port.clone();
                self.unindex(&removed.spec);
                Ok(Some(removed))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEntry {
    pub entry_id: u64,
    pub priority: u16,
    pub flow_match: FlowMatch,
    pub action: FlowAction,
}

impl FlowEntry {
    /// Whether the entry's match or action points at `port`.
    pub fn references(&self, port: &LogicalPort) -> bool {
        if self.flow_match.in_port == Some(port.port_id) || self.action.out_port() == port.port_id {
            return true;
        }
        match &port.spec {
            PortSpec::Radio(r) => self.flow_match.radio == Some(r.key()),
            _ => false,
        }
    }
}

/// Fields a packet exposes to the classifier. `None` means the packet does
/// not carry the field, so entries that require it cannot match.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LookupKey {
    pub in_port: Option<PortId>,
    pub radio: Option<RadioKey>,
    pub ip_dst: Option<Ipv4Addr>,
    pub ip_proto: Option<u8>,
    pub l4_dst: Option<u16>,
}

impl LookupKey {
    /// Whether every populated field of `m` equals the key's field.
    pub fn satisfies(&self, m: &FlowMatch) -> bool {
        fn field<T: PartialEq>(want: Option<T>, have: Option<T>) -> bool {
            want.is_none() || want == have
        }
        field(m.in_port, self.in_port)
            && field(m.radio, self.radio)
            && field(m.ip_dst, self.ip_dst)
            && field(m.ip_proto, self.ip_proto)
            && field(m.l4_dst, self.l4_dst)
    }
}

const F_IN_PORT: u8 = 1;
const F_RADIO: u8 = 2;
const F_IP_DST: u8 = 4;
const F_IP_PROTO: u8 = 8;
const F_L4_DST: u8 = 16;

fn mask_of(m: &FlowMatch) -> u8 {
    let mut mask = 0;
    if m.in_port.is_some() {
        mask |= F_IN_PORT;
    }
    if m.radio.is_some() {
        mask |= F_RADIO;
    }
    if m.ip_dst.is_some() {
        mask |= F_IP_DST;
    }
    if m.ip_proto.is_some() {
        mask |= F_IP_PROTO;
    }
    if m.l4_dst.is_some() {
        mask |= F_L4_DST;
    }
    mask
}

/// Restricts `key` to the fields in `mask`, or `None` if the key lacks one.
fn project(key: &LookupKey, mask: u8) -> Option<FlowMatch> {
    fn pick<T: Copy>(on: bool, v: Option<T>) -> Option<Option<T>> {
        if on {
            v.map(Some)
        } else {
            Some(None)
        }
    }
    Some(FlowMatch {
        in_port: pick(mask & F_IN_PORT != 0, key.in_port)?,
        radio: pick(mask & F_RADIO != 0, key.radio)?,
        ip_dst: pick(mask & F_IP_DST != 0, key.ip_dst)?,
        ip_proto: pick(mask & F_IP_PROTO != 0, key.ip_proto)?,
        l4_dst: pick(mask & F_L4_DST != 0, key.l4_dst)?,
    })
}

type Rank = (Reverse<u16>, u64);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTable {
    entries: BTreeMap<u64, FlowEntry>,
    next_id: u64,
    groups: BTreeMap<u8, HashMap<FlowMatch, BTreeSet<Rank>>>,
}

impl FlowTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &FlowEntry> {
        self.entries.values()
    }

    /// Entries in lookup precedence: priority descending, then entry id.
    pub fn ordered(&self) -> Vec<&FlowEntry> {
        let mut v: Vec<_> = self.entries.values().collect();
        v.sort_by_key(|e| (Reverse(e.priority), e.entry_id));
        v
    }

    fn find_duplicate(&self, priority: u16, m: &FlowMatch) -> Option<u64> {
        self.groups
            .get(&mask_of(m))?
            .get(m)?
            .iter()
            .find(|(Reverse(p), _)| *p == priority)
            .map(|(_, id)| *id)
    }

    /// Inserts an entry and returns its id.
    pub fn insert(&mut self, priority: u16, flow_match: FlowMatch, action: FlowAction) -> Result<u64, SwitchError> {
        if let Some(id) = self.find_duplicate(priority, &flow_match) {
            return Err(SwitchError::DuplicateEntry(id));
        }
        let entry_id = self.next_id;
        self.next_id += 1;
        self.groups
            .entry(mask_of(&flow_match))
            .or_default()
            .entry(flow_match)
            .or_default()
            .insert((Reverse(priority), entry_id));
        self.entries.insert(
            entry_id,
            FlowEntry {
                entry_id,
                priority,
                flow_match,
                action,
            },
        );
        Ok(entry_id)
    }

    fn remove_entry(&mut self, entry_id: u64) -> Option<FlowEntry> {
        let e = self.entries.remove(&entry_id)?;
        let mask = mask_of(&e.flow_match);
        if let Some(group) = self.groups.get_mut(&mask) {
            if let Some(set) = group.get_mut(&e.flow_match) {
                set.remove(&(Reverse(e.priority), entry_id));
                if set.is_empty() {
                    group.remove(&e.flow_match);
                }
            }
            if group.is_empty() {
                self.groups.remove(&mask);
            }
        }
        Some(e)
    }

    /// Removes every entry whose match equals `m` exactly, at any priority.
    pub fn remove_exact(&mut self, m: &FlowMatch) -> Vec<FlowEntry> {
        let ids: Vec<u64> = self
            .groups
            .get(&mask_of(m))
            .and_then(|g| g.get(m))
            .map(|set| set.iter().map(|(_, id)| *id).collect())
            .unwrap_or_default();
        let mut removed: Vec<FlowEntry> = ids.into_iter().filter_map(|id| self.remove_entry(id)).collect();
        removed.sort_by_key(|e| e.entry_id);
        removed
    }

    /// Removes entries for which `pred` holds.
    pub fn remove_where(&mut self, pred: impl Fn(&FlowEntry) -> bool) -> Vec<FlowEntry> {
        let ids: Vec<u64> = self.entries.values().filter(|e| pred(e)).map(|e| e.entry_id).collect();
        ids.into_iter().filter_map(|id| self.remove_entry(id)).collect()
    }

    pub fn lookup(&self, key: &LookupKey) -> Option<&FlowEntry> {
        let mut best: Option<Rank> = None;
        for (mask, group) in &self.groups {
            let Some(probe) = project(key, *mask) else {
                continue;
            };
            if let Some(rank) = group.get(&probe).and_then(|set| set.first()) {
                if best.is_none_or(|b| *rank < b) {
                    best = Some(*rank);
                }
            }
        }
        best.and_then(|(_, id)| self.entries.get(&id))
    }

    /// Classifies a batch of keys; results are in input order.
    pub fn lookup_batch(&self, keys: &[LookupKey]) -> Vec<Option<FlowAction>> {
        exec::map(keys, |k| self.lookup(k).map(|e| e.action))
    }

    pub fn lookup_batch_seq(&self, keys: &[LookupKey]) -> Vec<Option<FlowAction>> {
        exec::map_seq(keys, |k| self.lookup(k).map(|e| e.action))
    }

    #[cfg(feature = "parallel")]
    pub fn lookup_batch_par(&self, keys: &[LookupKey]) -> Vec<Option<FlowAction>> {
        exec::map_par(keys, |k| self.lookup(k).map(|e| e.action))
    }
}

/// Where a packet entered the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingress {
    Radio(RadioKey),
    Ngu { udp_port: u16, teid: u32 },
    Sig { tunnel_id: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketContext {
    pub ingress: Ingress,
    pub ip_dst: Option<Ipv4Addr>,
    pub ip_proto: Option<u8>,
    pub l4_dst: Option<u16>,
    pub payload: Vec<u8>,
}

impl PacketContext {
    pub fn radio(key: RadioKey, payload: Vec<u8>) -> Self {
        Self {
            ingress: Ingress::Radio(key),
            ip_dst: None,
            ip_proto: None,
            l4_dst: None,
            payload,
        }
    }
}

/// Port registry plus flow table, mutated only through Open5G commands.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Switch {
    pub ports: PortRegistry,
    pub table: FlowTable,
}

impl Switch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies a PORT_MOD. DELETE also drops every flow entry that references
    /// the port; those entries are returned.
    pub fn apply_port_mod(&mut self, body: &PortMod) -> Result<Vec<FlowEntry>, SwitchError> {
        match self.ports.apply(body)? {
            Some(port) => Ok(self.table.remove_where(|e| e.references(&port))),
            None => Ok(Vec::new()),
        }
    }

    /// Applies a FLOW_MOD. Returns the ids of inserted or removed entries.
    pub fn apply_flow_mod(&mut self, body: &FlowMod) -> Result<Vec<u64>, SwitchError> {
        match body.command {
            FlowCommand::Add => {
                let action = body.action.expect("codec guarantees ADD carries an action");
                if !self.ports.contains(action.out_port()) {
                    return Err(SwitchError::UnknownOutPort(action.out_port()));
                }
                if let Some(p) = body.flow_match.in_port {
                    if !self.ports.contains(p) {
                        return Err(SwitchError::UnknownPort(p));
                    }
                }
                Ok(vec![self.table.insert(body.priority, body.flow_match, action)?])
            }
            FlowCommand::Delete => Ok(self
                .table
                .remove_exact(&body.flow_match)
                .into_iter()
                .map(|e| e.entry_id)
                .collect()),
        }
    }

    pub fn resolve_ingress(&self, ingress: &Ingress) -> Option<PortId> {
        match ingress {
            Ingress::Radio(k) => self.ports.by_radio(*k),
            Ingress::Ngu { udp_port, teid } => self.ports.by_gtp(*udp_port, *teid),
            Ingress::Sig { tunnel_id } => self.ports.by_sig(*tunnel_id),
        }
    }

    pub fn lookup_key(&self, ctx: &PacketContext) -> LookupKey {
        LookupKey {
            in_port: self.resolve_ingress(&ctx.ingress),
            radio: match ctx.ingress {
                Ingress::Radio(k) => Some(k),
                _ => None,
            },
            ip_dst: ctx.ip_dst,
            ip_proto: ctx.ip_proto,
            l4_dst: ctx.l4_dst,
        }
    }

    /// Action of the best matching entry, or `None` for no match.
    pub fn match_packet(&self, ctx: &PacketContext) -> Option<FlowAction> {
        self.table.lookup(&self.lookup_key(ctx)).map(|e| e.action)
    }
}
