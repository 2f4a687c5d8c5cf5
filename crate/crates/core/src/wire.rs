//! Open5G wire codec and the two data-path encapsulations.
//!
//! Every Open5G message starts with an 8-byte big-endian header
//! (`version u8 | type u8 | length u16 | xid u32`) followed by a type-specific
//! body. The encoder always produces the canonical form and the decoder only
//! accepts the canonical form, so `encode(decode(b)) == b` for every accepted
//! byte string `b`.
//!
//! Data paths use two fixed 8-byte encapsulations: the GTP-U G-PDU header
//! toward the core and a GRE header with the key bit set toward the
//! controller.

use std::fmt;
use std::net::Ipv4Addr;

use thiserror::Error;

/// Protocol version carried in every header.
pub const OPEN5G_VERSION: u8 = 0x01;
/// Size of the common header.
pub const HEADER_LEN: usize = 8;
/// Largest encodable message (the length field is 16 bits).
pub const MAX_MESSAGE_LEN: usize = u16::MAX as usize;

/// Radio bearer numbering shared by the controller and the nodes.
///
/// SRBs and DRBs live in one per-UE bearer-id space: SRB0 is the common
/// channel, SRB1 and SRB2 take ids 3 and 4, DRBs take every other id.
pub const SRB0_BEARER: u8 = 0;
pub const SRB1_BEARER: u8 = 3;
pub const SRB2_BEARER: u8 = 4;
pub const MAX_BEARER_ID: u8 = 31;
/// Largest C-RNTI usable for a dedicated bearer.
pub const MAX_CRNTI: u16 = 65523;

pub type PortId = u32;

/// Layer registry for [`ConfigTlv::tlv_type`].
pub mod layer {
    pub const SDAP: u16 = 1;
    pub const PDCP: u16 = 2;
    pub const RLC: u16 = 3;
    pub const MAC: u16 = 4;
    pub const PHY: u16 = 5;
    pub const GTP: u16 = 6;
}

/// Match TLV type codes.
mod match_tlv {
    pub const IN_PORT: u16 = 1;
    pub const CRNTI: u16 = 2;
    pub const BEARER_ID: u16 = 3;
    pub const IP_DST: u16 = 4;
    pub const IP_PROTO: u16 = 5;
    pub const L4_DST: u16 = 6;
}

const PORT_CLASS_RADIO: u8 = 0;
const PORT_CLASS_GTP: u8 = 1;
const PORT_CLASS_SIG: u8 = 2;
const PORT_CLASS_NONE: u8 = 0xFF;

const ACTION_NONE: u8 = 0;
const ACTION_OUTPUT: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Error = 2,
    PortMod = 3,
    FlowMod = 4,
}

impl MsgType {
    pub fn from_u8(value: u8) -> Option<Self> {
        match value {
            1 => Some(Self::Hello),
            2 => Some(Self::Error),
            3 => Some(Self::PortMod),
            4 => Some(Self::FlowMod),
            _ => None,
        }
    }
}

/// Reportable error code carried in ERROR messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErrorCode(pub u16);

impl ErrorCode {
    pub const TRUNCATED: Self = Self(1);
    pub const BAD_VERSION: Self = Self(2);
    pub const UNKNOWN_TYPE: Self = Self(3);
    pub const MALFORMED_TLV: Self = Self(4);
    pub const BAD_LENGTH: Self = Self(5);
    pub const TRAILING_BYTES: Self = Self(6);
    pub const INVALID_MESSAGE: Self = Self(7);
    pub const DUPLICATE_PORT: Self = Self(16);
    pub const UNKNOWN_PORT: Self = Self(17);
    pub const DUPLICATE_BEARER: Self = Self(18);
    pub const DUPLICATE_TUNNEL: Self = Self(19);
    pub const UNKNOWN_OUT_PORT: Self = Self(20);
    pub const DUPLICATE_ENTRY: Self = Self(21);
    pub const UNSUPPORTED_LAYER: Self = Self(22);

    pub fn name(self) -> &'static str {
        match self {
            Self::TRUNCATED => "Truncated",
            Self::BAD_VERSION => "BadVersion",
            Self::UNKNOWN_TYPE => "UnknownType",
            Self::MALFORMED_TLV => "MalformedTlv",
            Self::BAD_LENGTH => "BadLength",
            Self::TRAILING_BYTES => "TrailingBytes",
            Self::INVALID_MESSAGE => "InvalidMessage",
            Self::DUPLICATE_PORT => "DuplicatePort",
            Self::UNKNOWN_PORT => "UnknownPort",
            Self::DUPLICATE_BEARER => "DuplicateBearer",
            Self::DUPLICATE_TUNNEL => "DuplicateTunnel",
            Self::UNKNOWN_OUT_PORT => "UnknownOutPort",
            Self::DUPLICATE_ENTRY => "DuplicateEntry",
            Self::UNSUPPORTED_LAYER => "UnsupportedLayer",
            _ => "Unknown",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.0)
    }
}

/// Structural invariant violated by a message.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Invalid {
    #[error("SRB bearer id {0} is not one of 0, 3, 4")]
    SrbBearerId(u8),
    #[error("DRB bearer id {0} outside the DRB range")]
    DrbBearerId(u8),
    #[error("C-RNTI {crnti} not valid for bearer {bearer_id}")]
    Crnti { crnti: u16, bearer_id: u8 },
    #[error("flow match is empty")]
    EmptyMatch,
    #[error("FLOW_MOD ADD needs exactly one action")]
    MissingAction,
    #[error("FLOW_MOD DELETE carries no action")]
    UnexpectedAction,
    #[error("crnti and bearer_id must appear together in a match")]
    SplitRadioKey,
    #[error("{what} of {len} bytes exceeds 65535")]
    TooLong { what: &'static str, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("bad version 0x{0:02x}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("malformed body: {0}")]
    MalformedTlv(&'static str),
    #[error("header length {0} shorter than the header")]
    BadLength(u16),
    #[error("{extra} bytes past the declared length")]
    TrailingBytes { extra: usize },
    #[error("invalid message: {0}")]
    InvalidMessage(#[from] Invalid),
    #[error("bad GTP-U flags 0x{0:02x}")]
    BadGtpuFlags(u8),
    #[error("GTP-U message type 0x{0:02x} is not G-PDU")]
    BadGtpuType(u8),
    #[error("GTP-U length {declared} does not match payload of {actual} bytes")]
    GtpuLength { declared: u16, actual: usize },
    #[error("bad signaling tunnel flags 0x{0:04x}")]
    BadSigFlags(u16),
    #[error("bad signaling tunnel protocol 0x{0:04x}")]
    BadSigProtocol(u16),
    #[error("payload of {0} bytes does not fit a 16-bit length")]
    PayloadTooLarge(usize),
}

impl WireError {
    pub fn code(&self) -> ErrorCode {
        match self {
            Self::Truncated { .. } => ErrorCode::TRUNCATED,
            Self::BadVersion(_) => ErrorCode::BAD_VERSION,
            Self::UnknownType(_) => ErrorCode::UNKNOWN_TYPE,
            Self::MalformedTlv(_) => ErrorCode::MALFORMED_TLV,
            Self::BadLength(_) => ErrorCode::BAD_LENGTH,
            Self::TrailingBytes { .. } => ErrorCode::TRAILING_BYTES,
            _ => ErrorCode::INVALID_MESSAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub xid: u32,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Hello,
    Error(ErrorBody),
    PortMod(PortMod),
    FlowMod(FlowMod),
}

impl Body {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Body::Hello => MsgType::Hello,
            Body::Error(_) => MsgType::Error,
            Body::PortMod(_) => MsgType::PortMod,
            Body::FlowMod(_) => MsgType::FlowMod,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub detail: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortMod {
    Create { port_id: PortId, spec: PortSpec },
    Modify { port_id: PortId, spec: PortSpec },
    Delete { port_id: PortId },
}

impl PortMod {
    pub fn port_id(&self) -> PortId {
        match self {
            PortMod::Create { port_id, .. } | PortMod::Modify { port_id, .. } | PortMod::Delete { port_id } => *port_id,
        }
    }

    pub fn spec(&self) -> Option<&PortSpec> {
        match self {
            PortMod::Create { spec, .. } | PortMod::Modify { spec, .. } => Some(spec),
            PortMod::Delete { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BearerKind {
    Srb,
    Drb,
}

/// Opaque per-layer configuration blob.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConfigTlv {
    pub tlv_type: u16,
    pub value: Vec<u8>,
}

impl ConfigTlv {
    pub fn new(tlv_type: u16, value: impl Into<Vec<u8>>) -> Self {
        Self {
            tlv_type,
            value: value.into(),
        }
    }
}

/// Radio-side key of a bearer port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RadioKey {
    pub crnti: u16,
    pub bearer_id: u8,
}

impl RadioKey {
    pub const fn new(crnti: u16, bearer_id: u8) -> Self {
        Self { crnti, bearer_id }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RadioBearer {
    pub crnti: u16,
    pub bearer_id: u8,
    pub kind: BearerKind,
    pub layer_config: Vec<ConfigTlv>,
}

impl RadioBearer {
    pub fn key(&self) -> RadioKey {
        RadioKey::new(self.crnti, self.bearer_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GtpTunnel {
    pub local_ip: Ipv4Addr,
    pub remote_ip: Ipv4Addr,
    pub udp_port: u16,
    pub teid: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SigTunnel {
    pub controller_ip: Ipv4Addr,
    pub tunnel_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PortSpec {
    Radio(RadioBearer),
    Gtp(GtpTunnel),
    Sig(SigTunnel),
}

impl fmt::Display for PortSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortSpec::Radio(r) => write!(f, "radio(crnti={},bearer={})", r.crnti, r.bearer_id),
            PortSpec::Gtp(g) => write!(f, "gtp(udp={},teid={})", g.udp_port, g.teid),
            PortSpec::Sig(s) => write!(f, "sig(tunnel={})", s.tunnel_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowCommand {
    Add,
    Delete,
}

/// Match fields; `None` is a wildcard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FlowMatch {
    pub in_port: Option<PortId>,
    pub radio: Option<RadioKey>,
    pub ip_dst: Option<Ipv4Addr>,
    pub ip_proto: Option<u8>,
    pub l4_dst: Option<u16>,
}

impl FlowMatch {
    pub fn is_empty(&self) -> bool {
        *self == FlowMatch::default()
    }

    pub fn radio(crnti: u16, bearer_id: u8) -> Self {
        Self {
            radio: Some(RadioKey::new(crnti, bearer_id)),
            ..Self::default()
        }
    }

    pub fn in_port(port: PortId) -> Self {
        Self {
            in_port: Some(port),
            ..Self::default()
        }
    }

    pub fn flow(ip_dst: Ipv4Addr, ip_proto: u8, l4_dst: u16) -> Self {
        Self {
            ip_dst: Some(ip_dst),
            ip_proto: Some(ip_proto),
            l4_dst: Some(l4_dst),
            ..Self::default()
        }
    }
}

impl fmt::Display for FlowMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(p) = self.in_port {
            parts.push(format!("in_port={p}"));
        }
        if let Some(k) = self.radio {
            parts.push(format!("crnti={},bearer={}", k.crnti, k.bearer_id));
        }
        if let Some(ip) = self.ip_dst {
            parts.push(format!("ip_dst={ip}"));
        }
        if let Some(p) = self.ip_proto {
            parts.push(format!("proto={p}"));
        }
        if let Some(p) = self.l4_dst {
            parts.push(format!("l4_dst={p}"));
        }
        if parts.is_empty() {
            f.write_str("*")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowAction {
    Output(PortId),
}

impl FlowAction {
    pub fn out_port(&self) -> PortId {
        match self {
            FlowAction::Output(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMod {
    pub command: FlowCommand,
    pub priority: u16,
    pub flow_match: FlowMatch,
    pub action: Option<FlowAction>,
}

impl FlowMod {
    pub fn add(priority: u16, flow_match: FlowMatch, out_port: PortId) -> Self {
        Self {
            command: FlowCommand::Add,
            priority,
            flow_match,
            action: Some(FlowAction::Output(out_port)),
        }
    }

    pub fn delete(priority: u16, flow_match: FlowMatch) -> Self {
        Self {
            command: FlowCommand::Delete,
            priority,
            flow_match,
            action: None,
        }
    }
}

fn validate_spec(spec: &PortSpec) -> Result<(), Invalid> {
    let PortSpec::Radio(r) = spec else {
        return Ok(());
    };
    match r.kind {
        BearerKind::Srb => {
            if ![SRB0_BEARER, SRB1_BEARER, SRB2_BEARER].contains(&r.bearer_id) {
                return Err(Invalid::SrbBearerId(r.bearer_id));
            }
        }
        BearerKind::Drb => {
            if r.bearer_id == SRB0_BEARER
                || r.bearer_id == SRB1_BEARER
                || r.bearer_id == SRB2_BEARER
                || r.bearer_id > MAX_BEARER_ID
            {
                return Err(Invalid::DrbBearerId(r.bearer_id));
            }
        }
    }
    // Only the common SRB0 port is keyed by C-RNTI 0.
    let common = r.bearer_id == SRB0_BEARER;
    if (common && r.crnti != 0) || (!common && !(1..=MAX_CRNTI).contains(&r.crnti)) {
        return Err(Invalid::Crnti {
            crnti: r.crnti,
            bearer_id: r.bearer_id,
        });
    }
    for tlv in &r.layer_config {
        if tlv.value.len() > u16::MAX as usize {
            return Err(Invalid::TooLong {
                what: "config TLV",
                len: tlv.value.len(),
            });
        }
    }
    Ok(())
}

/// Checks the structural invariants the codec enforces on both directions.
pub fn validate(msg: &Message) -> Result<(), Invalid> {
    match &msg.body {
        Body::Hello => Ok(()),
        Body::Error(e) => {
            if e.detail.len() > u16::MAX as usize {
                return Err(Invalid::TooLong {
                    what: "error detail",
                    len: e.detail.len(),
                });
            }
            Ok(())
        }
        Body::PortMod(pm) => pm.spec().map_or(Ok(()), validate_spec),
        Body::FlowMod(fm) => {
            if fm.flow_match.is_empty() {
                return Err(Invalid::EmptyMatch);
            }
            match (fm.command, fm.action) {
                (FlowCommand::Add, None) => Err(Invalid::MissingAction),
                (FlowCommand::Delete, Some(_)) => Err(Invalid::UnexpectedAction),
                _ => Ok(()),
            }
        }
    }
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_tlv(out: &mut Vec<u8>, tlv_type: u16, value: &[u8]) {
    put_u16(out, tlv_type);
    put_u16(out, value.len() as u16);
    out.extend_from_slice(value);
}

fn encode_port_mod(out: &mut Vec<u8>, pm: &PortMod) {
    let command = match pm {
        PortMod::Create { .. } => 0,
        PortMod::Modify { .. } => 1,
        PortMod::Delete { .. } => 2,
    };
    out.push(command);
    let class = match pm.spec() {
        None => PORT_CLASS_NONE,
        Some(PortSpec::Radio(_)) => PORT_CLASS_RADIO,
        Some(PortSpec::Gtp(_)) => PORT_CLASS_GTP,
        Some(PortSpec::Sig(_)) => PORT_CLASS_SIG,
    };
    out.push(class);
    put_u32(out, pm.port_id());
    match pm.spec() {
        None => {}
        Some(PortSpec::Radio(r)) => {
            put_u16(out, r.crnti);
            out.push(r.bearer_id);
            out.push(match r.kind {
                BearerKind::Srb => 0,
                BearerKind::Drb => 1,
            });
            for tlv in &r.layer_config {
                put_tlv(out, tlv.tlv_type, &tlv.value);
            }
        }
        Some(PortSpec::Gtp(g)) => {
            out.extend_from_slice(&g.local_ip.octets());
            out.extend_from_slice(&g.remote_ip.octets());
            put_u16(out, g.udp_port);
            put_u32(out, g.teid);
        }
        Some(PortSpec::Sig(s)) => {
            out.extend_from_slice(&s.controller_ip.octets());
            put_u32(out, s.tunnel_id);
        }
    }
}

fn encode_flow_mod(out: &mut Vec<u8>, fm: &FlowMod) {
    out.push(match fm.command {
        FlowCommand::Add => 0,
        FlowCommand::Delete => 1,
    });
    put_u16(out, fm.priority);
    let m = &fm.flow_match;
    let mut tlvs: Vec<(u16, Vec<u8>)> = Vec::with_capacity(6);
    if let Some(p) = m.in_port {
        tlvs.push((match_tlv::IN_PORT, p.to_be_bytes().to_vec()));
    }
    if let Some(k) = m.radio {
        tlvs.push((match_tlv::CRNTI, k.crnti.to_be_bytes().to_vec()));
        tlvs.push((match_tlv::BEARER_ID, vec![k.bearer_id]));
    }
    if let Some(ip) = m.ip_dst {
        tlvs.push((match_tlv::IP_DST, ip.octets().to_vec()));
    }
    if let Some(p) = m.ip_proto {
        tlvs.push((match_tlv::IP_PROTO, vec![p]));
    }
    if let Some(p) = m.l4_dst {
        tlvs.push((match_tlv::L4_DST, p.to_be_bytes().to_vec()));
    }
    out.push(tlvs.len() as u8);
    for (t, v) in &tlvs {
        put_tlv(out, *t, v);
    }
    match fm.action {
        Some(FlowAction::Output(port)) => {
            out.push(ACTION_OUTPUT);
            put_u32(out, port);
        }
        None => {
            out.push(ACTION_NONE);
            put_u32(out, 0);
        }
    }
}

/// Encodes a message into its canonical big-endian form.
pub fn encode_message(msg: &Message) -> Result<Vec<u8>, WireError> {
    validate(msg)?;
    let mut out = Vec::with_capacity(64);
    out.push(OPEN5G_VERSION);
    out.push(msg.body.msg_type() as u8);
    put_u16(&mut out, 0);
    put_u32(&mut out, msg.xid);
    match &msg.body {
        Body::Hello => {}
        Body::Error(e) => {
            put_u16(&mut out, e.code.0);
            put_u16(&mut out, e.detail.len() as u16);
            out.extend_from_slice(&e.detail);
        }
        Body::PortMod(pm) => encode_port_mod(&mut out, pm),
        Body::FlowMod(fm) => encode_flow_mod(&mut out, fm),
    }
    if out.len() > MAX_MESSAGE_LEN {
        return Err(Invalid::TooLong {
            what: "message",
            len: out.len(),
        }
        .into());
    }
    let len = (out.len() as u16).to_be_bytes();
    out[2..4].copy_from_slice(&len);
    Ok(out)
}

/// Bounds-checked reader over a message body. Running off the end of the
/// body means the declared length and the contents disagree.
struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.data.len() - self.pos < n {
            return Err(WireError::MalformedTlv("field runs past message length"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn ipv4(&mut self) -> Result<Ipv4Addr, WireError> {
        let b = self.take(4)?;
        Ok(Ipv4Addr::new(b[0], b[1], b[2], b[3]))
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.remaining() != 0 {
            return Err(WireError::MalformedTlv("unused bytes inside message"));
        }
        Ok(())
    }
}

fn decode_port_mod(r: &mut Reader<'_>) -> Result<PortMod, WireError> {
    let command = r.u8()?;
    let class = r.u8()?;
    let port_id = r.u32()?;
    if command == 2 {
        if class != PORT_CLASS_NONE {
            return Err(WireError::MalformedTlv("DELETE carries a port class"));
        }
        r.finish()?;
        return Ok(PortMod::Delete { port_id });
    }
    let spec = match class {
        PORT_CLASS_RADIO => {
            let crnti = r.u16()?;
            let bearer_id = r.u8()?;
            let kind = match r.u8()? {
                0 => BearerKind::Srb,
                1 => BearerKind::Drb,
                _ => return Err(WireError::MalformedTlv("unknown bearer kind")),
            };
            let mut layer_config = Vec::new();
            while r.remaining() > 0 {
                let tlv_type = r.u16()?;
                let len = r.u16()? as usize;
                let value = r.take(len)?.to_vec();
                layer_config.push(ConfigTlv { tlv_type, value });
            }
            PortSpec::Radio(RadioBearer {
                crnti,
                bearer_id,
                kind,
                layer_config,
            })
        }
        PORT_CLASS_GTP => PortSpec::Gtp(GtpTunnel {
            local_ip: r.ipv4()?,
            remote_ip: r.ipv4()?,
            udp_port: r.u16()?,
            teid: r.u32()?,
        }),
        PORT_CLASS_SIG => PortSpec::Sig(SigTunnel {
            controller_ip: r.ipv4()?,
            tunnel_id: r.u32()?,
        }),
        _ => return Err(WireError::MalformedTlv("unknown port class")),
    };
    r.finish()?;
    match command {
        0 => Ok(PortMod::Create { port_id, spec }),
        1 => Ok(PortMod::Modify { port_id, spec }),
        _ => Err(WireError::MalformedTlv("unknown PORT_MOD command")),
    }
}

fn decode_flow_mod(r: &mut Reader<'_>) -> Result<FlowMod, WireError> {
    let command = match r.u8()? {
        0 => FlowCommand::Add,
        1 => FlowCommand::Delete,
        _ => return Err(WireError::MalformedTlv("unknown FLOW_MOD command")),
    };
    let priority = r.u16()?;
    let count = r.u8()?;
    let mut m = FlowMatch::default();
    let mut crnti = None;
    let mut bearer = None;
    let mut last_type = 0u16;
    for _ in 0..count {
        let t = r.u16()?;
        let len = r.u16()? as usize;
        // Canonical form: strictly ascending types, no repeats.
        if t <= last_type {
            return Err(WireError::MalformedTlv("match TLVs out of order or repeated"));
        }
        last_type = t;
        let expected = match t {
            match_tlv::IN_PORT | match_tlv::IP_DST => 4,
            match_tlv::CRNTI | match_tlv::L4_DST => 2,
            match_tlv::BEARER_ID | match_tlv::IP_PROTO => 1,
            _ => return Err(WireError::MalformedTlv("unknown match TLV type")),
        };
        if len != expected {
            return Err(WireError::MalformedTlv("match TLV length mismatch"));
        }
        let v = r.take(len)?;
        match t {
            match_tlv::IN_PORT => m.in_port = Some(u32::from_be_bytes([v[0], v[1], v[2], v[3]])),
            match_tlv::CRNTI => crnti = Some(u16::from_be_bytes([v[0], v[1]])),
            match_tlv::BEARER_ID => bearer = Some(v[0]),
            match_tlv::IP_DST => m.ip_dst = Some(Ipv4Addr::new(v[0], v[1], v[2], v[3])),
            match_tlv::IP_PROTO => m.ip_proto = Some(v[0]),
            _ => m.l4_dst = Some(u16::from_be_bytes([v[0], v[1]])),
        }
    }
    m.radio = match (crnti, bearer) {
        (Some(c), Some(b)) => Some(RadioKey::new(c, b)),
        (None, None) => None,
        _ => return Err(Invalid::SplitRadioKey.into()),
    };
    let action = match r.u8()? {
        ACTION_NONE => {
            if r.u32()? != 0 {
                return Err(WireError::MalformedTlv("empty action with a port"));
            }
            None
        }
        ACTION_OUTPUT => Some(FlowAction::Output(r.u32()?)),
        _ => return Err(WireError::MalformedTlv("unknown action kind")),
    };
    r.finish()?;
    Ok(FlowMod {
        command,
        priority,
        flow_match: m,
        action,
    })
}

/// Reads the header fields without decoding the body.
pub fn peek_header(data: &[u8]) -> Option<(u8, u8, u16, u32)> {
    if data.len() < HEADER_LEN {
        return None;
    }
    Some((
        data[0],
        data[1],
        u16::from_be_bytes([data[2], data[3]]),
        u32::from_be_bytes([data[4], data[5], data[6], data[7]]),
    ))
}

/// Decodes exactly one message; `data` must hold nothing else.
pub fn decode_message(data: &[u8]) -> Result<Message, WireError> {
    let (version, ty, length, xid) = peek_header(data).ok_or(WireError::Truncated {
        needed: HEADER_LEN,
        available: data.len(),
    })?;
    if version != OPEN5G_VERSION {
        return Err(WireError::BadVersion(version));
    }
    let ty = MsgType::from_u8(ty).ok_or(WireError::UnknownType(ty))?;
    let length_usize = length as usize;
    if length_usize < HEADER_LEN {
        return Err(WireError::BadLength(length));
    }
    if data.len() < length_usize {
        return Err(WireError::Truncated {
            needed: length_usize,
            available: data.len(),
        });
    }
    if data.len() > length_usize {
        return Err(WireError::TrailingBytes {
            extra: data.len() - length_usize,
        });
    }
    let mut r = Reader::new(&data[HEADER_LEN..]);
    let body = match ty {
        MsgType::Hello => {
            r.finish()?;
            Body::Hello
        }
        MsgType::Error => {
            let code = ErrorCode(r.u16()?);
            let len = r.u16()? as usize;
            let detail = r.take(len)?.to_vec();
            r.finish()?;
            Body::Error(ErrorBody { code, detail })
        }
        MsgType::PortMod => Body::PortMod(decode_port_mod(&mut r)?),
        MsgType::FlowMod => Body::FlowMod(decode_flow_mod(&mut r)?),
    };
    let msg = Message { xid, body };
    validate(&msg)?;
    Ok(msg)
}

pub const GTPU_HEADER_LEN: usize = 8;
pub const GTPU_FLAGS: u8 = 0x30;
pub const GTPU_GPDU: u8 = 0xFF;
pub const GTPU_UDP_PORT: u16 = 2152;

/// Wraps `payload` in a G-PDU header without optional fields.
pub fn encap_gtpu(payload: &[u8], teid: u32) -> Result<Vec<u8>, WireError> {
    let len = u16::try_from(payload.len()).map_err(|_| WireError::PayloadTooLarge(payload.len()))?;
    let mut out = Vec::with_capacity(GTPU_HEADER_LEN + payload.len());
    out.push(GTPU_FLAGS);
    out.push(GTPU_GPDU);
    put_u16(&mut out, len);
    put_u32(&mut out, teid);
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn decap_gtpu(frame: &[u8]) -> Result<(u32, &[u8]), WireError> {
    if frame.len() < GTPU_HEADER_LEN {
        return Err(WireError::Truncated {
            needed: GTPU_HEADER_LEN,
            available: frame.len(),
        });
    }
    if frame[0] != GTPU_FLAGS {
        return Err(WireError::BadGtpuFlags(frame[0]));
    }
    if frame[1] != GTPU_GPDU {
        return Err(WireError::BadGtpuType(frame[1]));
    }
    let declared = u16::from_be_bytes([frame[2], frame[3]]);
    let teid = u32::from_be_bytes([frame[4], frame[5], frame[6], frame[7]]);
    let payload = &frame[GTPU_HEADER_LEN..];
    if payload.len() < declared as usize {
        return Err(WireError::Truncated {
            needed: GTPU_HEADER_LEN + declared as usize,
            available: frame.len(),
        });
    }
    if payload.len() != declared as usize {
        return Err(WireError::GtpuLength {
            declared,
            actual: payload.len(),
        });
    }
    Ok((teid, payload))
}

pub const SIG_HEADER_LEN: usize = 8;
/// GRE flags word with only the key-present bit set.
pub const SIG_FLAGS: u16 = 0x2000;
pub const SIG_PROTOCOL: u16 = 0x0000;

pub fn encap_sig(payload: &[u8], tunnel_id: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(SIG_HEADER_LEN + payload.len());
    put_u16(&mut out, SIG_FLAGS);
    put_u16(&mut out, SIG_PROTOCOL);
    put_u32(&mut out, tunnel_id);
    out.extend_from_slice(payload);
    out
}

pub fn decap_sig(frame: &[u8]) -> Result<(u32, &[u8]), WireError> {
    if frame.len() < SIG_HEADER_LEN {
        return Err(WireError::Truncated {
            needed: SIG_HEADER_LEN,
            available: frame.len(),
        });
    }
    let flags = u16::from_be_bytes([frame[0], frame[1]]);
    if flags != SIG_FLAGS {
        return Err(WireError::BadSigFlags(flags));
    }
    let protocol = u16::from_be_bytes([frame[2], frame[3]]);
    if protocol != SIG_PROTOCOL {
        return Err(WireError::BadSigProtocol(protocol));
    }
    let key = u32::from_be_bytes([frame[4], frame[5], frame[6], frame[7]]);
    Ok((key, &frame[SIG_HEADER_LEN..]))
}

/// Size of the envelope prepended to SRB0 payloads.
pub const SRB0_ENVELOPE_LEN: usize = 6;

/// Prefixes an SRB0 payload with `ue_tmp_id u32 | msg_len u16`.
pub fn wrap_srb0(ue_tmp_id: u32, msg: &[u8]) -> Result<Vec<u8>, WireError> {
    let len = u16::try_from(msg.len()).map_err(|_| WireError::PayloadTooLarge(msg.len()))?;
    let mut out = Vec::with_capacity(SRB0_ENVELOPE_LEN + msg.len());
    put_u32(&mut out, ue_tmp_id);
    put_u16(&mut out, len);
    out.extend_from_slice(msg);
    Ok(out)
}

pub fn unwrap_srb0(data: &[u8]) -> Result<(u32, &[u8]), WireError> {
    if data.len() < SRB0_ENVELOPE_LEN {
        return Err(WireError::Truncated {
            needed: SRB0_ENVELOPE_LEN,
            available: data.len(),
        });
    }
    let ue = u32::from_be_bytes([data[0], data[1], data[2], data[3]]);
    let len = u16::from_be_bytes([data[4], data[5]]) as usize;
    let msg = &data[SRB0_ENVELOPE_LEN..];
    if msg.len() < len {
        return Err(WireError::Truncated {
            needed: SRB0_ENVELOPE_LEN + len,
            available: data.len(),
        });
    }
    if msg.len() > len {
        return Err(WireError::TrailingBytes { extra: msg.len() - len });
    }
    Ok((ue, msg))
}

/// Size of the emulated inner IP header on user-plane packets.
pub const PSEUDO_IP_LEN: usize = 9;

/// Emulated inner packet header: `ip_dst 4B | ip_proto u8 | l4_dst u16 | len u16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PseudoIp {
    pub ip_dst: Ipv4Addr,
    pub ip_proto: u8,
    pub l4_dst: u16,
}

impl PseudoIp {
    pub fn new(ip_dst: Ipv4Addr, ip_proto: u8, l4_dst: u16) -> Self {
        Self {
            ip_dst,
            ip_proto,
            l4_dst,
        }
    }

    pub fn build(&self, data: &[u8]) -> Result<Vec<u8>, WireError> {
        let len = u16::try_from(data.len()).map_err(|_| WireError::PayloadTooLarge(data.len()))?;
        let mut out = Vec::with_capacity(PSEUDO_IP_LEN + data.len());
        out.extend_from_slice(&self.ip_dst.octets());
        out.push(self.ip_proto);
        put_u16(&mut out, self.l4_dst);
        put_u16(&mut out, len);
        out.extend_from_slice(data);
        Ok(out)
    }

    /// Parses the header; `None` if the packet is not a well-formed pseudo-IP packet.
    pub fn parse(packet: &[u8]) -> Option<(Self, &[u8])> {
        if packet.len() < PSEUDO_IP_LEN {
            return None;
        }
        let len = u16::from_be_bytes([packet[7], packet[8]]) as usize;
        let data = &packet[PSEUDO_IP_LEN..];
        if data.len() != len {
            return None;
        }
        Some((
            Self {
                ip_dst: Ipv4Addr::new(packet[0], packet[1], packet[2], packet[3]),
                ip_proto: packet[4],
                l4_dst: u16::from_be_bytes([packet[5], packet[6]]),
            },
            data,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(a: u8, b: u8, c: u8, d: u8) -> Ipv4Addr {
        Ipv4Addr::new(a, b, c, d)
    }

    #[test]
    fn hello_is_header_only() {
        let msg = Message {
            xid: 7,
            body: Body::Hello,
        };
        let bytes = encode_message(&msg).unwrap();
        assert_eq!(bytes, [0x01, 0x01, 0x00, 0x08, 0x00, 0x00, 0x00, 0x07]);
        assert_eq!(decode_message(&bytes).unwrap(), msg);
    }

    #[test]
    fn empty_input_is_truncated() {
        assert!(matches!(decode_message(&[]), Err(WireError::Truncated { .. })));
        assert_eq!(decode_message(&[]).unwrap_err().code(), ErrorCode::TRUNCATED);
    }

    #[test]
    fn header_errors_have_distinct_codes() {
        let bad_version = [0x02, 0x01, 0x00, 0x08, 0, 0, 0, 1];
        assert_eq!(decode_message(&bad_version).unwrap_err(), WireError::BadVersion(2));
        let bad_type = [0x01, 0x09, 0x00, 0x08, 0, 0, 0, 1];
        assert_eq!(decode_message(&bad_type).unwrap_err(), WireError::UnknownType(9));
        let short = [0x01, 0x01, 0x00, 0x0a, 0, 0, 0, 1];
        assert!(matches!(
            decode_message(&short),
            Err(WireError::Truncated { needed: 10, .. })
        ));
        let long = [0x01, 0x01, 0x00, 0x08, 0, 0, 0, 1, 0xAA];
        assert_eq!(
            decode_message(&long).unwrap_err(),
            WireError::TrailingBytes { extra: 1 }
        );
        let tiny = [0x01, 0x01, 0x00, 0x04, 0, 0, 0, 1];
        assert_eq!(decode_message(&tiny).unwrap_err(), WireError::BadLength(4));
        let codes = [
            decode_message(&[]).unwrap_err().code(),
            decode_message(&bad_version).unwrap_err().code(),
            decode_message(&bad_type).unwrap_err().code(),
            decode_message(&long).unwrap_err().code(),
        ];
        for (i, a) in codes.iter().enumerate() {
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn srb_with_drb_numbering_is_rejected() {
        let msg = Message {
            xid: 1,
            body: Body::PortMod(PortMod::Create {
                port_id: 1,
                spec: PortSpec::Radio(RadioBearer {
                    crnti: 61,
                    bearer_id: 1,
                    kind: BearerKind::Srb,
                    layer_config: vec![],
                }),
            }),
        };
        assert_eq!(
            encode_message(&msg).unwrap_err(),
            WireError::InvalidMessage(Invalid::SrbBearerId(1))
        );
    }

    #[test]
    fn common_srb0_port_uses_crnti_zero() {
        let mk = |crnti| Message {
            xid: 1,
            body: Body::PortMod(PortMod::Create {
                port_id: 1,
                spec: PortSpec::Radio(RadioBearer {
                    crnti,
                    bearer_id: SRB0_BEARER,
                    kind: BearerKind::Srb,
                    layer_config: vec![],
                }),
            }),
        };
        assert!(encode_message(&mk(0)).is_ok());
        assert!(encode_message(&mk(61)).is_err());
    }

    #[test]
    fn dedicated_crnti_range() {
        let mk = |crnti| Message {
            xid: 1,
            body: Body::PortMod(PortMod::Create {
                port_id: 1,
                spec: PortSpec::Radio(RadioBearer {
                    crnti,
                    bearer_id: 1,
                    kind: BearerKind::Drb,
                    layer_config: vec![],
                }),
            }),
        };
        assert!(encode_message(&mk(0)).is_err());
        assert!(encode_message(&mk(1)).is_ok());
        assert!(encode_message(&mk(MAX_CRNTI)).is_ok());
        assert!(encode_message(&mk(MAX_CRNTI + 1)).is_err());
    }

    #[test]
    fn flow_mod_add_requires_match_and_action() {
        let empty = Message {
            xid: 1,
            body: Body::FlowMod(FlowMod::add(1, FlowMatch::default(), 3)),
        };
        assert_eq!(
            encode_message(&empty).unwrap_err(),
            WireError::InvalidMessage(Invalid::EmptyMatch)
        );
        let no_action = Message {
            xid: 1,
            body: Body::FlowMod(FlowMod {
                command: FlowCommand::Add,
                priority: 1,
                flow_match: FlowMatch::in_port(2),
                action: None,
            }),
        };
        assert_eq!(
            encode_message(&no_action).unwrap_err(),
            WireError::InvalidMessage(Invalid::MissingAction)
        );
    }

    #[test]
    fn delete_port_mod_layout() {
        let msg = Message {
            xid: 0x0102_0304,
            body: Body::PortMod(PortMod::Delete { port_id: 9 }),
        };
        let bytes = encode_message(&msg).unwrap();
        assert_eq!(bytes, [1, 3, 0, 14, 1, 2, 3, 4, 2, 0xFF, 0, 0, 0, 9]);
        assert_eq!(decode_message(&bytes).unwrap(), msg);
    }

    #[test]
    fn split_radio_key_in_match_is_rejected() {
        // FLOW_MOD ADD prio 1, one TLV (CRNTI=61), OUTPUT 2
        let mut b = vec![1, 4, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1, 0, 2, 0, 2, 0, 61, 1, 0, 0, 0, 2];
        let len = b.len() as u16;
        b[2..4].copy_from_slice(&len.to_be_bytes());
        assert_eq!(
            decode_message(&b).unwrap_err(),
            WireError::InvalidMessage(Invalid::SplitRadioKey)
        );
    }

    #[test]
    fn out_of_order_match_tlvs_are_malformed() {
        let fm = FlowMod::add(5, FlowMatch::flow(ip(10, 45, 0, 1), 6, 43), 4);
        let mut bytes = encode_message(&Message {
            xid: 1,
            body: Body::FlowMod(fm),
        })
        .unwrap();
        // Swap the IP_PROTO and L4_DST TLV type codes.
        let first = 8 + 4 + 8; // header, cmd/prio/count, IP_DST TLV
        bytes[first + 1] = 6;
        bytes[first + 5 + 1] = 5;
        assert!(matches!(decode_message(&bytes), Err(WireError::MalformedTlv(_))));
    }

    #[test]
    fn gtpu_round_trip_and_errors() {
        let frame = encap_gtpu(b"abc", 1).unwrap();
        assert_eq!(frame.len(), GTPU_HEADER_LEN + 3);
        assert_eq!(&frame[..8], &[0x30, 0xFF, 0x00, 0x03, 0, 0, 0, 1]);
        assert_eq!(decap_gtpu(&frame).unwrap(), (1, &b"abc"[..]));
        assert!(matches!(decap_gtpu(&frame[..7]), Err(WireError::Truncated { .. })));
        let mut bad = frame.clone();
        bad[0] = 0x32;
        assert_eq!(decap_gtpu(&bad).unwrap_err(), WireError::BadGtpuFlags(0x32));
        assert!(matches!(decap_gtpu(&frame[..10]), Err(WireError::Truncated { .. })));
        assert_eq!(
            encap_gtpu(&vec![0; 70_000], 1).unwrap_err(),
            WireError::PayloadTooLarge(70_000)
        );
    }

    #[test]
    fn sig_round_trip_and_errors() {
        let frame = encap_sig(b"rrc-bytes", 2);
        assert_eq!(&frame[..8], &[0x20, 0x00, 0x00, 0x00, 0, 0, 0, 2]);
        assert_eq!(decap_sig(&frame).unwrap(), (2, &b"rrc-bytes"[..]));
        let mut bad = frame.clone();
        bad[0] = 0x30;
        assert_eq!(decap_sig(&bad).unwrap_err(), WireError::BadSigFlags(0x3000));
        assert!(matches!(decap_sig(&frame[..5]), Err(WireError::Truncated { .. })));
    }

    #[test]
    fn srb0_envelope() {
        let env = wrap_srb0(0xDEAD_BEEF, b"req").unwrap();
        assert_eq!(&env[..6], &[0xDE, 0xAD, 0xBE, 0xEF, 0, 3]);
        assert_eq!(unwrap_srb0(&env).unwrap(), (0xDEAD_BEEF, &b"req"[..]));
        assert!(unwrap_srb0(&env[..5]).is_err());
        assert!(unwrap_srb0(&env[..8]).is_err());
    }

    #[test]
    fn pseudo_ip_header() {
        let h = PseudoIp::new(ip(10, 45, 0, 2), 6, 34);
        let pkt = h.build(b"hello").unwrap();
        assert_eq!(pkt.len(), PSEUDO_IP_LEN + 5);
        assert_eq!(PseudoIp::parse(&pkt), Some((h, &b"hello"[..])));
        assert_eq!(PseudoIp::parse(&pkt[..8]), None);
        assert_eq!(PseudoIp::parse(&pkt[..12]), None);
    }
}
