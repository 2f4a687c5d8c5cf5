//! Emulated data-plane node (d-gNB, d-eNB, d-WT).
//!
//! A node applies Open5G commands silently and moves packets between its
//! radio side, its NG-U side and the controller signaling tunnels according
//! to its flow table. The only Open5G traffic a node ever originates is an
//! ERROR for a command it could not decode or apply.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::switch::{Ingress, PacketContext, Switch};
use crate::wire::{
    self, layer, Body, ErrorBody, ErrorCode, Message, PortMod, PortSpec, PseudoIp, RadioKey, SRB0_BEARER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rat {
    #[serde(rename = "NR")]
    Nr,
    #[serde(rename = "LTE")]
    Lte,
    #[serde(rename = "WLAN")]
    Wlan,
}

impl Rat {
    pub fn as_str(self) -> &'static str {
        match self {
            Rat::Nr => "NR",
            Rat::Lte => "LTE",
            Rat::Wlan => "WLAN",
        }
    }

    /// Whether a radio port on this RAT may carry config for `tlv_type`.
    pub fn supports_layer(self, tlv_type: u16) -> bool {
        match self {
            Rat::Wlan => !matches!(tlv_type, layer::SDAP | layer::PDCP),
            Rat::Nr | Rat::Lte => true,
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NR" => Ok(Rat::Nr),
            "LTE" => Ok(Rat::Lte),
            "WLAN" => Ok(Rat::Wlan),
            other => Err(format!("unknown RAT {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDescriptor {
    pub node_id: NodeId,
    pub name: String,
    pub rat: Rat,
    pub ngu_ip: Ipv4Addr,
}

/// Downlink radio destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RadioTarget {
    /// A dedicated bearer of a connected UE.
    Bearer(RadioKey),
    /// The common SRB0 channel, addressed to the UE named in the envelope.
    Common { ue_tmp_id: u32 },
}

/// Something a node puts on one of its links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emission {
    /// Encoded Open5G ERROR toward the controller.
    Open5GError(Vec<u8>),
    /// Signaling tunnel frame toward the controller.
    Sig(Vec<u8>),
    /// GTP-U frame toward the core.
    Ngu {
        remote_ip: Ipv4Addr,
        udp_port: u16,
        frame: Vec<u8>,
    },
    /// Payload delivered over the radio.
    Radio { target: RadioTarget, payload: Vec<u8> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    /// The packet arrived on a logical port that does not exist.
    NoPort,
    /// No flow entry matched.
    NoMatch,
    /// The NG-U or signaling frame did not decode.
    BadFrame,
    /// An SRB0 payload lacked a valid envelope.
    BadEnvelope,
    /// The payload could not be encapsulated for the output port.
    Encap,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeCounters {
    pub drops: BTreeMap<DropReason, u64>,
    pub forwarded: u64,
    pub commands_applied: u64,
    pub errors_sent: u64,
}

impl NodeCounters {
    pub fn drop_count(&self) -> u64 {
        self.drops.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct DataplaneNode {
    desc: NodeDescriptor,
    switch: Switch,
    counters: NodeCounters,
}

impl DataplaneNode {
    pub fn new(desc: NodeDescriptor) -> Self {
        Self {
            desc,
            switch: Switch::new(),
            counters: NodeCounters::default(),
        }
    }

    pub fn descriptor(&self) -> &NodeDescriptor {
        &self.desc
    }

    pub fn id(&self) -> NodeId {
        self.desc.node_id
    }

    pub fn rat(&self) -> Rat {
        self.desc.rat
    }

    pub fn switch(&self) -> &Switch {
        &self.switch
    }

    pub fn counters(&self) -> &NodeCounters {
        &self.counters
    }

    pub fn drop_count(&self) -> u64 {
        self.counters.drop_count()
    }

    /// Consumes one encoded Open5G message. Success produces no emissions;
    /// failure produces exactly one ERROR and leaves the state untouched.
    pub fn handle_open5g(&mut self, data: &[u8]) -> Vec<Emission> {
        match self.apply_open5g(data) {
            Ok(()) => Vec::new(),
            Err((code, detail)) => {
                // Report against the offending xid when the header is readable.
                let xid = wire::peek_header(data).map_or(0, |(_, _, _, xid)| xid);
                let msg = Message {
                    xid,
                    body: Body::Error(ErrorBody {
                        code,
                        detail: detail.into_bytes(),
                    }),
                };
                self.counters.errors_sent += 1;
                let bytes = wire::encode_message(&msg).expect("error message is always encodable");
                vec![Emission::Open5GError(bytes)]
            }
        }
    }

    /// Applies a batch of messages in order.
    pub fn handle_open5g_batch<B: AsRef<[u8]>>(&mut self, batch: &[B]) -> Vec<Emission> {
        batch.iter().flat_map(|m| self.handle_open5g(m.as_ref())).collect()
    }

    fn apply_open5g(&mut self, data: &[u8]) -> Result<(), (ErrorCode, String)> {
        let msg = wire::decode_message(data).map_err(|e| (e.code(), e.to_string()))?;
        match &msg.body {
            // Nothing to apply and nothing to answer.
            Body::Hello | Body::Error(_) => {}
            Body::PortMod(pm) => {
                self.check_layers(pm)?;
                self.switch.apply_port_mod(pm).map_err(|e| (e.code(), e.to_string()))?;
            }
            Body::FlowMod(fm) => {
                self.switch.apply_flow_mod(fm).map_err(|e| (e.code(), e.to_string()))?;
            }
        }
        self.counters.commands_applied += 1;
        Ok(())
    }

    fn check_layers(&self, pm: &PortMod) -> Result<(), (ErrorCode, String)> {
        if let Some(PortSpec::Radio(r)) = pm.spec() {
            if let Some(tlv) = r
                .layer_config
                .iter()
                .find(|t| !self.desc.rat.supports_layer(t.tlv_type))
            {
                return Err((
                    ErrorCode::UNSUPPORTED_LAYER,
                    format!("{} node has no layer {}", self.desc.rat, tlv.tlv_type),
                ));
            }
        }
        Ok(())
    }

    fn drop(&mut self, reason: DropReason) -> Option<Emission> {
        *self.counters.drops.entry(reason).or_default() += 1;
        None
    }

    /// Looks the packet up and emits it on the port the matching entry names.
    fn forward(&mut self, ctx: PacketContext) -> Option<Emission> {
        if self.switch.resolve_ingress(&ctx.ingress).is_none() {
            return self.drop(DropReason::NoPort);
        }
        let Some(action) = self.switch.match_packet(&ctx) else {
            return self.drop(DropReason::NoMatch);
        };
        let Some(port) = self.switch.ports.get(action.out_port()) else {
            return self.drop(DropReason::NoPort);
        };
        let emission = match &port.spec {
            PortSpec::Gtp(g) => match wire::encap_gtpu(&ctx.payload, g.teid) {
                Ok(frame) => Emission::Ngu {
                    remote_ip: g.remote_ip,
                    udp_port: g.udp_port,
                    frame,
                },
                Err(_) => return self.drop(DropReason::Encap),
            },
            PortSpec::Sig(s) => Emission::Sig(wire::encap_sig(&ctx.payload, s.tunnel_id)),
            PortSpec::Radio(r) if r.bearer_id == SRB0_BEARER => match wire::unwrap_srb0(&ctx.payload) {
                Ok((ue_tmp_id, _)) => Emission::Radio {
                    target: RadioTarget::Common { ue_tmp_id },
                    payload: ctx.payload,
                },
                Err(_) => return self.drop(DropReason::BadEnvelope),
            },
            PortSpec::Radio(r) => Emission::Radio {
                target: RadioTarget::Bearer(r.key()),
                payload: ctx.payload,
            },
        };
        self.counters.forwarded += 1;
        Some(emission)
    }

    /// Packet received from a UE on `(crnti, bearer_id)`.
    pub fn ingress_radio(&mut self, crnti: u16, bearer_id: u8, payload: Vec<u8>) -> Option<Emission> {
        self.forward(PacketContext::radio(RadioKey::new(crnti, bearer_id), payload))
    }

    /// GTP-U frame received from the core on `udp_port`.
    pub fn ingress_ngu(&mut self, udp_port: u16, frame: &[u8]) -> Option<Emission> {
        let Ok((teid, inner)) = wire::decap_gtpu(frame) else {
            return self.drop(DropReason::BadFrame);
        };
        let hdr = PseudoIp::parse(inner).map(|(h, _)| h);
        self.forward(PacketContext {
            ingress: Ingress::Ngu { udp_port, teid },
            ip_dst: hdr.map(|h| h.ip_dst),
            ip_proto: hdr.map(|h| h.ip_proto),
            l4_dst: hdr.map(|h| h.l4_dst),
            payload: inner.to_vec(),
        })
    }

    /// Signaling tunnel frame received from the controller.
    pub fn ingress_sigtunnel(&mut self, frame: &[u8]) -> Option<Emission> {
        let Ok((tunnel_id, inner)) = wire::decap_sig(frame) else {
            return self.drop(DropReason::BadFrame);
        };
        self.forward(PacketContext {
            ingress: Ingress::Sig { tunnel_id },
            ip_dst: None,
            ip_proto: None,
            l4_dst: None,
            payload: inner.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{BearerKind, ConfigTlv, FlowMatch, FlowMod, RadioBearer, SigTunnel};

    fn node(rat: Rat) -> DataplaneNode {
        DataplaneNode::new(NodeDescriptor {
            node_id: NodeId(1),
            name: "d-gNB".into(),
            rat,
            ngu_ip: Ipv4Addr::new(10, 0, 0, 1),
        })
    }

    fn enc(xid: u32, body: Body) -> Vec<u8> {
        wire::encode_message(&Message { xid, body }).unwrap()
    }

    fn srb0(n: &mut DataplaneNode) {
        let ctrl = Ipv4Addr::new(10, 0, 0, 254);
        let cmds = [
            enc(
                1,
                Body::PortMod(PortMod::Create {
                    port_id: 1,
                    spec: PortSpec::Radio(RadioBearer {
                        crnti: 0,
                        bearer_id: 0,
                        kind: BearerKind::Srb,
                        layer_config: vec![],
                    }),
                }),
            ),
            enc(
                2,
                Body::PortMod(PortMod::Create {
                    port_id: 2,
                    spec: PortSpec::Sig(SigTunnel {
                        controller_ip: ctrl,
                        tunnel_id: 1,
                    }),
                }),
            ),
            enc(3, Body::FlowMod(FlowMod::add(1, FlowMatch::radio(0, 0), 2))),
            enc(4, Body::FlowMod(FlowMod::add(1, FlowMatch::in_port(2), 1))),
        ];
        assert!(n.handle_open5g_batch(&cmds).is_empty());
    }

    #[test]
    fn valid_commands_are_silent() {
        let mut n = node(Rat::Nr);
        srb0(&mut n);
        assert_eq!(n.switch().ports.len(), 2);
        assert_eq!(n.switch().table.len(), 2);
        assert_eq!(n.counters().commands_applied, 4);
        assert_eq!(n.counters().errors_sent, 0);
    }

    #[test]
    fn malformed_bytes_yield_one_error() {
        let mut n = node(Rat::Nr);
        // PORT_MOD CREATE with an unknown port class.
        let bytes = [1, 3, 0, 14, 0, 0, 0, 9, 0, 7, 0, 0, 0, 1];
        let out = n.handle_open5g(&bytes);
        assert_eq!(out.len(), 1);
        let Emission::Open5GError(err) = &out[0] else {
            panic!("expected ERROR");
        };
        let msg = wire::decode_message(err).unwrap();
        assert_eq!(msg.xid, 9);
        match msg.body {
            Body::Error(e) => assert_eq!(e.code, ErrorCode::MALFORMED_TLV),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_out_port_leaves_table_unchanged() {
        let mut n = node(Rat::Nr);
        srb0(&mut n);
        let before = n.switch().clone();
        let out = n.handle_open5g(&enc(5, Body::FlowMod(FlowMod::add(1, FlowMatch::radio(61, 1), 42))));
        assert_eq!(out.len(), 1);
        let Emission::Open5GError(err) = &out[0] else {
            panic!("expected ERROR");
        };
        match wire::decode_message(err).unwrap().body {
            Body::Error(e) => assert_eq!(e.code, ErrorCode::UNKNOWN_OUT_PORT),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(n.switch(), &before);
    }

    #[test]
    fn wlan_rejects_pdcp_config() {
        let port = |tlv| {
            enc(
                1,
                Body::PortMod(PortMod::Create {
                    port_id: 5,
                    spec: PortSpec::Radio(RadioBearer {
                        crnti: 61,
                        bearer_id: 1,
                        kind: BearerKind::Drb,
                        layer_config: vec![ConfigTlv::new(tlv, vec![1, 2])],
                    }),
                }),
            )
        };
        let mut wlan = node(Rat::Wlan);
        assert_eq!(wlan.handle_open5g(&port(layer::PDCP)).len(), 1);
        assert_eq!(wlan.handle_open5g(&port(layer::SDAP)).len(), 1);
        assert!(wlan.handle_open5g(&port(layer::MAC)).is_empty());
        let mut nr = node(Rat::Nr);
        assert!(nr.handle_open5g(&port(layer::PDCP)).is_empty());
    }

    #[test]
    fn hello_is_ignored() {
        let mut n = node(Rat::Lte);
        assert!(n.handle_open5g(&enc(1, Body::Hello)).is_empty());
    }

    #[test]
    fn srb0_paths_through_the_table() {
        let mut n = node(Rat::Nr);
        srb0(&mut n);
        let env = wire::wrap_srb0(77, b"setup-request").unwrap();
        let up = n.ingress_radio(0, 0, env.clone()).unwrap();
        assert_eq!(up, Emission::Sig(wire::encap_sig(&env, 1)));
        let down = n.ingress_sigtunnel(&wire::encap_sig(&env, 1)).unwrap();
        assert_eq!(
            down,
            Emission::Radio {
                target: RadioTarget::Common { ue_tmp_id: 77 },
                payload: env
            }
        );
        // No envelope, no delivery.
        assert!(n.ingress_sigtunnel(&wire::encap_sig(b"x", 1)).is_none());
        assert_eq!(n.counters().drops[&DropReason::BadEnvelope], 1);
    }

    #[test]
    fn unknown_ingress_is_counted() {
        let mut n = node(Rat::Nr);
        srb0(&mut n);
        assert!(n.ingress_radio(99, 1, b"data".to_vec()).is_none());
        assert!(n.ingress_sigtunnel(&wire::encap_sig(b"x", 55)).is_none());
        assert!(n.ingress_ngu(2152, b"\x31\xff\x00\x00\x00\x00\x00\x01").is_none());
        assert_eq!(n.drop_count(), 3);
        assert_eq!(n.counters().drops[&DropReason::NoPort], 2);
        assert_eq!(n.counters().drops[&DropReason::BadFrame], 1);
    }
}
