//! Open5G command builders used by the configuration point.

use std::net::Ipv4Addr;

use crate::node::Rat;
use crate::wire::{
    layer, BearerKind, ConfigTlv, FlowMatch, FlowMod, GtpTunnel, PortId, PortMod, PortSpec, RadioBearer, SigTunnel,
    SRB0_BEARER,
};

use super::{ControllerError, PduSessionCtx, UeContext};

/// Priority used for every entry the controller installs.
pub const DEFAULT_PRIORITY: u16 = 0x8000;

/// Which radio port a layer profile is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortRole {
    /// The common SRB0 port, which also carries the radio link config.
    Common,
    Srb,
    Drb,
}

/// Layer configuration blobs for a radio port on `rat`.
///
/// Contents are opaque to the protocol; only the set of layers differs
/// between RATs.
pub fn layer_config(rat: Rat, role: PortRole) -> Vec<ConfigTlv> {
    let layers: &[u16] = match (rat, role) {
        (Rat::Nr, PortRole::Drb) => &[layer::SDAP, layer::PDCP, layer::RLC],
        (Rat::Nr | Rat::Lte, PortRole::Srb) => &[layer::PDCP, layer::RLC],
        (Rat::Lte, PortRole::Drb) => &[layer::PDCP, layer::RLC],
        (Rat::Nr | Rat::Lte, PortRole::Common) => &[layer::RLC, layer::MAC, layer::PHY],
        (Rat::Wlan, PortRole::Common) => &[layer::MAC, layer::PHY],
        (Rat::Wlan, PortRole::Srb | PortRole::Drb) => &[layer::MAC],
    };
    let role = match role {
        PortRole::Common => "common",
        PortRole::Srb => "srb",
        PortRole::Drb => "drb",
    };
    layers
        .iter()
        .map(|&l| {
            let name = match l {
                layer::SDAP => "sdap",
                layer::PDCP => "pdcp",
                layer::RLC => "rlc",
                layer::MAC => "mac",
                _ => "phy",
            };
            ConfigTlv::new(l, format!("{}/{name}/{role}", rat.as_str().to_lowercase()))
        })
        .collect()
}

pub fn radio_port(port_id: PortId, crnti: u16, bearer_id: u8, kind: BearerKind, layers: Vec<ConfigTlv>) -> PortMod {
    PortMod::Create {
        port_id,
        spec: PortSpec::Radio(RadioBearer {
            crnti,
            bearer_id,
            kind,
            layer_config: layers,
        }),
    }
}

pub fn sig_port(port_id: PortId, controller_ip: Ipv4Addr, tunnel_id: u32) -> PortMod {
    PortMod::Create {
        port_id,
        spec: PortSpec::Sig(SigTunnel {
            controller_ip,
            tunnel_id,
        }),
    }
}

/// Ports and entries for a bidirectional radio <-> controller signaling path.
pub fn srb_path(
    radio_port_id: PortId,
    sig_port_id: PortId,
    crnti: u16,
    bearer_id: u8,
    layers: Vec<ConfigTlv>,
    controller_ip: Ipv4Addr,
    tunnel_id: u32,
) -> (Vec<PortMod>, Vec<FlowMod>) {
    let ports = vec![
        radio_port(radio_port_id, crnti, bearer_id, BearerKind::Srb, layers),
        sig_port(sig_port_id, controller_ip, tunnel_id),
    ];
    let flows = vec![
        FlowMod::add(DEFAULT_PRIORITY, FlowMatch::radio(crnti, bearer_id), sig_port_id),
        FlowMod::add(DEFAULT_PRIORITY, FlowMatch::in_port(sig_port_id), radio_port_id),
    ];
    (ports, flows)
}

/// Common SRB0 path installed once per node.
pub fn srb0_path(
    rat: Rat,
    radio_port_id: PortId,
    sig_port_id: PortId,
    controller_ip: Ipv4Addr,
    tunnel_id: u32,
) -> (Vec<PortMod>, Vec<FlowMod>) {
    srb_path(
        radio_port_id,
        sig_port_id,
        0,
        SRB0_BEARER,
        layer_config(rat, PortRole::Common),
        controller_ip,
        tunnel_id,
    )
}

/// Ports and entries that realize one PDU session on the serving node.
///
/// One radio port per DRB and one GTP port for the session tunnel; an uplink
/// entry per DRB toward the tunnel and a downlink entry per QoS flow toward
/// its DRB.
pub fn build_session_config(
    ue: &UeContext,
    session: &PduSessionCtx,
    drb_layers: &[ConfigTlv],
) -> Result<(Vec<PortMod>, Vec<FlowMod>), ControllerError> {
    session.check()?;
    let tunnel = &session.ngu_tunnel;
    let mut ports: Vec<PortMod> = session
        .drbs
        .iter()
        .map(|d| {
            radio_port(
                d.radio_port_id,
                ue.crnti,
                d.bearer_id,
                BearerKind::Drb,
                drb_layers.to_vec(),
            )
        })
        .collect();
    ports.push(PortMod::Create {
        port_id: tunnel.port_id,
        spec: PortSpec::Gtp(GtpTunnel {
            local_ip: tunnel.local_ip,
            remote_ip: tunnel.remote_ip,
            udp_port: tunnel.udp_port,
            teid: tunnel.teid,
        }),
    });
    let mut flows: Vec<FlowMod> = session
        .drbs
        .iter()
        .map(|d| {
            FlowMod::add(
                DEFAULT_PRIORITY,
                FlowMatch::radio(ue.crnti, d.bearer_id),
                tunnel.port_id,
            )
        })
        .collect();
    for f in &session.qos_flows {
        let drb = session
            .drbs
            .iter()
            .find(|d| d.bearer_id == f.mapped_drb)
            .expect("checked by PduSessionCtx::check");
        flows.push(FlowMod::add(
            DEFAULT_PRIORITY,
            FlowMatch::flow(f.ip_dst, f.ip_proto, f.l4_dst),
            drb.radio_port_id,
        ));
    }
    Ok((ports, flows))
}
