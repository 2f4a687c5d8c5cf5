//! Open5G southbound protocol and a deterministic simulator of an SDN-controlled
//! multi-RAT RAN.
//!
//! - [`wire`]: Open5G message codec plus the GTP-U and signaling tunnel framing.
//! - [`switch`]: logical-port registry and flow table of a data-plane node.
//! - [`node`]: emulated d-gNB / d-eNB / d-WT.
//! - [`controller`]: the RAN controller (configuration point, RRC, NG-AP).
//! - [`netsim`]: discrete-event harness, UE/AMF/UPF stubs and event traces.

pub mod controller;
pub mod exec;
pub mod netsim;
pub mod node;
pub mod switch;
pub mod wire;
