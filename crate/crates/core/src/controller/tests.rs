use std::net::Ipv4Addr;

use proptest::prelude::*;

use super::*;
use crate::wire::{FlowAction, FlowMatch, PortSpec, RadioKey};

const NODE: NodeId = NodeId(1);
const IP1: Ipv4Addr = Ipv4Addr::new(10, 45, 0, 1);
const IP2: Ipv4Addr = Ipv4Addr::new(10, 45, 0, 2);
const TCP: u8 = 6;

fn desc(id: u16, rat: Rat) -> NodeDescriptor {
    NodeDescriptor {
        node_id: NodeId(id),
        name: format!("n{id}"),
        rat,
        ngu_ip: Ipv4Addr::new(10, 0, 0, id as u8),
    }
}

fn controller(cap: usize) -> Controller {
    let mut c = Controller::with_cap(cap);
    c.add_node(&desc(1, Rat::Nr)).unwrap();
    c.bootstrap_node(NODE).unwrap();
    c
}

/// Session-1 with flow-1/flow-2 on DRB-1 and flow-3 on DRB-2.
fn session_one() -> SessionRequest {
    SessionRequest {
        session_id: 1,
        drbs: vec![1, 2],
        flows: vec![
            QosFlowRequest {
                flow_id: 1,
                ip_dst: IP1,
                ip_proto: TCP,
                l4_dst: 43,
                drb: 1,
            },
            QosFlowRequest {
                flow_id: 2,
                ip_dst: IP1,
                ip_proto: TCP,
                l4_dst: 23,
                drb: 1,
            },
            QosFlowRequest {
                flow_id: 3,
                ip_dst: IP2,
                ip_proto: TCP,
                l4_dst: 34,
                drb: 2,
            },
        ],
    }
}

fn setup_request(c: &mut Controller, ue_tmp_id: u32) -> Result<Vec<Output>, ControllerError> {
    c.on_rrc_uplink(
        NODE,
        1,
        Some(ue_tmp_id),
        RrcMessage::SetupRequest { ue_identity: ue_tmp_id },
    )
}

/// Runs the UE up to CONNECTED and returns its ran_ue_id.
fn connect(c: &mut Controller, ue_tmp_id: u32) -> u32 {
    setup_request(c, ue_tmp_id).unwrap();
    let ue = c.ue_by_tmp_id(NODE, ue_tmp_id).unwrap().clone();
    let tunnel = ue.srb1_tunnel();
    c.on_rrc_uplink(
        NODE,
        tunnel,
        None,
        RrcMessage::SetupComplete {
            nas_payload: b"reg".to_vec(),
        },
    )
    .unwrap();
    ue.ran_ue_id
}

fn ics(ran_ue_id: u32, sessions: Vec<SessionRequest>) -> NgapMessage {
    NgapMessage::InitialContextSetupRequest {
        ran_ue_id,
        sessions,
        security_info: vec![0xA5; 4],
    }
}

fn batch(out: &Output) -> &ConfigBatch {
    match out {
        Output::Open5G(b) => b,
        other => panic!("expected config batch, got {other:?}"),
    }
}

#[test]
fn bootstrap_emits_two_ports_and_two_entries_once() {
    let mut c = Controller::with_cap(8);
    c.add_node(&desc(1, Rat::Nr)).unwrap();
    let b = c.bootstrap_node(NODE).unwrap();
    assert_eq!(b.port_mods().count(), 2);
    assert_eq!(b.flow_mods().count(), 2);
    assert_eq!(b.messages.iter().map(|m| m.xid).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert_eq!(c.bootstrap_node(NODE), Err(ControllerError::AlreadyBootstrapped(NODE)));
    assert_eq!(
        c.tunnel(1),
        Some(TunnelBinding {
            node: NODE,
            kind: TunnelKind::Srb0
        })
    );
}

#[test]
fn bootstrap_is_linear_in_nodes() {
    let mut c = Controller::with_cap(8);
    let mut total = 0;
    for (i, rat) in [Rat::Nr, Rat::Lte, Rat::Wlan].into_iter().enumerate() {
        c.add_node(&desc(i as u16 + 1, rat)).unwrap();
        total += c.bootstrap_node(NodeId(i as u16 + 1)).unwrap().messages.len();
    }
    assert_eq!(total, 3 * 4);
    assert_eq!(
        c.bootstrap_node(NodeId(9)),
        Err(ControllerError::UnknownNode(NodeId(9)))
    );
}

#[test]
fn admitted_setup_request_configures_srb1_then_sends_setup() {
    let mut c = controller(8);
    let out = setup_request(&mut c, 0x1234).unwrap();
    assert_eq!(out.len(), 2);
    let b = batch(&out[0]);
    let ports: Vec<_> = b.port_mods().cloned().collect();
    assert_eq!(ports.len(), 2);
    match ports[0].spec().unwrap() {
        PortSpec::Radio(r) => assert_eq!(r.key(), RadioKey::new(FIRST_CRNTI, SRB1_BEARER)),
        other => panic!("{other:?}"),
    }
    match ports[1].spec().unwrap() {
        PortSpec::Sig(s) => assert_eq!(s.tunnel_id, 2),
        other => panic!("{other:?}"),
    }
    let flows: Vec<_> = b.flow_mods().cloned().collect();
    assert_eq!(flows[0].flow_match, FlowMatch::radio(FIRST_CRNTI, SRB1_BEARER));
    assert_eq!(flows[0].action, Some(FlowAction::Output(ports[1].port_id())));
    assert_eq!(flows[1].flow_match, FlowMatch::in_port(ports[1].port_id()));
    assert_eq!(flows[1].action, Some(FlowAction::Output(ports[0].port_id())));
    assert_eq!(
        out[1],
        Output::Rrc(RrcDownlink {
            node: NODE,
            tunnel_id: 1,
            ue_tmp_id: Some(0x1234),
            msg: RrcMessage::Setup {
                crnti: FIRST_CRNTI,
                srb1_bearer: SRB1_BEARER
            },
        })
    );
    let ue = c.ue_by_tmp_id(NODE, 0x1234).unwrap();
    assert_eq!(ue.rrc_state, RrcState::SetupRequested);
}

#[test]
fn rejected_setup_request_is_silent() {
    let mut c = controller(0);
    assert_eq!(setup_request(&mut c, 5).unwrap(), vec![]);
    assert!(c.ue_by_tmp_id(NODE, 5).is_none());
    assert_eq!(c.ue_count(NODE), 0);
}

#[test]
fn admission_cap() {
    let req = AdmissionRequest { ue_tmp_id: 1 };
    assert!(CapPolicy { cap: 8 }.admit(NODE, 3, &req));
    assert!(!CapPolicy { cap: 8 }.admit(NODE, 8, &req));
    assert!(!CapPolicy { cap: 0 }.admit(NODE, 0, &req));
    let mut c = controller(1);
    setup_request(&mut c, 1).unwrap();
    assert_eq!(setup_request(&mut c, 2).unwrap(), vec![]);
}

#[test]
fn crntis_are_sequential_per_node() {
    let mut c = controller(8);
    setup_request(&mut c, 10).unwrap();
    setup_request(&mut c, 11).unwrap();
    assert_eq!(c.ue_by_tmp_id(NODE, 10).unwrap().crnti, 0x3D);
    assert_eq!(c.ue_by_tmp_id(NODE, 11).unwrap().crnti, 0x3E);
}

#[test]
fn security_mode_complete_before_command_is_a_violation() {
    let mut c = controller(8);
    let ran = connect(&mut c, 7);
    let tunnel = c.ue(ran).unwrap().srb1_tunnel();
    assert_eq!(
        c.on_rrc_uplink(NODE, tunnel, None, RrcMessage::SecurityModeComplete {}),
        Err(ControllerError::ProtocolViolation {
            kind: "SecurityModeComplete",
            state: RrcState::Connected
        })
    );
}

#[test]
fn setup_complete_needs_nas() {
    let mut c = controller(8);
    setup_request(&mut c, 7).unwrap();
    let tunnel = c.ue_by_tmp_id(NODE, 7).unwrap().srb1_tunnel();
    assert!(matches!(
        c.on_rrc_uplink(NODE, tunnel, None, RrcMessage::SetupComplete { nas_payload: vec![] }),
        Err(ControllerError::ProtocolViolation { .. })
    ));
}

#[test]
fn unknown_tunnel() {
    let mut c = controller(8);
    assert_eq!(
        c.on_rrc_uplink(NODE, 99, None, RrcMessage::SecurityModeComplete {}),
        Err(ControllerError::UnknownTunnel(99))
    );
}

#[test]
fn ics_request_reproduces_session_entries() {
    let mut c = controller(8);
    let ran = connect(&mut c, 7);
    let out = c.on_ngap(ics(ran, vec![session_one()])).unwrap();
    assert_eq!(out.len(), 2);
    let b = batch(&out[0]);
    // SRB2, DRB-1, DRB-2, tunnel-1
    assert_eq!(b.port_mods().count(), 4);
    let ports: Vec<_> = b.port_mods().collect();
    let port_of = |pred: &dyn Fn(&PortSpec) -> bool| ports.iter().find(|p| pred(p.spec().unwrap())).unwrap().port_id();
    let crnti = FIRST_CRNTI;
    let drb1 = port_of(&|s| matches!(s, PortSpec::Radio(r) if r.bearer_id == 1));
    let drb2 = port_of(&|s| matches!(s, PortSpec::Radio(r) if r.bearer_id == 2));
    let tun = port_of(&|s| matches!(s, PortSpec::Gtp(g) if g.teid == 1));
    assert!(ports
        .iter()
        .any(|p| matches!(p.spec().unwrap(), PortSpec::Radio(r) if r.bearer_id == SRB2_BEARER && r.crnti == crnti)));
    let flows: Vec<(FlowMatch, PortId)> = b
        .flow_mods()
        .map(|f| (f.flow_match, f.action.unwrap().out_port()))
        .collect();
    assert_eq!(
        flows,
        vec![
            (FlowMatch::radio(crnti, 1), tun),
            (FlowMatch::radio(crnti, 2), tun),
            (FlowMatch::flow(IP1, TCP, 43), drb1),
            (FlowMatch::flow(IP1, TCP, 23), drb1),
            (FlowMatch::flow(IP2, TCP, 34), drb2),
        ]
    );
    match &out[1] {
        Output::Rrc(d) => {
            assert_eq!(d.tunnel_id, 2);
            assert_eq!(
                d.msg,
                RrcMessage::SecurityModeCommand {
                    security_info: vec![0xA5; 4]
                }
            );
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ics_request_minimal_session() {
    let mut c = controller(8);
    let ran = connect(&mut c, 7);
    let req = SessionRequest {
        session_id: 5,
        drbs: vec![1],
        flows: vec![QosFlowRequest {
            flow_id: 1,
            ip_dst: IP1,
            ip_proto: 17,
            l4_dst: 5000,
            drb: 1,
        }],
    };
    let out = c.on_ngap(ics(ran, vec![req])).unwrap();
    let b = batch(&out[0]);
    // DRB radio, NG-U tunnel, SRB2; one uplink and one downlink entry.
    assert_eq!(b.port_mods().count(), 3);
    assert_eq!(b.flow_mods().count(), 2);
}

#[test]
fn ics_request_for_unknown_ue() {
    let mut c = controller(8);
    assert_eq!(c.on_ngap(ics(42, vec![])), Err(ControllerError::UnknownUe(42)));
}

#[test]
fn ics_request_with_dangling_flow_changes_nothing() {
    let mut c = controller(8);
    let ran = connect(&mut c, 7);
    let mut bad = session_one();
    bad.flows[2].drb = 9;
    assert!(matches!(
        c.on_ngap(ics(ran, vec![bad])),
        Err(ControllerError::InvalidSession(_))
    ));
    assert!(!c.ue(ran).unwrap().security_mode_sent);
    // The valid request still goes through afterwards.
    assert!(c.on_ngap(ics(ran, vec![session_one()])).is_ok());
}

fn two_drb_ctx() -> (UeContext, PduSessionCtx) {
    let ue = UeContext {
        ran_ue_id: 1,
        ue_tmp_id: 1,
        crnti: FIRST_CRNTI,
        serving_node: NODE,
        rrc_state: RrcState::Connected,
        security_mode_sent: false,
        failed: false,
        srbs: BTreeMap::new(),
        pdu_sessions: vec![],
        security_info: vec![],
    };
    let flow = |flow_id, ip_dst, l4_dst, mapped_drb| QosFlow {
        flow_id,
        ip_dst,
        ip_proto: TCP,
        l4_dst,
        mapped_drb,
    };
    let session = PduSessionCtx {
        session_id: 1,
        qos_flows: vec![flow(1, IP1, 43, 1), flow(2, IP1, 23, 1), flow(3, IP2, 34, 2)],
        drbs: vec![
            Drb {
                label: 1,
                bearer_id: 1,
                radio_port_id: 4,
            },
            Drb {
                label: 2,
                bearer_id: 2,
                radio_port_id: 5,
            },
        ],
        ngu_tunnel: NguTunnel {
            port_id: 1,
            local_ip: Ipv4Addr::new(10, 0, 0, 1),
            remote_ip: Ipv4Addr::new(10, 0, 100, 1),
            udp_port: 2152,
            teid: 1,
        },
    };
    (ue, session)
}

#[test]
fn session_config_matches_table_rows() {
    let (ue, s) = two_drb_ctx();
    let (ports, flows) = build_session_config(&ue, &s, &[]).unwrap();
    assert_eq!(ports.iter().map(|p| p.port_id()).collect::<Vec<_>>(), vec![4, 5, 1]);
    let rows: Vec<_> = flows
        .iter()
        .map(|f| (f.flow_match, f.action.unwrap().out_port()))
        .collect();
    assert_eq!(
        rows,
        vec![
            (FlowMatch::radio(FIRST_CRNTI, 1), 1),
            (FlowMatch::radio(FIRST_CRNTI, 2), 1),
            (FlowMatch::flow(IP1, TCP, 43), 4),
            (FlowMatch::flow(IP1, TCP, 23), 4),
            (FlowMatch::flow(IP2, TCP, 34), 5),
        ]
    );
}

#[test]
fn session_without_flows_has_uplink_only() {
    let (ue, mut s) = two_drb_ctx();
    s.qos_flows.clear();
    let (ports, flows) = build_session_config(&ue, &s, &[]).unwrap();
    assert_eq!(ports.len(), 3);
    assert_eq!(flows.len(), 2);
    assert!(flows.iter().all(|f| f.flow_match.radio.is_some()));
}

#[test]
fn session_flow_to_missing_drb() {
    let (ue, mut s) = two_drb_ctx();
    s.qos_flows[0].mapped_drb = 7;
    assert!(matches!(
        build_session_config(&ue, &s, &[]),
        Err(ControllerError::InvalidSession(_))
    ));
}

#[test]
fn full_uplink_sequence() {
    let mut c = controller(8);
    let mut trace: Vec<String> = Vec::new();
    let mut record = |out: Vec<Output>| {
        for o in out {
            trace.push(match o {
                Output::Open5G(_) => "OPEN5G:config".into(),
                Output::Rrc(d) => format!("tunnel{}:{}", d.tunnel_id, d.msg.kind()),
                Output::Ngap(n) => format!("NGAP:{}", n.kind()),
            });
        }
    };
    record(setup_request(&mut c, 9).unwrap());
    let ran = c.ue_by_tmp_id(NODE, 9).unwrap().ran_ue_id;
    record(
        c.on_rrc_uplink(
            NODE,
            2,
            None,
            RrcMessage::SetupComplete {
                nas_payload: b"nas".to_vec(),
            },
        )
        .unwrap(),
    );
    record(c.on_ngap(ics(ran, vec![session_one()])).unwrap());
    record(
        c.on_rrc_uplink(NODE, 2, None, RrcMessage::SecurityModeComplete {})
            .unwrap(),
    );
    record(
        c.on_rrc_uplink(NODE, 2, None, RrcMessage::ReconfigurationComplete {})
            .unwrap(),
    );
    assert_eq!(
        trace,
        vec![
            "OPEN5G:config",
            "tunnel1:RRCSetup",
            "NGAP:InitialUEMessage",
            "OPEN5G:config",
            "tunnel2:SecurityModeCommand",
            "tunnel2:RRCReconfiguration",
            "NGAP:InitialContextSetupResponse",
        ]
    );
    let ue = c.ue(ran).unwrap();
    assert_eq!(ue.rrc_state, RrcState::Configured);
    assert_eq!(ue.pdu_sessions.len(), 1);
}

#[test]
fn node_error_aborts_the_ue_procedure() {
    let mut c = controller(8);
    let out = setup_request(&mut c, 3).unwrap();
    let xid = batch(&out[0]).messages[1].xid;
    let err = wire::encode_message(&Message {
        xid,
        body: Body::Error(wire::ErrorBody {
            code: ErrorCode::DUPLICATE_PORT,
            detail: vec![],
        }),
    })
    .unwrap();
    let ran = c.ue_by_tmp_id(NODE, 3).unwrap().ran_ue_id;
    assert_eq!(c.on_node_error(NODE, &err), Some((ran, ErrorCode::DUPLICATE_PORT)));
    assert_eq!(
        c.on_rrc_uplink(
            NODE,
            2,
            None,
            RrcMessage::SetupComplete {
                nas_payload: b"n".to_vec()
            }
        ),
        Err(ControllerError::ProcedureFailed(ran))
    );
}

/// Uplink stimulus for the state-machine property test.
#[derive(Debug, Clone, Copy)]
enum Step {
    SetupRequest,
    SetupComplete,
    SecurityModeComplete,
    ReconfigurationComplete,
    Ics,
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        Just(Step::SetupRequest),
        Just(Step::SetupComplete),
        Just(Step::SecurityModeComplete),
        Just(Step::ReconfigurationComplete),
        Just(Step::Ics),
    ]
}

proptest! {
    /// Any ordering of uplink stimuli only ever advances along the legal
    /// path; everything else is rejected as a protocol violation and emits
    /// nothing.
    #[test]
    fn state_machine_rejects_out_of_order(steps in proptest::collection::vec(step(), 0..24)) {
        let mut c = controller(8);
        // Reference model: index into the legal sequence.
        let legal = [Step::SetupRequest, Step::SetupComplete, Step::Ics, Step::SecurityModeComplete, Step::ReconfigurationComplete];
        let mut pos = 0usize;
        for s in steps {
            let ran = c.ue_by_tmp_id(NODE, 1).map(|u| u.ran_ue_id);
            let res = match s {
                Step::SetupRequest => setup_request(&mut c, 1),
                Step::SetupComplete => c.on_rrc_uplink(NODE, 2, None, RrcMessage::SetupComplete { nas_payload: b"n".to_vec() }),
                Step::SecurityModeComplete => c.on_rrc_uplink(NODE, 2, None, RrcMessage::SecurityModeComplete {}),
                Step::ReconfigurationComplete => c.on_rrc_uplink(NODE, 2, None, RrcMessage::ReconfigurationComplete {}),
                Step::Ics => c.on_ngap(ics(ran.unwrap_or(1), vec![session_one()])),
            };
            let expected_ok = pos < legal.len() && std::mem::discriminant(&legal[pos]) == std::mem::discriminant(&s);
            if expected_ok {
                let out = res.expect("legal step accepted");
                prop_assert!(!out.is_empty());
                pos += 1;
            } else {
                match res {
                    Err(ControllerError::ProtocolViolation { .. })
                    | Err(ControllerError::UnknownTunnel(_))
                    | Err(ControllerError::UnknownUe(_)) => {}
                    other => prop_assert!(false, "step {:?} at {} gave {:?}", s, pos, other),
                }
            }
        }
    }
}
