use std::net::Ipv4Addr;

use super::*;
use crate::controller::QosFlowRequest;
use crate::node::Rat;

const IP1: Ipv4Addr = Ipv4Addr::new(10, 45, 0, 1);
const IP2: Ipv4Addr = Ipv4Addr::new(10, 45, 0, 2);

fn two_drb_session() -> SessionRequest {
    let flow = |flow_id, ip_dst, l4_dst, drb| QosFlowRequest {
        flow_id,
        ip_dst,
        ip_proto: 6,
        l4_dst,
        drb,
    };
    SessionRequest {
        session_id: 1,
        drbs: vec![1, 2],
        flows: vec![flow(1, IP1, 43, 1), flow(2, IP1, 23, 1), flow(3, IP2, 34, 2)],
    }
}

fn scenario(script: Vec<Stimulus>) -> Scenario {
    Scenario {
        topology: Topology {
            nodes: vec![NodeDescriptor {
                node_id: NodeId(1),
                name: "d-gNB".into(),
                rat: Rat::Nr,
                ngu_ip: Ipv4Addr::new(10, 0, 0, 1),
            }],
            ues: vec![UeSpec {
                name: "UE-1".into(),
                attach: "d-gNB".into(),
                sessions: vec![two_drb_session()],
            }],
            seed: 7,
        },
        script,
        config: SimConfig::default(),
    }
}

fn power_on(at: u64) -> Stimulus {
    Stimulus {
        at,
        action: Action::PowerOn { ue: "UE-1".into() },
    }
}

fn sig(trace: &[TraceRecord]) -> Vec<String> {
    trace
        .iter()
        .map(|r| format!("{} {} {} {}", r.src, r.dst, r.channel, r.kind))
        .collect()
}

#[test]
fn empty_script_only_bootstraps() {
    let trace = run_scenario(scenario(vec![])).unwrap();
    assert_eq!(sig(&trace), vec!["SRC d-gNB OPEN5G Open5GConfig"]);
    assert_eq!(trace[0].step, 1);
    assert_eq!(trace[0].time, 1);
}

#[test]
fn initial_access_call_flow() {
    let mut sim = Simulation::new(scenario(vec![power_on(1)])).unwrap();
    sim.run().unwrap();
    let expected = [
        "SRC d-gNB OPEN5G Open5GConfig",
        "UE-1 d-gNB SRB0 RRCSetupRequest",
        "d-gNB SRC SRB0 RRCSetupRequest",
        "SRC d-gNB OPEN5G Open5GConfig",
        "SRC d-gNB SRB0 RRCSetup",
        "d-gNB UE-1 SRB0 RRCSetup",
        "UE-1 d-gNB SRB1 RRCSetupComplete",
        "d-gNB SRC SRB1 RRCSetupComplete",
        "SRC AMF NGAP InitialUEMessage",
        "AMF SRC NGAP InitialContextSetupRequest",
        "SRC d-gNB OPEN5G Open5GConfig",
        "SRC d-gNB SRB1 SecurityModeCommand",
        "d-gNB UE-1 SRB1 SecurityModeCommand",
        "UE-1 d-gNB SRB1 SecurityModeComplete",
        "d-gNB SRC SRB1 SecurityModeComplete",
        "SRC d-gNB SRB1 RRCReconfiguration",
        "d-gNB UE-1 SRB1 RRCReconfiguration",
        "UE-1 d-gNB SRB1 RRCReconfigurationComplete",
        "d-gNB SRC SRB1 RRCReconfigurationComplete",
        "SRC AMF NGAP InitialContextSetupResponse",
    ];
    assert_eq!(sig(sim.trace()), expected);
    assert!(sim.diagnostics().is_empty(), "{:?}", sim.diagnostics());
    assert_eq!(sim.ue("UE-1").unwrap().state, UeState::Configured);
    assert_eq!(sim.node("d-gNB").unwrap().counters().errors_sent, 0);
    assert!(sim
        .trace()
        .windows(2)
        .all(|w| w[0].step < w[1].step && w[0].time <= w[1].time));
}

#[test]
fn table_after_step_eleven() {
    let mut sim = Simulation::new(scenario(vec![power_on(1)])).unwrap();
    sim.run_to_step(10).unwrap();
    assert_eq!(sim.node("d-gNB").unwrap().switch().table.len(), 4);
    sim.run_to_step(11).unwrap();
    assert_eq!(sim.node("d-gNB").unwrap().switch().table.len(), 9);
    sim.run().unwrap();
    assert_eq!(sim.node("d-gNB").unwrap().switch().table.len(), 9);
}

#[test]
fn data_paths_both_ways() {
    let mut script = vec![power_on(1)];
    script.push(Stimulus {
        at: 100,
        action: Action::UplinkData {
            ue: "UE-1".into(),
            bearer_id: 1,
            payload: b"up".to_vec(),
        },
    });
    script.push(Stimulus {
        at: 100,
        action: Action::DownlinkData {
            ue: "UE-1".into(),
            session_id: 1,
            ip_dst: IP2,
            ip_proto: 6,
            l4_dst: 34,
            payload: b"down".to_vec(),
        },
    });
    // No entry matches this one.
    script.push(Stimulus {
        at: 101,
        action: Action::DownlinkData {
            ue: "UE-1".into(),
            session_id: 1,
            ip_dst: IP2,
            ip_proto: 17,
            l4_dst: 34,
            payload: b"lost".to_vec(),
        },
    });
    let mut sim = Simulation::new(scenario(script)).unwrap();
    sim.run().unwrap();
    assert_eq!(sim.upf().received, vec![(1, b"up".to_vec())]);
    let ue = sim.ue("UE-1").unwrap();
    assert_eq!(ue.received.len(), 1);
    let (bearer, packet) = &ue.received[0];
    assert_eq!(*bearer, 2);
    let (hdr, data) = PseudoIp::parse(packet).unwrap();
    assert_eq!(hdr, PseudoIp::new(IP2, 6, 34));
    assert_eq!(data, b"down");
    let c = sim.data_counters();
    assert!(c.conserved(), "{c:?}");
    assert_eq!((c.downlink_injected, c.downlink_dropped), (2, 1));
    assert_eq!(sim.node("d-gNB").unwrap().drop_count(), 1);
}

#[test]
fn deterministic_per_seed() {
    let a = run_scenario(scenario(vec![power_on(1)])).unwrap();
    let b = run_scenario(scenario(vec![power_on(1)])).unwrap();
    assert_eq!(a, b);
    let mut other = scenario(vec![power_on(1)]);
    other.topology.seed = 8;
    let c = run_scenario(other).unwrap();
    assert_eq!(sig(&a), sig(&c));
    assert_ne!(a, c);
}

#[test]
fn power_on_twice() {
    let err = run_scenario(scenario(vec![power_on(1), power_on(2)])).unwrap_err();
    assert_eq!(
        err,
        SimError::Ue {
            ue: "UE-1".into(),
            source: UeError::NotIdle
        }
    );
}

#[test]
fn budget() {
    let mut s = scenario(vec![power_on(1)]);
    s.config.max_events = 5;
    assert_eq!(run_scenario(s).unwrap_err(), SimError::BudgetExceeded { limit: 5 });
}

#[test]
fn script_errors() {
    let unknown = Stimulus {
        at: 1,
        action: Action::PowerOn { ue: "UE-9".into() },
    };
    assert!(matches!(
        Simulation::new(scenario(vec![unknown])),
        Err(SimError::Script { index: 0, .. })
    ));
    let backwards = vec![power_on(5), power_on(4)];
    assert!(matches!(
        Simulation::new(scenario(backwards)),
        Err(SimError::Script { index: 1, .. })
    ));
    let srb = Stimulus {
        at: 1,
        action: Action::UplinkData {
            ue: "UE-1".into(),
            bearer_id: 3,
            payload: vec![],
        },
    };
    assert!(matches!(
        Simulation::new(scenario(vec![srb])),
        Err(SimError::Script { .. })
    ));
    let early = Stimulus {
        at: 1,
        action: Action::DownlinkData {
            ue: "UE-1".into(),
            session_id: 1,
            ip_dst: IP1,
            ip_proto: 6,
            l4_dst: 43,
            payload: vec![],
        },
    };
    assert!(matches!(
        run_scenario(scenario(vec![early])),
        Err(SimError::Core(CoreError::UnknownSession { .. }))
    ));
}

#[test]
fn bad_topology() {
    let mut s = scenario(vec![]);
    s.topology.ues[0].attach = "nowhere".into();
    assert!(matches!(Simulation::new(s), Err(SimError::Topology(_))));
    let mut s = scenario(vec![]);
    s.topology.ues[0].name = "d-gNB".into();
    assert!(matches!(Simulation::new(s), Err(SimError::Topology(_))));
}

#[test]
fn rejected_ue_stays_idle() {
    let mut s = scenario(vec![power_on(1)]);
    s.config.admission_cap = 0;
    let mut sim = Simulation::new(s).unwrap();
    sim.run().unwrap();
    assert_eq!(sim.trace().len(), 3);
    assert_eq!(sim.ue("UE-1").unwrap().state, UeState::AwaitingSetup);
}

#[test]
fn batch_matches_sequential() {
    let scenarios: Vec<_> = (0..8)
        .map(|seed| {
            let mut s = scenario(vec![power_on(1)]);
            s.topology.seed = seed;
            s
        })
        .collect();
    assert_eq!(run_batch(&scenarios), run_batch_seq(&scenarios));
}
