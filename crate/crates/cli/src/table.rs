//! Flow table dumps.
//!
//! Rows are `match<TAB>action` in lookup order. Ports are shown by what
//! they are bound to rather than by id, so dumps compare across runs.

use std::collections::BTreeSet;

use open5g_core::switch::{FlowEntry, Switch};
use open5g_core::wire::{FlowMatch, PortId, PortSpec};

use crate::scenario::Proto;
use crate::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Row {
    pub flow_match: String,
    pub action: String,
}

fn port(switch: &Switch, id: PortId) -> String {
    switch
        .ports
        .get(id)
        .map_or_else(|| format!("port({id})"), |p| p.spec.to_string())
}

pub fn render_match(switch: &Switch, m: &FlowMatch) -> String {
    let mut parts = Vec::new();
    if let Some(p) = m.in_port {
        parts.push(port(switch, p));
    }
    if let Some(k) = m.radio {
        parts.push(format!("radio(crnti={},bearer={})", k.crnti, k.bearer_id));
    }
    if let Some(ip) = m.ip_dst {
        parts.push(format!("ip_dst={ip}"));
    }
    if let Some(p) = m.ip_proto {
        parts.push(format!("proto={}", Proto(p)));
    }
    if let Some(p) = m.l4_dst {
        parts.push(format!("l4_dst={p}"));
    }
    if parts.is_empty() {
        "*".to_string()
    } else {
        parts.join(",")
    }
}

/// Whether the entry belongs to the common SRB0 channel rather than a UE.
pub fn is_common(switch: &Switch, e: &FlowEntry) -> bool {
    let common_port =
        |id: PortId| matches!(switch.ports.get(id).map(|p| &p.spec), Some(PortSpec::Radio(r)) if r.crnti == 0);
    e.flow_match.radio.is_some_and(|k| k.crnti == 0)
        || e.flow_match.in_port.is_some_and(common_port)
        || common_port(e.action.out_port())
}

/// Table rows; common-channel entries only with `include_common`.
pub fn rows(switch: &Switch, include_common: bool) -> Vec<Row> {
    switch
        .table
        .ordered()
        .into_iter()
        .filter(|e| include_common || !is_common(switch, e))
        .map(|e| Row {
            flow_match: render_match(switch, &e.flow_match),
            action: format!("output:{}", port(switch, e.action.out_port())),
        })
        .collect()
}

pub fn render(title: &str, rows: &[Row]) -> String {
    let mut out = format!("# {title}\n# match\taction\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\n", r.flow_match, r.action));
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<Row>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| match l.trim_end_matches('\r').split_once('\t') {
            Some((m, a)) if !m.is_empty() && !a.is_empty() && !a.contains('\t') => Ok(Row {
                flow_match: m.to_string(),
                action: a.to_string(),
            }),
            _ => Err(ParseError {
                line: i + 1,
                message: "expected `match<TAB>action`".into(),
            }),
        })
        .collect()
}

/// Row-set equality, ignoring order.
pub fn same_rows(a: &[Row], b: &[Row]) -> bool {
    a.len() == b.len() && a.iter().collect::<BTreeSet<_>>() == b.iter().collect::<BTreeSet<_>>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_round_trip() {
        let rows = vec![
            Row {
                flow_match: "radio(crnti=61,bearer=1)".into(),
                action: "output:gtp(udp=2152,teid=1)".into(),
            },
            Row {
                flow_match: "sig(tunnel=2)".into(),
                action: "output:radio(crnti=61,bearer=3)".into(),
            },
        ];
        let text = render("t", &rows);
        assert_eq!(parse(&text).unwrap(), rows);
        assert_eq!(parse("only-one-field\n").unwrap_err().line, 1);
        let mut rev = rows.clone();
        rev.reverse();
        assert!(same_rows(&rows, &rev));
        assert!(!same_rows(&rows, &rows[..1]));
    }
}
