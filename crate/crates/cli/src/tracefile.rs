//! Trace files: one tab-separated record per line.
//!
//! Fields are `step time src dst channel kind digest`, the digest as 16 hex
//! digits. Lines starting with `#` are comments. Goldens may write `-` for
//! time and digest, which then match anything.

use std::fmt::Write as _;

use open5g_core::netsim::{Channel, TraceRecord};

use crate::ParseError;

pub const HEADER: &str = "# step\ttime\tsrc\tdst\tchannel\tkind\tdigest";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceLine {
    pub step: u64,
    pub time: Option<u64>,
    pub src: String,
    pub dst: String,
    pub channel: Channel,
    pub kind: String,
    pub digest: Option<u64>,
}

impl TraceLine {
    pub fn signature(&self) -> (&str, &str, Channel, &str) {
        (&self.src, &self.dst, self.channel, &self.kind)
    }

    /// The full record, if time and digest are present.
    pub fn to_record(&self) -> Option<TraceRecord> {
        Some(TraceRecord {
            step: self.step,
            time: self.time?,
            src: self.src.clone(),
            dst: self.dst.clone(),
            channel: self.channel,
            kind: self.kind.clone(),
            digest: self.digest?,
        })
    }
}

impl From<&TraceRecord> for TraceLine {
    fn from(r: &TraceRecord) -> Self {
        Self {
            step: r.step,
            time: Some(r.time),
            src: r.src.clone(),
            dst: r.dst.clone(),
            channel: r.channel,
            kind: r.kind.clone(),
            digest: Some(r.digest),
        }
    }
}

pub fn render_lines(lines: &[TraceLine]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for l in lines {
        let time = l.time.map_or_else(|| "-".to_string(), |t| t.to_string());
        let digest = l.digest.map_or_else(|| "-".to_string(), |d| format!("{d:016x}"));
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.step, time, l.src, l.dst, l.channel, l.kind, digest
        )
        .expect("writing to a String");
    }
    out
}

pub fn render(records: &[TraceRecord]) -> String {
    render_lines(&records.iter().map(TraceLine::from).collect::<Vec<_>>())
}

fn field_ok(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

pub fn parse(text: &str) -> Result<Vec<TraceLine>, ParseError> {
    let mut out: Vec<TraceLine> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ParseError { line, message };
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = trimmed.split('\t').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 tab-separated fields, found {}", f.len())));
        }
        let step: u64 = f[0].parse().map_err(|_| err(format!("bad step {:?}", f[0])))?;
        if let Some(prev) = out.last() {
            if step <= prev.step {
                return Err(err(format!("step {step} does not increase")));
            }
        }
        let time = match f[1] {
            "-" => None,
            t => Some(t.parse().map_err(|_| err(format!("bad time {t:?}")))?),
        };
        for (name, v) in [("src", f[2]), ("dst", f[3]), ("kind", f[5])] {
            if !field_ok(v) {
                return Err(err(format!("bad {name} {v:?}")));
            }
        }
        let channel: Channel = f[4].parse().map_err(|e| err(format!("{e}")))?;
        let digest = match f[6] {
            "-" => None,
            d if d.len() == 16 => Some(u64::from_str_radix(d, 16).map_err(|_| err(format!("bad digest {d:?}")))?),
            d => return Err(err(format!("bad digest {d:?}"))),
        };
        out.push(TraceLine {
            step,
            time,
            src: f[2].to_string(),
            dst: f[3].to_string(),
            channel,
            kind: f[5].to_string(),
            digest,
        });
    }
    Ok(out)
}

/// First point where two traces disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// Golden step number at the divergence, or the trace's step if the
    /// golden ran out.
    pub step: u64,
    pub expected: Option<TraceLine>,
    pub actual: Option<TraceLine>,
}

/// Compares `(src, dst, channel, kind)` sequences after keeping only
/// `channels` (all when `None`).
pub fn compare(trace: &[TraceLine], golden: &[TraceLine], channels: Option<&[Channel]>) -> Option<Divergence> {
    let keep = |l: &&TraceLine| channels.is_none_or(|c| c.contains(&l.channel));
    let mut t = trace.iter().filter(keep);
    let mut g = golden.iter().filter(keep);
    loop {
        match (t.next(), g.next()) {
            (None, None) => return None,
            (a, e) if a.map(TraceLine::signature) == e.map(TraceLine::signature) => {}
            (a, e) => {
                return Some(Divergence {
                    step: e.or(a).map_or(0, |l| l.step),
                    expected: e.cloned(),
                    actual: a.cloned(),
                })
            }
        }
    }
}
