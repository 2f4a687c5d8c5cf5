//! Event trace records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(data: &[u8]) -> u64 {
    data.iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// FNV-1a over several byte strings, each prefixed with its length.
pub fn fnv1a_parts<B: AsRef<[u8]>>(parts: &[B]) -> u64 {
    let mut h = FNV_OFFSET;
    for p in parts {
        let p = p.as_ref();
        for &b in (p.len() as u32).to_be_bytes().iter().chain(p) {
            h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "OPEN5G")]
    Open5G,
    #[serde(rename = "SRB0")]
    Srb0,
    #[serde(rename = "SRB1")]
    Srb1,
    #[serde(rename = "SRB2")]
    Srb2,
    #[serde(rename = "NGAP")]
    Ngap,
    #[serde(rename = "NGU")]
    Ngu,
    #[serde(rename = "RADIO_DATA")]
    RadioData,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::Open5G,
        Channel::Srb0,
        Channel::Srb1,
        Channel::Srb2,
        Channel::Ngap,
        Channel::Ngu,
        Channel::RadioData,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Open5G => "OPEN5G",
            Channel::Srb0 => "SRB0",
            Channel::Srb1 => "SRB1",
            Channel::Srb2 => "SRB2",
            Channel::Ngap => "NGAP",
            Channel::Ngu => "NGU",
            Channel::RadioData => "RADIO_DATA",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown channel {0:?}")]
pub struct UnknownChannel(pub String);

impl FromStr for Channel {
    type Err = UnknownChannel;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownChannel(s.to_string()))
    }
}

/// One message delivery.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    /// 1-based, strictly increasing.
    pub step: u64,
    /// Virtual tick of delivery.
    pub time: u64,
    pub src: String,
    pub dst: String,
    pub channel: Channel,
    pub kind: String,
    /// FNV-1a of the canonical message bytes.
    pub digest: u64,
}

impl TraceRecord {
    /// The part of the record fixed by the call flow, ignoring timing and
    /// contents.
    pub fn signature(&self) -> (&str, &str, Channel, &str) {
        (&self.src, &self.dst, self.channel, &self.kind)
    }
}
