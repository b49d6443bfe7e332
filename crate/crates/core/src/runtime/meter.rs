use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::wire::FRAME_HEADER_BYTES;

/// Traffic attributed to one protocol label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStats {
    pub online_bits: u64,
    pub online_bytes: u64,
    pub messages: u64,
    pub offline_bits: u64,
    pub rounds: u64,
}

/// Communication totals of one or more two-party runs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommMeter {
    /// Exact payload bits, the quantity compared against cost formulas.
    pub online_bits: u64,
    /// Sum of byte-rounded payload lengths.
    pub online_bytes: u64,
    pub framing_bytes: u64,
    pub messages: u64,
    /// Dealer-to-party-1 corrections.
    pub offline_bits: u64,
    pub rounds: u64,
    pub by_label: BTreeMap<String, LabelStats>,
}

impl CommMeter {
    pub fn offline_bytes(&self) -> u64 {
        self.offline_bits.div_ceil(8)
    }

    /// Adds a later, sequential run.
    pub fn absorb(&mut self, other: &CommMeter) {
        self.online_bits += other.online_bits;
        self.online_bytes += other.online_bytes;
        self.framing_bytes += other.framing_bytes;
        self.messages += other.messages;
        self.offline_bits += other.offline_bits;
        self.rounds += other.rounds;
        for (k, v) in &other.by_label {
            let e = self.by_label.entry(k.clone()).or_default();
            e.online_bits += v.online_bits;
            e.online_bytes += v.online_bytes;
            e.messages += v.messages;
            e.offline_bits += v.offline_bits;
            e.rounds += v.rounds;
        }
    }

    /// Sums every label whose path starts with `prefix`.
    pub fn label_total(&self, prefix: &str) -> LabelStats {
        let mut t = LabelStats::default();
        for (_, v) in self.by_label.iter().filter(|(k, _)| k.starts_with(prefix)) {
            t.online_bits += v.online_bits;
            t.online_bytes += v.online_bytes;
            t.messages += v.messages;
            t.offline_bits += v.offline_bits;
            t.rounds += v.rounds;
        }
        t
    }
}

#[derive(Default)]
struct LabelAcc {
    stats: LabelStats,
    depths: BTreeSet<u64>,
}

/// One party's view while running; both are merged by the harness.
#[derive(Default)]
pub(crate) struct PartyMeter {
    labels: BTreeMap<String, LabelAcc>,
    pub(crate) max_depth: u64,
}

impl PartyMeter {
    pub(crate) fn on_send(&mut self, label: &str, bits: u64, bytes: u64, depth: u64) {
        let acc = self.labels.entry(label.to_string()).or_default();
        acc.stats.online_bits += bits;
        acc.stats.online_bytes += bytes;
        acc.stats.messages += 1;
        acc.depths.insert(depth);
        self.max_depth = self.max_depth.max(depth);
    }

    pub(crate) fn on_offline(&mut self, label: &str, bits: u64) {
        self.labels.entry(label.to_string()).or_default().stats.offline_bits += bits;
    }

    pub(crate) fn merge(a: PartyMeter, b: PartyMeter) -> CommMeter {
        let mut all: BTreeMap<String, LabelAcc> = a.labels;
        for (k, v) in b.labels {
            let e = all.entry(k).or_default();
            e.stats.online_bits += v.stats.online_bits;
            e.stats.online_bytes += v.stats.online_bytes;
            e.stats.messages += v.stats.messages;
            e.stats.offline_bits += v.stats.offline_bits;
            e.depths.extend(v.depths);
        }
        let mut m = CommMeter { rounds: a.max_depth.max(b.max_depth), ..Default::default() };
        for (k, mut v) in all {
            v.stats.rounds = v.depths.len() as u64;
            m.online_bits += v.stats.online_bits;
            m.online_bytes += v.stats.online_bytes;
            m.messages += v.stats.messages;
            m.offline_bits += v.stats.offline_bits;
            m.by_label.insert(k, v.stats);
        }
        m.framing_bytes = m.messages * FRAME_HEADER_BYTES;
        m
    }
}

/// Link model: `time = rounds · latency + bits / bandwidth`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub name: &'static str,
    pub bandwidth_bps: f64,
    pub latency_s: f64,
}

impl NetworkModel {
    pub const NORMAL: NetworkModel = NetworkModel { name: "normal", bandwidth_bps: 800e6, latency_s: 0.022e-3 };
    pub const NARROW: NetworkModel = NetworkModel { name: "nb", bandwidth_bps: 200e6, latency_s: 0.022e-3 };
    pub const HIGH_LATENCY: NetworkModel = NetworkModel { name: "hl", bandwidth_bps: 800e6, latency_s: 50e-3 };

    pub const ALL: [NetworkModel; 3] = [Self::NORMAL, Self::NARROW, Self::HIGH_LATENCY];

    pub fn by_name(name: &str) -> Option<NetworkModel> {
        Self::ALL.into_iter().find(|m| m.name == name)
    }

    pub fn estimate(&self, rounds: u64, bits: u64) -> f64 {
        rounds as f64 * self.latency_s + bits as f64 / self.bandwidth_bps
    }
}

pub fn estimate_time(meter: &CommMeter, model: &NetworkModel) -> f64 {
    model.estimate(meter.rounds, meter.online_bits)
}
