//! Ordered, exactly-once delivery of game events on top of the lossy
//! channel: retransmit until acknowledged, buffer gaps on the receiving
//! side, acknowledge cumulatively.

use std::collections::BTreeMap;

use crate::record::Record;

use super::codec::{Envelope, MessageKind};

pub const RETRANSMIT_INTERVAL_US: u64 = 200_000;

#[derive(Debug, Clone)]
struct Outstanding {
    body: Record,
    last_sent_us: u64,
}

#[derive(Debug, Clone)]
pub struct ReliableSender {
    room_id: u8,
    next_seq: u32,
    unacked: BTreeMap<u32, Outstanding>,
}

impl ReliableSender {
    pub fn new(room_id: u8) -> Self {
        ReliableSender {
            room_id,
            next_seq: 1,
            unacked: BTreeMap::new(),
        }
    }

    fn envelope(&self, seq: u32, body: &Record, now_us: u64) -> Envelope {
        Envelope {
            kind: MessageKind::GameEvent,
            room_id: self.room_id,
            seq,
            sent_at_us: now_us,
            body: body.clone(),
        }
    }

    /// First transmission of a new event.
    pub fn send(&mut self, body: Record, now_us: u64) -> Envelope {
        let seq = self.next_seq;
        self.next_seq += 1;
        let e = self.envelope(seq, &body, now_us);
        self.unacked.insert(
            seq,
            Outstanding {
                body,
                last_sent_us: now_us,
            },
        );
        e
    }

    /// Retransmissions due at `now_us`.
    pub fn due(&mut self, now_us: u64) -> Vec<Envelope> {
        let room_id = self.room_id;
        self.unacked
            .iter_mut()
            .filter(|(_, o)| now_us >= o.last_sent_us + RETRANSMIT_INTERVAL_US)
            .map(|(&seq, o)| {
                o.last_sent_us = now_us;
                Envelope {
                    kind: MessageKind::GameEvent,
                    room_id,
                    seq,
                    sent_at_us: now_us,
                    body: o.body.clone(),
                }
            })
            .collect()
    }

    /// Cumulative acknowledgement of everything up to `upto`.
    pub fn on_ack(&mut self, upto: u32) {
        self.unacked.retain(|&seq, _| seq > upto);
    }

    pub fn outstanding(&self) -> usize {
        self.unacked.len()
    }
}

#[derive(Debug, Clone)]
pub struct ReliableReceiver {
    expected: u32,
    buffered: BTreeMap<u32, Record>,
}

impl Default for ReliableReceiver {
    fn default() -> Self {
        ReliableReceiver {
            expected: 1,
            buffered: BTreeMap::new(),
        }
    }
}

impl ReliableReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts one transmission and returns the events now deliverable,
    /// in order. Old or repeated sequence numbers yield nothing.
    pub fn receive(&mut self, seq: u32, body: Record) -> Vec<(u32, Record)> {
        if seq >= self.expected {
            self.buffered.entry(seq).or_insert(body);
        }
        let mut out = Vec::new();
        while let Some(body) = self.buffered.remove(&self.expected) {
            out.push((self.expected, body));
            self.expected += 1;
        }
        out
    }

    /// Highest sequence number delivered so far.
    pub fn cumulative_ack(&self) -> u32 {
        self.expected - 1
    }

    pub fn gap_buffered(&self) -> usize {
        self.buffered.len()
    }
}

/// Body of an acknowledgement envelope.
pub fn ack_record(upto: u32) -> Record {
    Record::new().int("ack", i64::from(upto))
}

pub fn ack_of(e: &Envelope) -> Option<u32> {
    if e.kind != MessageKind::Ack {
        return None;
    }
    e.body.get_int("ack").ok().and_then(|v| u32::try_from(v).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sync::channel::{Channel, ChannelModel};
    use proptest::prelude::*;

    fn ev(n: i64) -> Record {
        Record::new().int("n", n)
    }

    #[test]
    fn in_order_once() {
        let mut tx = ReliableSender::new(1);
        let mut rx = ReliableReceiver::new();
        let mut got = Vec::new();
        for n in 1..=5 {
            let e = tx.send(ev(n), 0);
            got.extend(rx.receive(e.seq, e.body));
        }
        tx.on_ack(rx.cumulative_ack());
        assert_eq!(tx.outstanding(), 0);
        let ns: Vec<i64> = got.iter().map(|(_, r)| r.get_int("n").unwrap()).collect();
        assert_eq!(ns, [1, 2, 3, 4, 5]);
    }

    #[test]
    fn gap_is_held_until_retransmission() {
        let mut tx = ReliableSender::new(1);
        let mut rx = ReliableReceiver::new();
        let e1 = tx.send(ev(1), 0);
        let _lost = tx.send(ev(2), 0);
        let e3 = tx.send(ev(3), 0);
        assert_eq!(rx.receive(e1.seq, e1.body).len(), 1);
        assert!(rx.receive(e3.seq, e3.body).is_empty());
        assert_eq!(rx.gap_buffered(), 1);
        tx.on_ack(rx.cumulative_ack());
        assert!(tx.due(100_000).is_empty());
        let again = tx.due(200_000);
        let seqs: Vec<u32> = again.iter().map(|e| e.seq).collect();
        assert_eq!(seqs, [2, 3]);
        assert!(again.iter().all(|e| e.sent_at_us == 200_000));
        let out = rx.receive(again[0].seq, again[0].body.clone());
        let seqs: Vec<u32> = out.iter().map(|(s, _)| *s).collect();
        assert_eq!(seqs, [2, 3]);
        assert!(rx.receive(again[1].seq, again[1].body.clone()).is_empty());
    }

    #[test]
    fn duplicate_discarded() {
        let mut rx = ReliableReceiver::new();
        for s in 1..=3 {
            rx.receive(s, ev(s.into()));
        }
        assert_eq!(rx.receive(4, ev(4)).len(), 1);
        assert!(rx.receive(4, ev(4)).is_empty());
        assert_eq!(rx.cumulative_ack(), 4);
    }

    fn run_lossy(seed: u64, drop_prob: f64, events: usize) -> Vec<i64> {
        let model = ChannelModel {
            base_latency: 0.05,
            jitter: 0.04,
            drop_prob,
            seed,
        };
        let mut ch = Channel::new(model).unwrap();
        let mut tx = ReliableSender::new(1);
        let mut rx = ReliableReceiver::new();
        let mut ack_seq = 0;
        let mut got = Vec::new();
        let mut tick = 0u64;
        while got.len() < events {
            let now = tick * 20_000;
            if (tick as usize) < events {
                ch.send(2, &tx.send(ev(tick as i64), now)).unwrap();
            }
            for e in tx.due(now) {
                ch.send(2, &e).unwrap();
            }
            for (to, e) in ch.poll(now).unwrap() {
                if to == 2 {
                    got.extend(rx.receive(e.seq, e.body).into_iter().map(|(_, r)| r.get_int("n").unwrap()));
                    ack_seq += 1;
                    let ack = Envelope {
                        kind: MessageKind::Ack,
                        room_id: 2,
                        seq: ack_seq,
                        sent_at_us: now,
                        body: ack_record(rx.cumulative_ack()),
                    };
                    ch.send(1, &ack).unwrap();
                } else {
                    tx.on_ack(ack_of(&e).unwrap());
                }
            }
            tick += 1;
            assert!(tick < 1_000_000, "no progress");
        }
        got
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exactly_once_in_order(seed in any::<u64>(), drop_prob in 0.0..0.9f64) {
            let got = run_lossy(seed, drop_prob, 30);
            prop_assert_eq!(got, (0..30).collect::<Vec<i64>>());
        }
    }
}
