//! Last-writer-wins entity store.

use std::collections::BTreeMap;

use crate::geometry::Pose2;
use crate::record::Record;

use super::codec::{Envelope, MessageKind};

/// Total order on updates: sender clock, then sequence, then room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stamp {
    pub sent_at_us: u64,
    pub seq: u32,
    pub room_id: u8,
}

impl Stamp {
    pub fn of(e: &Envelope) -> Self {
        Stamp {
            sent_at_us: e.sent_at_us,
            seq: e.seq,
            room_id: e.room_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntitySnapshot {
    pub entity: String,
    pub pose: Pose2,
    pub stamp: Stamp,
}

impl EntitySnapshot {
    pub fn to_record(&self) -> Record {
        Record::new()
            .text("entity", self.entity.as_str())
            .num("x", self.pose.position.x)
            .num("y", self.pose.position.y)
            .num("h", self.pose.heading)
    }

    /// Resends an unchanged snapshot under a fresh header. The original
    /// stamp rides in the body so receivers see the same version.
    pub fn republish(&self, seq: u32, sent_at_us: u64) -> Envelope {
        Envelope {
            kind: MessageKind::PoseUpdate,
            room_id: self.stamp.room_id,
            seq,
            sent_at_us,
            body: self
                .to_record()
                .int("stamp_us", self.stamp.sent_at_us as i64)
                .int("stamp_seq", self.stamp.seq.into()),
        }
    }

    /// Reads a PoseUpdate envelope.
    pub fn from_envelope(e: &Envelope) -> Option<Self> {
        if e.kind != MessageKind::PoseUpdate {
            return None;
        }
        let b = &e.body;
        let pose = Pose2::new(
            crate::geometry::Vec2::new(b.get_f64("x").ok()?, b.get_f64("y").ok()?),
            b.get_f64("h").ok()?,
        );
        Some(EntitySnapshot {
            entity: b.get_text("entity").ok()?.to_string(),
            pose,
            stamp: match (b.get_int("stamp_us"), b.get_int("stamp_seq")) {
                (Ok(us), Ok(seq)) => Stamp {
                    sent_at_us: u64::try_from(us).ok()?,
                    seq: u32::try_from(seq).ok()?,
                    room_id: e.room_id,
                },
                _ => Stamp::of(e),
            },
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Replica {
    entities: BTreeMap<String, EntitySnapshot>,
}

impl Replica {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `snap` iff it is newer than what is held. Returns whether the
    /// replica changed.
    pub fn reconcile(&mut self, snap: EntitySnapshot) -> bool {
        match self.entities.get(&snap.entity) {
            Some(held) if held.stamp >= snap.stamp => false,
            _ => {
                self.entities.insert(snap.entity.clone(), snap);
                true
            }
        }
    }

    pub fn get(&self, entity: &str) -> Option<&EntitySnapshot> {
        self.entities.get(entity)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntitySnapshot> {
        self.entities.values()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sync::channel::{Channel, ChannelModel};
    use crate::sync::codec::{to_micros, Envelope};
    use proptest::prelude::*;

    fn snap(entity: &str, x: f64, sent_at: f64, seq: u32, room_id: u8) -> EntitySnapshot {
        EntitySnapshot {
            entity: entity.into(),
            pose: Pose2::at(x, 0.0),
            stamp: Stamp {
                sent_at_us: to_micros(sent_at),
                seq,
                room_id,
            },
        }
    }

    #[test]
    fn lww_examples() {
        let mut r = Replica::new();
        assert!(r.reconcile(snap("mug", 0.1, 5.0, 3, 1)));
        assert!(!r.reconcile(snap("mug", 0.2, 5.0, 2, 1)));
        assert_eq!(r.get("mug").unwrap().pose.position.x, 0.1);
        assert!(!r.reconcile(snap("mug", 0.3, 5.0, 3, 1)));

        let mut r = Replica::new();
        r.reconcile(snap("mug", 0.1, 5.0, 3, 2));
        r.reconcile(snap("mug", 0.2, 5.0, 3, 1));
        assert_eq!(r.get("mug").unwrap().stamp.room_id, 2);
    }

    #[test]
    fn envelope_round_trip() {
        let s = snap("ctrl", 0.25, 1.0, 4, 2);
        let e = Envelope {
            kind: MessageKind::PoseUpdate,
            room_id: 2,
            seq: 4,
            sent_at_us: s.stamp.sent_at_us,
            body: s.to_record(),
        };
        assert_eq!(EntitySnapshot::from_envelope(&e), Some(s));
    }

    proptest! {
        #[test]
        fn order_and_duplicates_do_not_matter(
            msgs in proptest::collection::vec((0usize..3, 0u64..20, 0u32..4, 1u8..3, -1.0..1.0f64), 1..30),
            perm in proptest::collection::vec(any::<prop::sample::Index>(), 1..60),
        ) {
            let names = ["a", "b", "c"];
            let all: Vec<EntitySnapshot> = msgs.iter().map(|&(e, t, seq, room, x)| EntitySnapshot {
                entity: names[e].into(),
                pose: Pose2::at(x, 0.0),
                stamp: Stamp { sent_at_us: t, seq, room_id: room },
            }).collect();
            // Distinct stamps per entity carry the same pose in practice;
            // keep that property so the winner is well defined.
            let mut canonical: BTreeMap<(String, Stamp), Pose2> = BTreeMap::new();
            for s in &all {
                canonical.entry((s.entity.clone(), s.stamp)).or_insert(s.pose);
            }
            let fix = |s: &EntitySnapshot| EntitySnapshot { pose: canonical[&(s.entity.clone(), s.stamp)], ..s.clone() };

            let mut forward = Replica::new();
            for s in &all { forward.reconcile(fix(s)); }
            let mut shuffled = Replica::new();
            for idx in &perm { shuffled.reconcile(fix(idx.get(&all))); }
            for s in &all { shuffled.reconcile(fix(s)); }
            prop_assert_eq!(forward, shuffled);
        }
    }

    #[test]
    fn republish_keeps_stamp() {
        let s = snap("mug", 0.4, 2.0, 9, 1);
        let e = s.republish(15, to_micros(3.0));
        assert_eq!((e.seq, e.sent_at_us), (15, 3_000_000));
        assert_eq!(EntitySnapshot::from_envelope(&e), Some(s));
    }

    /// Two rooms republishing at 20 Hz over a lossy link hold identical
    /// snapshots within a second of the last change.
    #[test]
    fn replicas_converge() {
        for trial in 0..200u64 {
            let model = ChannelModel {
                base_latency: 0.05,
                jitter: 0.1,
                drop_prob: 0.2,
                seed: trial,
            };
            let mut ch = Channel::new(model).unwrap();
            let mut replicas = [Replica::new(), Replica::new()];
            let mut seqs = [0u32; 2];
            let mut held: [Option<EntitySnapshot>; 2] = [None, None];
            let last_change = 2.0;
            for tick in 0..=150u64 {
                let now = tick as f64 * 0.02;
                let now_us = to_micros(now);
                for (to, e) in ch.poll(now_us).unwrap() {
                    let s = EntitySnapshot::from_envelope(&e).unwrap();
                    replicas[usize::from(to - 1)].reconcile(s);
                }
                if tick % 5 != 0 {
                    continue;
                }
                for room in 0..2usize {
                    seqs[room] += 1;
                    if now <= last_change + 1e-9 {
                        let x = (now * (room as f64 + 1.0) + trial as f64 * 0.01).sin() * 0.3;
                        let e = Envelope {
                            kind: MessageKind::PoseUpdate,
                            room_id: room as u8 + 1,
                            seq: seqs[room],
                            sent_at_us: now_us,
                            body: Record::new()
                                .text("entity", format!("obj{}", room + 1))
                                .num("x", x)
                                .num("y", 0.1 * room as f64)
                                .num("h", now),
                        };
                        held[room] = EntitySnapshot::from_envelope(&e);
                    }
                    let s = held[room].clone().unwrap();
                    replicas[room].reconcile(s.clone());
                    ch.send(2 - room as u8, &s.republish(seqs[room], now_us)).unwrap();
                }
            }
            for name in ["obj1", "obj2"] {
                let (a, b) = (replicas[0].get(name).unwrap(), replicas[1].get(name).unwrap());
                assert_eq!(a.stamp, b.stamp, "trial {trial} {name}");
                assert!(a.pose.position.distance(b.pose.position) < 1e-6, "trial {trial} {name}: {a:?} vs {b:?}");
                assert!((a.pose.heading - b.pose.heading).abs() < 1e-6);
            }
        }
    }
}
