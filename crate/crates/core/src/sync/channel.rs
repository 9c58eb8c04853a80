//! Deterministic lossy network between rooms.
//!
//! Every message's fate (dropped or not, and its jitter) is drawn from a
//! generator seeded by the channel seed and the message identity, so the
//! schedule does not depend on how many other messages were sent.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::codec::{decode, encode, to_micros, CodecError, Envelope};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("drop probability {0} outside [0, 1]")]
    DropProbability(f64),
    #[error("latency parameter {name} = {value} must be finite and nonnegative")]
    Latency { name: &'static str, value: f64 },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub base_latency: f64,
    pub jitter: f64,
    pub drop_prob: f64,
    pub seed: u64,
}

impl ChannelModel {
    pub const LOSSLESS: ChannelModel = ChannelModel {
        base_latency: 0.0,
        jitter: 0.0,
        drop_prob: 0.0,
        seed: 0,
    };

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(ChannelError::DropProbability(self.drop_prob));
        }
        for (name, value) in [("base_latency", self.base_latency), ("jitter", self.jitter)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ChannelError::Latency { name, value });
            }
        }
        Ok(())
    }

    /// Delivery time in microseconds for `e` sent to room `to`, or `None`
    /// if the message is lost.
    pub fn fate(&self, to: u8, e: &Envelope) -> Option<u64> {
        let mut h = self.seed;
        for word in [
            u64::from(e.room_id),
            u64::from(to),
            u64::from(e.kind.code()),
            u64::from(e.seq),
            e.sent_at_us,
        ] {
            h = splitmix(h ^ word);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let lost = rng.gen::<f64>() < self.drop_prob;
        let u: f64 = rng.gen_range(-1.0..=1.0);
        if lost {
            return None;
        }
        let delay = (self.base_latency + self.jitter * u).max(0.0);
        Some(e.sent_at_us + to_micros(delay))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub deliver_at_us: u64,
    pub to: u8,
    pub envelope: Envelope,
}

/// Pure schedule for a batch of `(destination, envelope)` messages,
/// sorted by delivery time then input order.
pub fn channel_deliver(msgs: &[(u8, Envelope)], model: &ChannelModel) -> Vec<Delivery> {
    let mut out: Vec<(u64, usize, Delivery)> = msgs
        .iter()
        .enumerate()
        .filter_map(|(i, (to, e))| {
            model.fate(*to, e).map(|t| {
                (
                    t,
                    i,
                    Delivery {
                        deliver_at_us: t,
                        to: *to,
                        envelope: e.clone(),
                    },
                )
            })
        })
        .collect();
    out.sort_by_key(|(t, i, _)| (*t, *i));
    out.into_iter().map(|(_, _, d)| d).collect()
}

/// Stateful wrapper: messages travel as bytes and come out at their
/// scheduled time.
#[derive(Debug)]
pub struct Channel {
    model: ChannelModel,
    in_flight: BinaryHeap<Reverse<(u64, u64, u8, Vec<u8>)>>,
    sent: u64,
    dropped: u64,
}

impl Channel {
    pub fn new(model: ChannelModel) -> Result<Self, ChannelError> {
        model.validate()?;
        Ok(Channel {
            model,
            in_flight: BinaryHeap::new(),
            sent: 0,
            dropped: 0,
        })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn send(&mut self, to: u8, e: &Envelope) -> Result<(), ChannelError> {
        let bytes = encode(e)?;
        self.sent += 1;
        match self.model.fate(to, e) {
            Some(t) => self.in_flight.push(Reverse((t, self.sent, to, bytes))),
            None => self.dropped += 1,
        }
        Ok(())
    }

    /// Messages due at or before `now_us`, in delivery order.
    pub fn poll(&mut self, now_us: u64) -> Result<Vec<(u8, Envelope)>, ChannelError> {
        let mut out = Vec::new();
        while let Some(Reverse((t, ..))) = self.in_flight.peek() {
            if *t > now_us {
                break;
            }
            let Reverse((_, _, to, bytes)) = self.in_flight.pop().expect("peeked");
            out.push((to, decode(&bytes)?));
        }
        Ok(out)
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}
