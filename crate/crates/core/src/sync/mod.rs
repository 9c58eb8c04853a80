//! State replication between rooms.

pub mod channel;
pub mod codec;
pub mod delay;
pub mod reliable;
pub mod replica;

pub use channel::{channel_deliver, Channel, ChannelError, ChannelModel, Delivery};
pub use codec::{decode, encode, CodecError, Envelope, MessageKind};
pub use delay::{mask_check, DelayBuffer, DelayError, DEFAULT_DELAY};
pub use reliable::{ReliableReceiver, ReliableSender};
pub use replica::{EntitySnapshot, Replica, Stamp};

/// Pose republish rate for authoritative rooms.
pub const PUBLISH_HZ: f64 = 20.0;
