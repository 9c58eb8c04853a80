//! Binary framing for envelopes: fixed header plus a text record body.

use thiserror::Error;

use crate::record::{Record, RecordError};

pub const MAGIC: &[u8; 4] = b"HPRX";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic")]
    BadMagic,
    #[error("unknown wire version {0}")]
    UnknownVersion(u8),
    #[error("truncated message: need {need} bytes, have {have}")]
    TruncatedBody { need: usize, have: usize },
    #[error("malformed body: {0}")]
    MalformedBody(String),
    #[error("body of {0} bytes does not fit the length field")]
    BodyTooLong(usize),
}

impl From<RecordError> for CodecError {
    fn from(e: RecordError) -> Self {
        CodecError::MalformedBody(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    PoseUpdate,
    BindingUpdate,
    GestureEvent,
    GameEvent,
    Ack,
}

impl MessageKind {
    pub const ALL: [MessageKind; 5] = [
        MessageKind::PoseUpdate,
        MessageKind::BindingUpdate,
        MessageKind::GestureEvent,
        MessageKind::GameEvent,
        MessageKind::Ack,
    ];

    pub fn code(self) -> u8 {
        match self {
            MessageKind::PoseUpdate => 1,
            MessageKind::BindingUpdate => 2,
            MessageKind::GestureEvent => 3,
            MessageKind::GameEvent => 4,
            MessageKind::Ack => 5,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == c)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::PoseUpdate => "pose",
            MessageKind::BindingUpdate => "binding",
            MessageKind::GestureEvent => "gesture",
            MessageKind::GameEvent => "game",
            MessageKind::Ack => "ack",
        }
    }
}

/// Seconds to whole microseconds, the resolution of `sent_at` on the wire.
pub fn to_micros(t: f64) -> u64 {
    (t * 1e6).round().max(0.0) as u64
}

pub fn from_micros(us: u64) -> f64 {
    us as f64 / 1e6
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub kind: MessageKind,
    pub room_id: u8,
    pub seq: u32,
    pub sent_at_us: u64,
    pub body: Record,
}

impl Envelope {
    pub fn sent_at(&self) -> f64 {
        from_micros(self.sent_at_us)
    }
}

pub fn encode(e: &Envelope) -> Result<Vec<u8>, CodecError> {
    let body = e.body.to_string().into_bytes();
    let len = u16::try_from(body.len()).map_err(|_| CodecError::BodyTooLong(body.len()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(e.kind.code());
    out.push(e.room_id);
    out.extend_from_slice(&e.seq.to_be_bytes());
    out.extend_from_slice(&e.sent_at_us.to_be_bytes());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Envelope, CodecError> {
    let truncated = |need| CodecError::TruncatedBody {
        need,
        have: bytes.len(),
    };
    if bytes.len() < MAGIC.len() {
        return Err(truncated(HEADER_LEN));
    }
    if &bytes[..4] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    if bytes[4] != VERSION {
        return Err(CodecError::UnknownVersion(bytes[4]));
    }
    let kind = MessageKind::from_code(bytes[5])
        .ok_or_else(|| CodecError::MalformedBody(format!("unknown kind {}", bytes[5])))?;
    let room_id = bytes[6];
    let seq = u32::from_be_bytes(bytes[7..11].try_into().expect("4 bytes"));
    let sent_at_us = u64::from_be_bytes(bytes[11..19].try_into().expect("8 bytes"));
    let len = u16::from_be_bytes(bytes[19..21].try_into().expect("2 bytes")) as usize;
    let need = HEADER_LEN + len;
    if bytes.len() < need {
        return Err(truncated(need));
    }
    if bytes.len() > need {
        return Err(CodecError::MalformedBody(format!("{} trailing bytes", bytes.len() - need)));
    }
    let text = std::str::from_utf8(&bytes[HEADER_LEN..]).map_err(|e| CodecError::MalformedBody(e.to_string()))?;
    let body = Record::parse(text)?;
    if body.to_string() != text {
        return Err(CodecError::MalformedBody("body not in canonical form".into()));
    }
    Ok(Envelope {
        kind,
        room_id,
        seq,
        sent_at_us,
        body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Fixed, Value};
    use proptest::prelude::*;

    fn pose_update() -> Envelope {
        Envelope {
            kind: MessageKind::PoseUpdate,
            room_id: 1,
            seq: 7,
            sent_at_us: 1_500_000,
            body: Record::new().text("entity", "mug").num("x", 0.1).num("y", -0.2).num("h", 0.0),
        }
    }

    #[test]
    fn golden_header() {
        let bytes = encode(&pose_update()).unwrap();
        assert_eq!(
            &bytes[..11],
            &[0x48, 0x50, 0x52, 0x58, 0x01, 0x01, 0x01, 0x00, 0x00, 0x00, 0x07]
        );
        assert_eq!(&bytes[11..19], &1_500_000u64.to_be_bytes());
        let body = "entity=mug h=0.000000 x=0.100000 y=-0.200000";
        assert_eq!(&bytes[19..21], &(body.len() as u16).to_be_bytes());
        assert_eq!(&bytes[21..], body.as_bytes());
    }

    #[test]
    fn decode_errors() {
        let good = encode(&pose_update()).unwrap();
        assert!(matches!(decode(&good[..3]), Err(CodecError::TruncatedBody { .. })));
        assert!(matches!(decode(&good[..10]), Err(CodecError::TruncatedBody { .. })));
        assert!(matches!(decode(&good[..good.len() - 1]), Err(CodecError::TruncatedBody { .. })));

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad), Err(CodecError::BadMagic));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode(&bad), Err(CodecError::UnknownVersion(2)));

        let mut bad = good.clone();
        bad[5] = 9;
        assert!(matches!(decode(&bad), Err(CodecError::MalformedBody(_))));

        let mut bad = good.clone();
        bad.push(b' ');
        assert!(matches!(decode(&bad), Err(CodecError::MalformedBody(_))));

        let mut bad = good.clone();
        let n = bad.len();
        bad[n - 1] = b'=';
        assert!(matches!(decode(&bad), Err(CodecError::MalformedBody(_))));
    }

    fn envelope() -> impl Strategy<Value = Envelope> {
        let value = prop_oneof![
            any::<i64>().prop_map(Value::Int),
            (-10_000_000_000i64..10_000_000_000).prop_map(|v| Value::Num(Fixed(v))),
            "[ -~]{0,10}".prop_map(Value::Text),
        ];
        (
            0usize..5,
            any::<u8>(),
            any::<u32>(),
            any::<u64>(),
            proptest::collection::btree_map("[a-z][a-z0-9_]{0,5}", value, 0..6),
        )
            .prop_map(|(k, room_id, seq, sent_at_us, fields)| Envelope {
                kind: MessageKind::ALL[k],
                room_id,
                seq,
                sent_at_us,
                body: fields.into_iter().fold(Record::new(), |r, (k, v)| r.with(&k, v)),
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn round_trip(e in envelope()) {
            let bytes = encode(&e).unwrap();
            prop_assert_eq!(decode(&bytes).unwrap(), e);
        }
    }

    proptest! {
        #[test]
        fn injective(a in envelope(), b in envelope()) {
            prop_assume!(a != b);
            prop_assert_ne!(encode(&a).unwrap(), encode(&b).unwrap());
        }
    }
}
