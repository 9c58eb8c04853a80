//! Scenario trace: one typed event per line, printed as records.

use crate::geometry::Pose2;
use crate::mapping::{BindingState, ObjectId, ProxyId};
use crate::proxy::RobotStatus;
use crate::record::Record;

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Header {
        scenario: String,
        seed: u64,
        delay: f64,
        dt: f64,
    },
    Tick {
        k: u64,
        t: f64,
    },
    /// Proxy state after the tick, in its room's frame.
    Proxy {
        id: ProxyId,
        room: u8,
        pose: Pose2,
        status: RobotStatus,
        object: Option<ObjectId>,
        target: Option<(f64, f64)>,
        binding: Option<BindingState>,
    },
    /// Where a room currently shows an object, in the session frame.
    View {
        room: u8,
        object: ObjectId,
        pose: Pose2,
    },
    Shake {
        t: f64,
        room: u8,
        object: ObjectId,
    },
    Glow {
        t: f64,
        room: u8,
        object: ObjectId,
    },
    Command {
        t: f64,
        room: u8,
        object: ObjectId,
        command: String,
        tile: u8,
    },
    /// A proxy was sent to a new spot.
    Move {
        t: f64,
        proxy: ProxyId,
        object: ObjectId,
        target: (f64, f64),
        bound: f64,
    },
    Arrive {
        t: f64,
        proxy: ProxyId,
        object: ObjectId,
        travel: f64,
        bound: f64,
    },
    Bind {
        t: f64,
        proxy: ProxyId,
        object: ObjectId,
        previous: Option<ObjectId>,
    },
    Unbind {
        t: f64,
        proxy: ProxyId,
        object: ObjectId,
    },
    Binding {
        t: f64,
        proxy: ProxyId,
        object: ObjectId,
        state: BindingState,
    },
    Queued {
        t: f64,
        object: ObjectId,
    },
    Contact {
        t: f64,
        room: u8,
        object: ObjectId,
        proxy: Option<ProxyId>,
        contact_at: f64,
        arrival: Option<f64>,
        mask: bool,
        cause: &'static str,
    },
    Grab {
        t: f64,
        room: u8,
        object: ObjectId,
        engaged: bool,
    },
    GrabRefused {
        t: f64,
        room: u8,
        object: ObjectId,
        distance: f64,
    },
    Release {
        t: f64,
        room: u8,
        object: ObjectId,
    },
    Game {
        t: f64,
        room: u8,
        from: u8,
        seq: u32,
        tile: u8,
        mark: String,
    },
    GameOver {
        t: f64,
        room: u8,
        result: String,
    },
    Safety {
        t: f64,
        room: u8,
        a: ProxyId,
        b: ProxyId,
        distance: f64,
    },
    Violation {
        t: f64,
        room: u8,
        reason: String,
    },
    Outcome(Record),
}

impl TraceEvent {
    pub fn to_record(&self) -> Record {
        let ev = |name: &str| Record::new().text("ev", name);
        let opt_text = |r: Record, key: &str, v: Option<String>| match v {
            Some(v) => r.text(key, v),
            None => r,
        };
        match self {
            TraceEvent::Header { scenario, seed, delay, dt } => ev("header")
                .text("scenario", scenario.as_str())
                .int("seed", *seed as i64)
                .num("delay", *delay)
                .num("dt", *dt),
            TraceEvent::Tick { k, t } => ev("tick").int("k", *k as i64).num("t", *t),
            TraceEvent::Proxy {
                id,
                room,
                pose,
                status,
                object,
                target,
                binding,
            } => {
                let mut r = ev("proxy")
                    .text("id", id.to_string())
                    .int("room", (*room).into())
                    .num("x", pose.position.x)
                    .num("y", pose.position.y)
                    .num("h", pose.heading)
                    .text("status", status.as_str());
                r = opt_text(r, "object", object.as_ref().map(|o| o.to_string()));
                r = opt_text(r, "binding", binding.map(|b| b.as_str().to_string()));
                if let Some((x, y)) = target {
                    r = r.num("tx", *x).num("ty", *y);
                }
                r
            }
            TraceEvent::View { room, object, pose } => ev("view")
                .int("room", (*room).into())
                .text("object", object.as_str())
                .num("x", pose.position.x)
                .num("y", pose.position.y)
                .num("h", pose.heading),
            TraceEvent::Shake { t, room, object } => ev("shake").num("t", *t).int("room", (*room).into()).text("object", object.as_str()),
            TraceEvent::Glow { t, room, object } => ev("glow").num("t", *t).int("room", (*room).into()).text("object", object.as_str()),
            TraceEvent::Command {
                t,
                room,
                object,
                command,
                tile,
            } => ev("command")
                .num("t", *t)
                .int("room", (*room).into())
                .text("object", object.as_str())
                .text("command", command.as_str())
                .int("tile", (*tile).into()),
            TraceEvent::Move {
                t,
                proxy,
                object,
                target,
                bound,
            } => ev("move")
                .num("t", *t)
                .text("proxy", proxy.to_string())
                .text("object", object.as_str())
                .num("tx", target.0)
                .num("ty", target.1)
                .num("bound", *bound),
            TraceEvent::Arrive {
                t,
                proxy,
                object,
                travel,
                bound,
            } => ev("arrive")
                .num("t", *t)
                .text("proxy", proxy.to_string())
                .text("object", object.as_str())
                .num("travel", *travel)
                .num("bound", *bound),
            TraceEvent::Bind {
                t,
                proxy,
                object,
                previous,
            } => opt_text(
                ev("bind").num("t", *t).text("proxy", proxy.to_string()).text("object", object.as_str()),
                "previous",
                previous.as_ref().map(|o| o.to_string()),
            ),
            TraceEvent::Unbind { t, proxy, object } => ev("unbind")
                .num("t", *t)
                .text("proxy", proxy.to_string())
                .text("object", object.as_str()),
            TraceEvent::Binding { t, proxy, object, state } => ev("binding")
                .num("t", *t)
                .text("proxy", proxy.to_string())
                .text("object", object.as_str())
                .text("state", state.as_str()),
            TraceEvent::Queued { t, object } => ev("queued").num("t", *t).text("object", object.as_str()),
            TraceEvent::Contact {
                t,
                room,
                object,
                proxy,
                contact_at,
                arrival,
                mask,
                cause,
            } => {
                let mut r = ev("contact")
                    .num("t", *t)
                    .int("room", (*room).into())
                    .text("object", object.as_str())
                    .num("contact_at", *contact_at)
                    .flag("mask", *mask)
                    .text("cause", *cause);
                r = opt_text(r, "proxy", proxy.map(|p| p.to_string()));
                if let Some(a) = arrival {
                    r = r.num("arrival", *a).num("lead", contact_at - a);
                }
                r
            }
            TraceEvent::Grab { t, room, object, engaged } => ev("grab")
                .num("t", *t)
                .int("room", (*room).into())
                .text("object", object.as_str())
                .flag("engaged", *engaged),
            TraceEvent::GrabRefused { t, room, object, distance } => ev("grab_refused")
                .num("t", *t)
                .int("room", (*room).into())
                .text("object", object.as_str())
                .num("distance", *distance),
            TraceEvent::Release { t, room, object } => ev("release")
                .num("t", *t)
                .int("room", (*room).into())
                .text("object", object.as_str()),
            TraceEvent::Game {
                t,
                room,
                from,
                seq,
                tile,
                mark,
            } => ev("game")
                .num("t", *t)
                .int("room", (*room).into())
                .int("from", (*from).into())
                .int("seq", (*seq).into())
                .int("tile", (*tile).into())
                .text("mark", mark.as_str()),
            TraceEvent::GameOver { t, room, result } => ev("game_over")
                .num("t", *t)
                .int("room", (*room).into())
                .text("result", result.as_str()),
            TraceEvent::Safety { t, room, a, b, distance } => ev("safety")
                .num("t", *t)
                .int("room", (*room).into())
                .text("a", a.to_string())
                .text("b", b.to_string())
                .num("distance", *distance),
            TraceEvent::Violation { t, room, reason } => ev("violation")
                .num("t", *t)
                .int("room", (*room).into())
                .text("reason", reason.as_str()),
            TraceEvent::Outcome(fields) => fields.clone().text("ev", "outcome"),
        }
    }

    /// Breaks an invariant the run is supposed to keep.
    pub fn is_violation(&self) -> bool {
        matches!(self, TraceEvent::Safety { .. } | TraceEvent::Violation { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_record().to_string());
            out.push('\n');
        }
        out
    }

    pub fn violations(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.is_violation())
    }

    pub fn outcome(&self) -> Option<&Record> {
        self.events.iter().rev().find_map(|e| match e {
            TraceEvent::Outcome(r) => Some(r),
            _ => None,
        })
    }
}
