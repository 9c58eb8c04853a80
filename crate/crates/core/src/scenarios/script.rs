//! Declarative scenario scripts: rooms, proxies, objects, mappings, and a
//! timeline of user input, written one record per line.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use thiserror::Error;

use crate::geometry::{normalize_angle, shared_workspace, Pose2, Rect, RoomConfig, Tile, Vec2};
use crate::mapping::{validate_policies, MappingPolicy, ObjectId, ProxyId};
use crate::record::{parse_lines, Record};
use crate::sync::ChannelModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl fmt::Display) -> ScriptError {
    ScriptError {
        line,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    PassTheMug,
    ClinkingDrinks,
    TicTacToe,
    CityBuilder,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::PassTheMug,
        ScenarioKind::ClinkingDrinks,
        ScenarioKind::TicTacToe,
        ScenarioKind::CityBuilder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::PassTheMug => "pass_the_mug",
            ScenarioKind::ClinkingDrinks => "clinking_drinks",
            ScenarioKind::TicTacToe => "tic_tac_toe",
            ScenarioKind::CityBuilder => "city_builder",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn seat_name(angle: f64) -> &'static str {
    let k = (normalize_angle(angle) / FRAC_PI_2).round() as i64;
    match k.rem_euclid(4) {
        0 => "east",
        1 => "north",
        2 => "west",
        _ => "south",
    }
}

fn seat_angle(name: &str) -> Option<f64> {
    Some(match name {
        "east" => 0.0,
        "north" => FRAC_PI_2,
        "west" => PI,
        "south" => -FRAC_PI_2,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxySpec {
    pub id: ProxyId,
    pub room: u8,
    /// Starting pose in the room's own frame.
    pub pose: Pose2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectKind {
    /// Lives on the server; `pose` is its starting session pose.
    Virtual { pose: Pose2 },
    /// A physical object followed by the tracker of `room`.
    Tracked { room: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub kind: ObjectKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ease {
    Linear,
    /// Accelerate, cruise, decelerate; a quarter of the segment each way.
    Trapezoid,
}

pub const TRAPEZOID_ACCEL_FRACTION: f64 = 0.25;

impl Ease {
    pub fn as_str(self) -> &'static str {
        match self {
            Ease::Linear => "linear",
            Ease::Trapezoid => "trapezoid",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Ease::Linear),
            "trapezoid" => Some(Ease::Trapezoid),
            _ => None,
        }
    }

    /// Fraction of the distance covered at fraction `u` of the duration.
    pub fn progress(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Ease::Linear => u,
            Ease::Trapezoid => {
                let f = TRAPEZOID_ACCEL_FRACTION;
                let peak = 1.0 / (1.0 - f);
                if u < f {
                    0.5 * peak / f * u * u
                } else if u <= 1.0 - f {
                    peak * (u - 0.5 * f)
                } else {
                    let r = 1.0 - u;
                    1.0 - 0.5 * peak / f * r * r
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimelineAction {
    /// Wrist keyframe in the room frame. `palm` is the facing angle and
    /// holds until the next keyframe; position is interpolated.
    Wrist { position: Vec2, palm: f64, ease: Ease },
    /// Tracker keyframe for a physical object, in the room frame.
    Track { object: ObjectId, pose: Pose2, ease: Ease },
    Grab { object: ObjectId },
    Release,
    /// Pick the board tile under the held controller.
    Select,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub t: f64,
    pub room: u8,
    pub action: TimelineAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub delay: f64,
    pub duration: f64,
    pub gestures: bool,
    pub channel: ChannelModel,
    pub rooms: Vec<RoomConfig>,
    pub proxies: Vec<ProxySpec>,
    pub objects: Vec<ObjectSpec>,
    pub policies: Vec<MappingPolicy>,
    /// Tile the mug should end on, for the gesture fixtures.
    pub expect_tile: Option<Tile>,
    pub timeline: Vec<TimelineEvent>,
}

fn check_keys(rec: &Record, line: usize, allowed: &[&str]) -> Result<(), ScriptError> {
    for (k, _) in rec.fields() {
        if k != "ev" && !allowed.contains(&k) {
            return Err(err(line, format!("unexpected field {k}")));
        }
    }
    Ok(())
}

fn get<T>(line: usize, r: Result<T, crate::record::RecordError>) -> Result<T, ScriptError> {
    r.map_err(|e| err(line, e))
}

fn nonneg(line: usize, name: &str, v: f64) -> Result<f64, ScriptError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(err(line, format!("{name} must be nonnegative, got {v}")))
    }
}

fn room_id(line: usize, rec: &Record, key: &str) -> Result<u8, ScriptError> {
    let v = get(line, rec.get_int(key))?;
    u8::try_from(v).map_err(|_| err(line, format!("{key} {v} out of range")))
}

fn proxy_id(line: usize, rec: &Record, key: &str) -> Result<ProxyId, ScriptError> {
    get(line, rec.get_text(key))?.parse().map_err(|e| err(line, e))
}

fn ease(line: usize, rec: &Record) -> Result<Ease, ScriptError> {
    match rec.get("ease") {
        None => Ok(Ease::Linear),
        Some(_) => {
            let s = get(line, rec.get_text("ease"))?;
            Ease::parse(s).ok_or_else(|| err(line, format!("unknown ease {s:?}")))
        }
    }
}

fn pose(line: usize, rec: &Record) -> Result<Pose2, ScriptError> {
    let h = if rec.get("h").is_some() { get(line, rec.get_f64("h"))? } else { 0.0 };
    // Stored as written so text round trips are exact.
    Ok(Pose2 {
        position: Vec2::new(get(line, rec.get_f64("x"))?, get(line, rec.get_f64("y"))?),
        heading: h,
    })
}

#[derive(Default)]
struct PolicyBuilder {
    one_to_one: Vec<(ObjectId, ProxyId)>,
    many_to_one: BTreeMap<ObjectId, (usize, BTreeMap<u8, ProxyId>)>,
    one_to_many: Vec<ObjectId>,
    pool: Vec<ProxyId>,
    margin: Option<f64>,
    first_line: usize,
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut header: Option<(ScenarioKind, u64, f64, f64, bool)> = None;
        let mut channel = ChannelModel::LOSSLESS;
        let mut rooms: Vec<RoomConfig> = Vec::new();
        let mut proxies: Vec<ProxySpec> = Vec::new();
        let mut objects: Vec<(usize, ObjectSpec)> = Vec::new();
        let mut policies = PolicyBuilder::default();
        let mut expect_tile = None;
        let mut timeline: Vec<TimelineEvent> = Vec::new();
        let mut last_line = 0;

        for (line, rec) in parse_lines(text) {
            last_line = line;
            let rec = rec.map_err(|e| err(line, e))?;
            let ev = get(line, rec.get_text("ev"))?;
            if header.is_none() && ev != "scenario" {
                return Err(err(line, "script must start with an ev=scenario record"));
            }
            let room_known = |id: u8| rooms.iter().any(|r| r.room_id == id);
            let object = |name: &str| objects.iter().find(|(_, o)| o.id.as_str() == name).map(|(_, o)| o.clone());
            match ev {
                "scenario" => {
                    if header.is_some() {
                        return Err(err(line, "duplicate scenario header"));
                    }
                    check_keys(&rec, line, &["name", "seed", "delay", "duration", "gestures"])?;
                    let name = get(line, rec.get_text("name"))?;
                    let kind = ScenarioKind::parse(name).ok_or_else(|| err(line, format!("unknown scenario {name:?}")))?;
                    let seed = get(line, rec.get_int("seed"))?;
                    let seed = u64::try_from(seed).map_err(|_| err(line, "seed must be nonnegative"))?;
                    let delay = nonneg(line, "delay", get(line, rec.get_f64("delay"))?)?;
                    let duration = nonneg(line, "duration", get(line, rec.get_f64("duration"))?)?;
                    let gestures = match rec.get("gestures") {
                        Some(_) => get(line, rec.get_flag("gestures"))?,
                        None => false,
                    };
                    header = Some((kind, seed, delay, duration, gestures));
                    channel.seed = seed;
                }
                "channel" => {
                    check_keys(&rec, line, &["latency", "jitter", "drop"])?;
                    channel.base_latency = nonneg(line, "latency", get(line, rec.get_f64("latency"))?)?;
                    channel.jitter = nonneg(line, "jitter", get(line, rec.get_f64("jitter"))?)?;
                    channel.drop_prob = get(line, rec.get_f64("drop"))?;
                    channel.validate().map_err(|e| err(line, e))?;
                }
                "room" => {
                    check_keys(&rec, line, &["id", "half_width", "half_depth", "seat"])?;
                    let id = room_id(line, &rec, "id")?;
                    if room_known(id) {
                        return Err(err(line, format!("room {id} declared twice")));
                    }
                    let table = Rect::new(get(line, rec.get_f64("half_width"))?, get(line, rec.get_f64("half_depth"))?)
                        .map_err(|e| err(line, e))?;
                    let seat = get(line, rec.get_text("seat"))?;
                    let angle = seat_angle(seat).ok_or_else(|| err(line, format!("unknown seat {seat:?}")))?;
                    rooms.push(RoomConfig::new(id, table, angle).map_err(|e| err(line, e))?);
                }
                "proxy" => {
                    check_keys(&rec, line, &["id", "room", "x", "y", "h"])?;
                    let id = proxy_id(line, &rec, "id")?;
                    let room = room_id(line, &rec, "room")?;
                    if !room_known(room) {
                        return Err(err(line, format!("proxy {id} in undeclared room {room}")));
                    }
                    if proxies.iter().any(|p| p.id == id) {
                        return Err(err(line, format!("proxy {id} declared twice")));
                    }
                    proxies.push(ProxySpec {
                        id,
                        room,
                        pose: pose(line, &rec)?,
                    });
                }
                "object" => {
                    check_keys(&rec, line, &["id", "kind", "room", "x", "y", "h"])?;
                    let id = ObjectId::new(get(line, rec.get_text("id"))?);
                    if object(id.as_str()).is_some() {
                        return Err(err(line, format!("object {id} declared twice")));
                    }
                    let kind = match get(line, rec.get_text("kind"))? {
                        "virtual" => ObjectKind::Virtual { pose: pose(line, &rec)? },
                        "tracked" => {
                            let room = room_id(line, &rec, "room")?;
                            if !room_known(room) {
                                return Err(err(line, format!("object {id} tracked in undeclared room {room}")));
                            }
                            ObjectKind::Tracked { room }
                        }
                        other => return Err(err(line, format!("unknown object kind {other:?}"))),
                    };
                    objects.push((line, ObjectSpec { id, kind }));
                }
                "map" => {
                    check_keys(&rec, line, &["policy", "object", "proxy", "margin"])?;
                    let id = ObjectId::new(get(line, rec.get_text("object"))?);
                    if object(id.as_str()).is_none() {
                        return Err(err(line, format!("map references undeclared object {id}")));
                    }
                    if policies.first_line == 0 {
                        policies.first_line = line;
                    }
                    match get(line, rec.get_text("policy"))? {
                        "one_to_one" => policies.one_to_one.push((id, proxy_id(line, &rec, "proxy")?)),
                        "many_to_one" => {
                            let p = proxy_id(line, &rec, "proxy")?;
                            let spec = proxies
                                .iter()
                                .find(|s| s.id == p)
                                .ok_or_else(|| err(line, format!("map references undeclared proxy {p}")))?;
                            let entry = policies.many_to_one.entry(id.clone()).or_insert((line, BTreeMap::new()));
                            if entry.1.insert(spec.room, p).is_some() {
                                return Err(err(line, format!("room {} already has a proxy for {id}", spec.room)));
                            }
                        }
                        "one_to_many" => {
                            let margin = nonneg(line, "margin", get(line, rec.get_f64("margin"))?)?;
                            if policies.margin.is_some_and(|m| m != margin) {
                                return Err(err(line, "one_to_many margins disagree"));
                            }
                            policies.margin = Some(margin);
                            policies.one_to_many.push(id);
                        }
                        other => return Err(err(line, format!("unknown policy {other:?}"))),
                    }
                }
                "pool" => {
                    check_keys(&rec, line, &["proxy"])?;
                    policies.pool.push(proxy_id(line, &rec, "proxy")?);
                }
                "expect" => {
                    check_keys(&rec, line, &["tile"])?;
                    let t = get(line, rec.get_int("tile"))?;
                    let t = u8::try_from(t).ok().and_then(|t| Tile::new(t).ok());
                    expect_tile = Some(t.ok_or_else(|| err(line, "tile must be 1..9"))?);
                }
                "wrist" | "track" | "grab" | "release" | "select" => {
                    let t = nonneg(line, "t", get(line, rec.get_f64("t"))?)?;
                    if timeline.last().is_some_and(|e| e.t > t) {
                        return Err(err(line, "timeline is not sorted by time"));
                    }
                    let room = room_id(line, &rec, "room")?;
                    if !room_known(room) {
                        return Err(err(line, format!("undeclared room {room}")));
                    }
                    let action = match ev {
                        "wrist" => {
                            check_keys(&rec, line, &["t", "room", "x", "y", "palm", "ease"])?;
                            TimelineAction::Wrist {
                                position: Vec2::new(get(line, rec.get_f64("x"))?, get(line, rec.get_f64("y"))?),
                                palm: get(line, rec.get_f64("palm"))?,
                                ease: ease(line, &rec)?,
                            }
                        }
                        "track" => {
                            check_keys(&rec, line, &["t", "room", "object", "x", "y", "h", "ease"])?;
                            let name = get(line, rec.get_text("object"))?;
                            let spec = object(name).ok_or_else(|| err(line, format!("undeclared object {name}")))?;
                            if spec.kind != (ObjectKind::Tracked { room }) {
                                return Err(err(line, format!("object {name} is not tracked in room {room}")));
                            }
                            TimelineAction::Track {
                                object: spec.id,
                                pose: pose(line, &rec)?,
                                ease: ease(line, &rec)?,
                            }
                        }
                        "grab" => {
                            check_keys(&rec, line, &["t", "room", "object"])?;
                            let name = get(line, rec.get_text("object"))?;
                            let spec = object(name).ok_or_else(|| err(line, format!("undeclared object {name}")))?;
                            TimelineAction::Grab { object: spec.id }
                        }
                        "release" => {
                            check_keys(&rec, line, &["t", "room"])?;
                            TimelineAction::Release
                        }
                        _ => {
                            check_keys(&rec, line, &["t", "room"])?;
                            TimelineAction::Select
                        }
                    };
                    timeline.push(TimelineEvent { t, room, action });
                }
                other => return Err(err(line, format!("unknown record type {other:?}"))),
            }
        }

        let (kind, seed, delay, duration, gestures) = header.ok_or_else(|| err(last_line.max(1), "missing ev=scenario record"))?;
        shared_workspace(&rooms).map_err(|e| err(last_line.max(1), e))?;
        for (line, o) in &objects {
            if let ObjectKind::Tracked { room } = o.kind {
                let has_key = timeline.iter().any(|e| {
                    e.room == room && matches!(&e.action, TimelineAction::Track { object, .. } if *object == o.id)
                });
                if !has_key {
                    return Err(err(*line, format!("tracked object {} has no track keyframes", o.id)));
                }
            }
        }

        let mut built = Vec::new();
        if !policies.one_to_one.is_empty() {
            built.push(MappingPolicy::OneToOne {
                pairs: policies.one_to_one,
            });
        }
        for (object, (_, proxies)) in policies.many_to_one {
            built.push(MappingPolicy::ManyToOne { object, proxies });
        }
        if !policies.one_to_many.is_empty() {
            if policies.pool.is_empty() {
                return Err(err(policies.first_line, "one_to_many mapping without ev=pool proxies"));
            }
            built.push(MappingPolicy::OneToMany {
                objects: policies.one_to_many,
                pool: policies.pool,
                hysteresis_margin: policies.margin.unwrap_or(0.0),
            });
        }
        let proxy_rooms: BTreeMap<ProxyId, u8> = proxies.iter().map(|p| (p.id, p.room)).collect();
        let room_ids: Vec<u8> = rooms.iter().map(|r| r.room_id).collect();
        validate_policies(&built, &proxy_rooms, &room_ids).map_err(|e| err(policies.first_line.max(1), e))?;

        Ok(ScenarioScript {
            kind,
            seed,
            delay,
            duration,
            gestures,
            channel,
            rooms,
            proxies,
            objects: objects.into_iter().map(|(_, o)| o).collect(),
            policies: built,
            expect_tile,
            timeline,
        })
    }

    pub fn to_text(&self) -> String {
        let mut lines: Vec<Record> = Vec::new();
        lines.push(
            Record::new()
                .text("ev", "scenario")
                .text("name", self.kind.as_str())
                .int("seed", self.seed as i64)
                .num("delay", self.delay)
                .num("duration", self.duration)
                .flag("gestures", self.gestures),
        );
        lines.push(
            Record::new()
                .text("ev", "channel")
                .num("latency", self.channel.base_latency)
                .num("jitter", self.channel.jitter)
                .num("drop", self.channel.drop_prob),
        );
        for r in &self.rooms {
            lines.push(
                Record::new()
                    .text("ev", "room")
                    .int("id", r.room_id.into())
                    .num("half_width", r.table.half_width)
                    .num("half_depth", r.table.half_depth)
                    .text("seat", seat_name(r.seat_angle)),
            );
        }
        let with_pose = |r: Record, p: &Pose2| r.num("x", p.position.x).num("y", p.position.y).num("h", p.heading);
        for p in &self.proxies {
            lines.push(with_pose(
                Record::new().text("ev", "proxy").text("id", p.id.to_string()).int("room", p.room.into()),
                &p.pose,
            ));
        }
        for o in &self.objects {
            let r = Record::new().text("ev", "object").text("id", o.id.as_str());
            lines.push(match o.kind {
                ObjectKind::Virtual { pose } => with_pose(r.text("kind", "virtual"), &pose),
                ObjectKind::Tracked { room } => r.text("kind", "tracked").int("room", room.into()),
            });
        }
        for policy in &self.policies {
            let map = |policy: &str, object: &ObjectId| {
                Record::new()
                    .text("ev", "map")
                    .text("policy", policy)
                    .text("object", object.as_str())
            };
            match policy {
                MappingPolicy::OneToOne { pairs } => {
                    for (o, p) in pairs {
                        lines.push(map("one_to_one", o).text("proxy", p.to_string()));
                    }
                }
                MappingPolicy::ManyToOne { object, proxies } => {
                    for p in proxies.values() {
                        lines.push(map("many_to_one", object).text("proxy", p.to_string()));
                    }
                }
                MappingPolicy::OneToMany {
                    objects,
                    pool,
                    hysteresis_margin,
                } => {
                    for p in pool {
                        lines.push(Record::new().text("ev", "pool").text("proxy", p.to_string()));
                    }
                    for o in objects {
                        lines.push(map("one_to_many", o).num("margin", *hysteresis_margin));
                    }
                }
            }
        }
        if let Some(tile) = self.expect_tile {
            lines.push(Record::new().text("ev", "expect").int("tile", tile.index().into()));
        }
        for e in &self.timeline {
            let base = |ev: &str| Record::new().text("ev", ev).num("t", e.t).int("room", e.room.into());
            lines.push(match &e.action {
                TimelineAction::Wrist { position, palm, ease } => base("wrist")
                    .num("x", position.x)
                    .num("y", position.y)
                    .num("palm", *palm)
                    .text("ease", ease.as_str()),
                TimelineAction::Track { object, pose, ease } => {
                    with_pose(base("track").text("object", object.as_str()), pose).text("ease", ease.as_str())
                }
                TimelineAction::Grab { object } => base("grab").text("object", object.as_str()),
                TimelineAction::Release => base("release"),
                TimelineAction::Select => base("select"),
            });
        }
        let mut out = String::new();
        for r in lines {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    /// Round-trips through text so every number sits on the script grid.
    pub fn canonical(&self) -> Result<Self, ScriptError> {
        Self::parse(&self.to_text())
    }

    pub fn room_ids(&self) -> BTreeSet<u8> {
        self.rooms.iter().map(|r| r.room_id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# two users, one shared controller
ev=scenario name=tic_tac_toe seed=3 delay=1.0 duration=2.0
ev=channel latency=0.05 jitter=0.02 drop=0.05
ev=room id=1 half_width=0.6 half_depth=0.4 seat=south
ev=room id=2 half_width=0.5 half_depth=0.35 seat=east
ev=proxy id=p1 room=1 x=0.0 y=0.0
ev=proxy id=p2 room=2 x=0.0 y=0.0
ev=object id=ctrl kind=virtual x=0.0 y=0.0
ev=map policy=many_to_one object=ctrl proxy=p1
ev=map policy=many_to_one object=ctrl proxy=p2
ev=wrist t=0.0 room=1 x=0.0 y=-0.3 palm=1.570796
ev=grab t=0.5 room=1 object=ctrl
ev=select t=1.0 room=1
ev=release t=1.5 room=1
";

    #[test]
    fn parses_and_round_trips() {
        let s = ScenarioScript::parse(SMALL).unwrap();
        assert_eq!(s.kind, ScenarioKind::TicTacToe);
        assert_eq!(s.rooms.len(), 2);
        assert_eq!(s.channel.seed, 3);
        assert_eq!(s.timeline.len(), 4);
        assert!(matches!(s.policies[0], MappingPolicy::ManyToOne { ref proxies, .. } if proxies.len() == 2));
        let again = ScenarioScript::parse(&s.to_text()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_text(), s.to_text());
    }

    fn broken(from: &str, to: &str) -> ScriptError {
        ScenarioScript::parse(&SMALL.replace(from, to)).unwrap_err()
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = broken("drop=0.05", "drop=1.5");
        assert_eq!(e.line, 3);
        let e = broken("ev=proxy id=p2 room=2", "ev=proxy id=p2 room=9");
        assert_eq!(e.line, 7);
        let e = broken("ev=select t=1.0", "ev=select t=0.1");
        assert_eq!(e.line, 13);
        assert!(e.message.contains("sorted"));
        let e = broken("object=ctrl proxy=p2", "object=ctrl proxy=p1");
        assert_eq!(e.line, 10);
        let e = broken("seat=east", "seat=northeast");
        assert_eq!(e.line, 5);
        let e = broken("ev=grab t=0.5 room=1 object=ctrl", "ev=grab t=0.5 room=1 object=mug");
        assert_eq!(e.line, 12);
        let e = broken("ev=release t=1.5 room=1", "ev=release t=1.5 room=1 extra=1");
        assert_eq!(e.line, 14);
        let e = broken("ev=scenario", "ev=bogus");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn many_to_one_must_cover_rooms() {
        let text = SMALL.replace("ev=map policy=many_to_one object=ctrl proxy=p2\n", "");
        let e = ScenarioScript::parse(&text).unwrap_err();
        assert!(e.message.contains("room 2"), "{e}");
    }

    #[test]
    fn trapezoid_profile() {
        let e = Ease::Trapezoid;
        assert_eq!(e.progress(0.0), 0.0);
        assert!((e.progress(1.0) - 1.0).abs() < 1e-12);
        assert!((e.progress(0.5) - 0.5).abs() < 1e-12);
        // Continuous at the phase boundaries.
        for u in [0.25, 0.75] {
            assert!((e.progress(u - 1e-9) - e.progress(u + 1e-9)).abs() < 1e-8);
        }
        let mut prev = 0.0;
        for k in 1..=100 {
            let p = e.progress(k as f64 / 100.0);
            assert!(p >= prev);
            prev = p;
        }
    }
}
