//! Fixed-step simulation of a scenario script.
//!
//! Each tick: timeline input, object truth, network, rendered views,
//! gestures, dispatch, proxy targets, bookkeeping and trace, then the
//! robots step to the next tick. Everything logged for tick `k` refers to
//! time `k·dt`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{
    normalize_angle, room_to_session, shared_workspace, tile_of, GeometryError, Pose2, RigidTransform2, RoomConfig,
    SeatSlot, SharedWorkspace, Vec2,
};
use crate::gesture::{grab_check, GestureConfig, GestureError, GestureEvent, GestureMachine, WristSample};
use crate::mapping::{
    binding_state, dispatch_one_to_many, nearest_object_with_hysteresis, one_to_one_target, Binding, BindingState,
    DemandPoint, DemandSource, MappingError, MappingPolicy, ObjectId, PoolProxy, ProxyId,
};
use crate::proxy::{
    drive_to, step_robot, travel_time_bound, MotionCommand, ProxyError, RobotLimits, RobotState, RobotStatus,
    DEFAULT_DT, MIN_PROXY_SEPARATION,
};
use crate::record::Record;
use crate::sync::codec::to_micros;
use crate::sync::reliable::{ack_of, ack_record};
use crate::sync::{
    mask_check, Channel, ChannelError, DelayBuffer, DelayError, EntitySnapshot, Envelope, MessageKind,
    ReliableReceiver, ReliableSender, Replica, Stamp,
};

use super::script::{Ease, ObjectKind, ScenarioKind, ScenarioScript, TimelineAction};
use super::tictactoe::{ttt_apply, ttt_winner, Board, GameResult, Mark};
use super::trace::{Trace, TraceEvent};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Gesture(#[from] GestureError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Delay(#[from] DelayError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub dt: f64,
    pub limits: RobotLimits,
    pub gesture: GestureConfig,
    /// Speed of a commanded virtual object sliding to its new tile.
    pub glide_speed: f64,
    /// Two objects closer than this are touching.
    pub contact_distance: f64,
    /// Extra separation needed before the same pair can touch again.
    pub contact_rearm: f64,
    /// Distance from the table edge to the seated user.
    pub seat_standoff: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dt: DEFAULT_DT,
            limits: RobotLimits::default(),
            gesture: GestureConfig::default(),
            glide_speed: 0.5,
            contact_distance: 0.08,
            contact_rearm: 0.02,
            seat_standoff: 0.1,
        }
    }
}

const CONTACT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Authority {
    Server,
    Room(usize),
}

struct RoomRt {
    cfg: RoomConfig,
    slot: SeatSlot,
    to_session: RigidTransform2,
    user_pos: Vec2,
}

impl RoomRt {
    fn local_target(&self, session: Vec2) -> Vec2 {
        one_to_one_target(&Pose2::new(session, 0.0), &self.cfg, self.slot)
    }
}

struct ViewRt {
    buffer: DelayBuffer,
    latest: Pose2,
    rendered: Pose2,
}

#[derive(Clone, Copy)]
struct Glide {
    from: Vec2,
    to: Vec2,
    start: f64,
    duration: f64,
}

struct ObjRt {
    id: ObjectId,
    tracked_in: Option<usize>,
    pose: Pose2,
    authority: Authority,
    glide: Option<Glide>,
    glide_id: u64,
    held: Option<(usize, Vec2)>,
    views: Vec<ViewRt>,
    track_keys: Vec<(f64, Pose2, Ease)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    OneToOne(usize),
    ManyToOne(usize),
    Pool,
}

struct ProxyRt {
    id: ProxyId,
    room: usize,
    role: Role,
    state: RobotState,
    object: Option<usize>,
    target: Option<Vec2>,
    binding: Option<BindingState>,
    history: Vec<Vec2>,
    pending_move: Option<(f64, f64)>,
    seen_glide: u64,
}

struct UserRt {
    machine: GestureMachine,
    wrist_keys: Vec<(f64, Vec2, f64, Ease)>,
    wrist: Option<WristSample>,
    holding: Option<usize>,
    demand: Option<ObjectId>,
}

struct PendingContact {
    room: usize,
    object: usize,
    proxy: Option<usize>,
    point: Vec2,
    at: f64,
    at_tick: usize,
    cause: &'static str,
}

fn interpolate<T: Copy>(keys: &[(f64, T, Ease)], t: f64, lerp: impl Fn(T, T, f64) -> T) -> Option<T> {
    let i = keys.partition_point(|k| k.0 <= t);
    if i == 0 {
        return None;
    }
    let (t0, v0, _) = keys[i - 1];
    match keys.get(i) {
        None => Some(v0),
        Some(&(t1, v1, ease)) => {
            let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
            Some(lerp(v0, v1, ease.progress(u)))
        }
    }
}

fn lerp_pose(a: Pose2, b: Pose2, s: f64) -> Pose2 {
    Pose2::new(
        a.position.lerp(b.position, s),
        a.heading + normalize_angle(b.heading - a.heading) * s,
    )
}

fn mark_for(room_index: usize) -> Mark {
    if room_index % 2 == 0 {
        Mark::X
    } else {
        Mark::O
    }
}

struct Sim<'a> {
    script: &'a ScenarioScript,
    cfg: EngineConfig,
    ws: SharedWorkspace,
    rooms: Vec<RoomRt>,
    objects: Vec<ObjRt>,
    proxies: Vec<ProxyRt>,
    users: Vec<UserRt>,
    pool_objects: Vec<usize>,
    pool_margin: f64,
    bindings: Vec<Binding>,
    queued: BTreeSet<ObjectId>,
    channel: Channel,
    replicas: Vec<Replica>,
    pose_seq: Vec<u32>,
    ack_seq: Vec<u32>,
    senders: BTreeMap<(usize, usize), ReliableSender>,
    receivers: BTreeMap<(usize, usize), ReliableReceiver>,
    boards: Vec<Board>,
    game_done: Vec<bool>,
    events: Vec<(f64, usize, TimelineAction)>,
    next_event: usize,
    scheduled: Vec<(usize, usize, usize, Vec2)>,
    armed: BTreeMap<(usize, usize, usize), bool>,
    pending: Vec<PendingContact>,
    unsafe_pairs: BTreeSet<(usize, usize)>,
    trace: Trace,
}

impl<'a> Sim<'a> {
    fn new(script: &'a ScenarioScript, cfg: EngineConfig) -> Result<Self, RunError> {
        cfg.limits.validate()?;
        let ws = shared_workspace(&script.rooms)?;
        let room_index: BTreeMap<u8, usize> = script.rooms.iter().enumerate().map(|(i, r)| (r.room_id, i)).collect();
        let rooms: Vec<RoomRt> = script
            .rooms
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let slot = SeatSlot::for_index(i);
                let to_session = room_to_session(r, slot);
                RoomRt {
                    cfg: *r,
                    slot,
                    to_session,
                    user_pos: to_session.apply(r.seat_position(cfg.seat_standoff)),
                }
            })
            .collect();

        let horizon_start = -(script.delay + 1.0);
        let mut objects = Vec::new();
        for spec in &script.objects {
            let (tracked_in, track_keys) = match spec.kind {
                ObjectKind::Virtual { .. } => (None, Vec::new()),
                ObjectKind::Tracked { room } => {
                    let ri = room_index[&room];
                    let keys: Vec<(f64, Pose2, Ease)> = script
                        .timeline
                        .iter()
                        .filter_map(|e| match &e.action {
                            TimelineAction::Track { object, pose, ease } if *object == spec.id => {
                                Some((e.t, rooms[ri].to_session.apply_pose(*pose), *ease))
                            }
                            _ => None,
                        })
                        .collect();
                    (Some(ri), keys)
                }
            };
            let pose = match spec.kind {
                ObjectKind::Virtual { pose } => pose,
                ObjectKind::Tracked { .. } => track_keys[0].1,
            };
            let views = rooms
                .iter()
                .map(|_| {
                    let mut buffer = DelayBuffer::new(script.delay)?;
                    buffer.push(horizon_start, pose);
                    buffer.push(0.0, pose);
                    Ok(ViewRt {
                        buffer,
                        latest: pose,
                        rendered: pose,
                    })
                })
                .collect::<Result<Vec<_>, DelayError>>()?;
            objects.push(ObjRt {
                id: spec.id.clone(),
                tracked_in,
                pose,
                authority: tracked_in.map_or(Authority::Server, Authority::Room),
                glide: None,
                glide_id: 0,
                held: None,
                views,
                track_keys,
            });
        }
        let obj_index = |id: &ObjectId| objects.iter().position(|o: &ObjRt| o.id == *id).expect("validated object");

        let mut roles: BTreeMap<ProxyId, Role> = BTreeMap::new();
        let mut pool_objects = Vec::new();
        let mut pool_margin = 0.0;
        for policy in &script.policies {
            match policy {
                MappingPolicy::OneToOne { pairs } => {
                    for (o, p) in pairs {
                        roles.insert(*p, Role::OneToOne(obj_index(o)));
                    }
                }
                MappingPolicy::ManyToOne { object, proxies } => {
                    for p in proxies.values() {
                        roles.insert(*p, Role::ManyToOne(obj_index(object)));
                    }
                }
                MappingPolicy::OneToMany {
                    objects: objs,
                    pool,
                    hysteresis_margin,
                } => {
                    pool_objects = objs.iter().map(obj_index).collect();
                    pool_margin = *hysteresis_margin;
                    for p in pool {
                        roles.insert(*p, Role::Pool);
                    }
                }
            }
        }
        let proxies = script
            .proxies
            .iter()
            .filter_map(|p| {
                let role = *roles.get(&p.id)?;
                let object = match role {
                    Role::OneToOne(o) | Role::ManyToOne(o) => Some(o),
                    Role::Pool => None,
                };
                Some(ProxyRt {
                    id: p.id,
                    room: room_index[&p.room],
                    role,
                    state: RobotState::new(Pose2::new(p.pose.position, p.pose.heading)),
                    object,
                    target: None,
                    binding: None,
                    history: Vec::new(),
                    pending_move: None,
                    seen_glide: 0,
                })
            })
            .collect();

        let users = rooms
            .iter()
            .map(|r| {
                let wrist_keys = script
                    .timeline
                    .iter()
                    .filter_map(|e| match e.action {
                        TimelineAction::Wrist { position, palm, ease } if e.room == r.cfg.room_id => Some((
                            e.t,
                            r.to_session.apply(position),
                            normalize_angle(palm + r.to_session.rotation),
                            ease,
                        )),
                        _ => None,
                    })
                    .collect();
                Ok(UserRt {
                    machine: GestureMachine::new(cfg.gesture)?,
                    wrist_keys,
                    wrist: None,
                    holding: None,
                    demand: None,
                })
            })
            .collect::<Result<Vec<_>, GestureError>>()?;

        let events = script
            .timeline
            .iter()
            .filter(|e| matches!(e.action, TimelineAction::Grab { .. } | TimelineAction::Release | TimelineAction::Select))
            .map(|e| (e.t, room_index[&e.room], e.action.clone()))
            .collect();

        let n = rooms.len();
        let mut senders = BTreeMap::new();
        let mut receivers = BTreeMap::new();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    senders.insert((a, b), ReliableSender::new(rooms[a].cfg.room_id));
                    receivers.insert((b, a), ReliableReceiver::new());
                }
            }
        }

        Ok(Sim {
            script,
            cfg,
            ws,
            channel: Channel::new(script.channel)?,
            replicas: vec![Replica::new(); n],
            pose_seq: vec![0; n],
            ack_seq: vec![0; n],
            senders,
            receivers,
            boards: vec![Board::new(); n],
            game_done: vec![false; n],
            rooms,
            objects,
            proxies,
            users,
            pool_objects,
            pool_margin,
            bindings: Vec::new(),
            queued: BTreeSet::new(),
            events,
            next_event: 0,
            scheduled: Vec::new(),
            armed: BTreeMap::new(),
            pending: Vec::new(),
            unsafe_pairs: BTreeSet::new(),
            trace: Trace::default(),
        })
    }

    fn room_id(&self, r: usize) -> u8 {
        self.rooms[r].cfg.room_id
    }

    /// Which proxy in room `r` physically stands for object `o`, if any.
    fn backing_proxy(&self, r: usize, o: usize) -> Option<usize> {
        self.proxies.iter().position(|p| p.room == r && p.object == Some(o))
    }

    fn run(mut self) -> Result<Trace, RunError> {
        let s = self.script;
        self.trace.push(TraceEvent::Header {
            scenario: s.kind.as_str().to_string(),
            seed: s.seed,
            delay: s.delay,
            dt: self.cfg.dt,
        });
        let ticks = (s.duration / self.cfg.dt + 1e-9).floor() as usize;
        for k in 0..=ticks {
            self.tick(k)?;
        }
        self.finish(ticks);
        Ok(self.trace)
    }

    fn tick(&mut self, k: usize) -> Result<(), RunError> {
        let now = k as f64 * self.cfg.dt;
        let now_us = to_micros(now);
        self.sample_inputs(now);
        self.apply_events(k, now, now_us)?;
        self.update_truth(now);
        self.network(k, now, now_us)?;
        self.render(now);
        if self.script.gestures {
            self.gestures(k, now)?;
        }
        if !self.pool_objects.is_empty() {
            self.dispatch(now)?;
        }
        self.targets(now);
        self.bookkeeping(k, now);
        self.log_tick(k, now);
        self.step_robots()?;
        Ok(())
    }

    fn sample_inputs(&mut self, now: f64) {
        for u in &mut self.users {
            let keys: Vec<(f64, Vec2, Ease)> = u.wrist_keys.iter().map(|k| (k.0, k.1, k.3)).collect();
            let palm = {
                let i = u.wrist_keys.partition_point(|k| k.0 <= now);
                (i > 0).then(|| u.wrist_keys[i - 1].2)
            };
            u.wrist = interpolate(&keys, now, |a, b, s| a.lerp(b, s))
                .zip(palm)
                .map(|(position, palm)| WristSample {
                    time: now,
                    position,
                    palm_dir: Vec2::from_angle(palm),
                });
        }
        for o in &mut self.objects {
            if o.tracked_in.is_some() {
                if let Some(p) = interpolate(&o.track_keys, now, lerp_pose) {
                    o.pose = p;
                }
            }
        }
    }

    fn apply_events(&mut self, k: usize, now: f64, now_us: u64) -> Result<(), RunError> {
        while let Some((t, r, action)) = self.events.get(self.next_event).cloned() {
            if t > now + 1e-9 {
                break;
            }
            self.next_event += 1;
            let room = self.room_id(r);
            match action {
                TimelineAction::Grab { object } => {
                    let o = self.objects.iter().position(|x| x.id == object).expect("validated object");
                    let seen = self.objects[o].views[r].rendered.position;
                    let wrist = self.users[r].wrist.map(|w| w.position);
                    let reachable = wrist.is_some_and(|w| grab_check(w, seen, &self.cfg.gesture));
                    let free = self.objects[o].held.is_none() && self.users[r].holding.is_none();
                    match wrist {
                        Some(w) if reachable && free => {
                            let obj = &mut self.objects[o];
                            obj.held = Some((r, obj.pose.position - w));
                            obj.authority = Authority::Room(r);
                            obj.glide = None;
                            self.users[r].holding = Some(o);
                            self.users[r].machine.grab(&object, w, seen);
                            let backing = self.backing_proxy(r, o);
                            let engaged = backing.is_some_and(|p| self.proxies[p].binding == Some(BindingState::Engaged));
                            self.trace.push(TraceEvent::Grab {
                                t: now,
                                room,
                                object,
                                engaged,
                            });
                            self.pending.push(PendingContact {
                                room: r,
                                object: o,
                                proxy: backing,
                                point: self.rooms[r].local_target(seen),
                                at: now,
                                at_tick: k,
                                cause: "grab",
                            });
                        }
                        _ => self.trace.push(TraceEvent::GrabRefused {
                            t: now,
                            room,
                            object,
                            distance: wrist.map_or(f64::INFINITY, |w| w.distance(seen)),
                        }),
                    }
                }
                TimelineAction::Release => {
                    if let Some(o) = self.users[r].holding.take() {
                        self.objects[o].held = None;
                        self.users[r].machine.release();
                        self.trace.push(TraceEvent::Release {
                            t: now,
                            room,
                            object: self.objects[o].id.clone(),
                        });
                    }
                }
                TimelineAction::Select => {
                    let spot = match self.users[r].holding {
                        Some(o) => Some(self.objects[o].pose.position),
                        None => self.users[r].wrist.map(|w| w.position),
                    };
                    let Some(spot) = spot else {
                        self.trace.push(TraceEvent::Violation {
                            t: now,
                            room,
                            reason: "select without a hand".into(),
                        });
                        continue;
                    };
                    let tile = tile_of(spot, &self.ws).index();
                    let mark = mark_for(r);
                    if self.apply_move(now, r, r, 0, tile, mark) {
                        let body = Record::new().int("tile", tile.into()).text("mark", mark.as_str());
                        for to in 0..self.rooms.len() {
                            if to != r {
                                let sender = self.senders.get_mut(&(r, to)).expect("sender per pair");
                                let e = sender.send(body.clone(), now_us);
                                self.channel.send(self.rooms[to].cfg.room_id, &e)?;
                            }
                        }
                    }
                }
                TimelineAction::Wrist { .. } | TimelineAction::Track { .. } => {}
            }
        }
        Ok(())
    }

    /// Applies a game move to room `r`'s board; false on an illegal move.
    fn apply_move(&mut self, now: f64, r: usize, from: usize, seq: u32, tile: u8, mark: Mark) -> bool {
        let room = self.room_id(r);
        match ttt_apply(&self.boards[r], tile, mark) {
            Ok(b) => {
                self.boards[r] = b;
                self.trace.push(TraceEvent::Game {
                    t: now,
                    room,
                    from: self.room_id(from),
                    seq,
                    tile,
                    mark: mark.as_str().into(),
                });
                let result = ttt_winner(&b);
                if result != GameResult::None && !self.game_done[r] {
                    self.game_done[r] = true;
                    self.trace.push(TraceEvent::GameOver {
                        t: now,
                        room,
                        result: result.as_str().into(),
                    });
                }
                true
            }
            Err(e) => {
                self.trace.push(TraceEvent::Violation {
                    t: now,
                    room,
                    reason: format!("illegal move at tile {tile}: {e}"),
                });
                false
            }
        }
    }

    fn update_truth(&mut self, now: f64) {
        for o in &mut self.objects {
            if let Some((r, offset)) = o.held {
                if let Some(w) = self.users[r].wrist {
                    o.pose = Pose2::new(w.position + offset, o.pose.heading);
                }
            } else if let Some(g) = o.glide {
                let s = if g.duration > 0.0 { ((now - g.start) / g.duration).min(1.0) } else { 1.0 };
                o.pose = Pose2::new(g.from.lerp(g.to, s), o.pose.heading);
                if s >= 1.0 {
                    o.glide = None;
                }
            }
        }
    }

    fn network(&mut self, k: usize, now: f64, now_us: u64) -> Result<(), RunError> {
        let room_index: BTreeMap<u8, usize> = self.rooms.iter().enumerate().map(|(i, r)| (r.cfg.room_id, i)).collect();
        for (to_id, e) in self.channel.poll(now_us)? {
            let to = room_index[&to_id];
            let Some(&from) = room_index.get(&e.room_id) else { continue };
            match e.kind {
                MessageKind::PoseUpdate => {
                    let Some(snap) = EntitySnapshot::from_envelope(&e) else { continue };
                    let Some(o) = self.objects.iter().position(|x| x.id.as_str() == snap.entity) else { continue };
                    let pose = snap.pose;
                    if self.objects[o].authority != Authority::Room(to) && self.replicas[to].reconcile(snap) {
                        let view = &mut self.objects[o].views[to];
                        view.buffer.push(e.sent_at(), pose);
                        view.latest = pose;
                    }
                }
                MessageKind::GameEvent => {
                    let rx = self.receivers.get_mut(&(to, from)).expect("receiver per pair");
                    let delivered = rx.receive(e.seq, e.body.clone());
                    let upto = rx.cumulative_ack();
                    for (seq, body) in delivered {
                        let tile = body.get_int("tile").ok().and_then(|t| u8::try_from(t).ok());
                        let mark = body.get_text("mark").ok().and_then(Mark::parse);
                        match (tile, mark) {
                            (Some(tile), Some(mark)) => {
                                self.apply_move(now, to, from, seq, tile, mark);
                            }
                            _ => self.trace.push(TraceEvent::Violation {
                                t: now,
                                room: to_id,
                                reason: "unreadable game event".into(),
                            }),
                        }
                    }
                    self.ack_seq[to] += 1;
                    let ack = Envelope {
                        kind: MessageKind::Ack,
                        room_id: to_id,
                        seq: self.ack_seq[to],
                        sent_at_us: now_us,
                        body: ack_record(upto),
                    };
                    self.channel.send(e.room_id, &ack)?;
                }
                MessageKind::Ack => {
                    if let (Some(upto), Some(tx)) = (ack_of(&e), self.senders.get_mut(&(to, from))) {
                        tx.on_ack(upto);
                    }
                }
                MessageKind::BindingUpdate | MessageKind::GestureEvent => {}
            }
        }

        // 20 Hz: publish whenever floor(k·dt·20) advances.
        let slot = |k: usize| (k as f64 * self.cfg.dt * crate::sync::PUBLISH_HZ + 1e-9).floor() as i64;
        let publish = k == 0 || slot(k) > slot(k - 1);
        for o in 0..self.objects.len() {
            let obj = &self.objects[o];
            match obj.authority {
                Authority::Server => {
                    let pose = obj.pose;
                    for view in &mut self.objects[o].views {
                        view.buffer.push(now, pose);
                        view.latest = pose;
                    }
                }
                Authority::Room(r) => {
                    let pose = obj.pose;
                    let view = &mut self.objects[o].views[r];
                    view.buffer.push(now, pose);
                    view.latest = pose;
                    if publish {
                        self.pose_seq[r] += 1;
                        let snap = EntitySnapshot {
                            entity: self.objects[o].id.to_string(),
                            pose,
                            stamp: Stamp {
                                sent_at_us: now_us,
                                seq: self.pose_seq[r],
                                room_id: self.room_id(r),
                            },
                        };
                        let e = Envelope {
                            kind: MessageKind::PoseUpdate,
                            room_id: self.room_id(r),
                            seq: snap.stamp.seq,
                            sent_at_us: now_us,
                            body: snap.to_record(),
                        };
                        self.replicas[r].reconcile(snap);
                        for to in 0..self.rooms.len() {
                            if to != r {
                                self.channel.send(self.rooms[to].cfg.room_id, &e)?;
                            }
                        }
                    }
                }
            }
        }
        for ((_, to), tx) in self.senders.iter_mut() {
            for e in tx.due(now_us) {
                self.channel.send(self.rooms[*to].cfg.room_id, &e)?;
            }
        }
        Ok(())
    }

    fn render(&mut self, now: f64) {
        for o in &mut self.objects {
            for (r, view) in o.views.iter_mut().enumerate() {
                view.rendered = if o.authority == Authority::Room(r) {
                    o.pose
                } else {
                    view.buffer.delayed_view(now).unwrap_or(view.latest)
                };
            }
        }
    }

    fn gestures(&mut self, k: usize, now: f64) -> Result<(), RunError> {
        for r in 0..self.users.len() {
            let Some(sample) = self.users[r].wrist else { continue };
            if self.users[r].holding.is_some() {
                continue;
            }
            let visible: Vec<(ObjectId, Vec2)> = self
                .objects
                .iter()
                .filter(|o| o.tracked_in.is_none())
                .map(|o| (o.id.clone(), o.views[r].rendered.position))
                .collect();
            let user_pos = self.rooms[r].user_pos;
            let events = self.users[r].machine.step(sample, &visible, user_pos, &self.ws, self.cfg.dt)?;
            let room = self.room_id(r);
            for e in events {
                match e {
                    GestureEvent::Shake(object) => self.trace.push(TraceEvent::Shake { t: now, room, object }),
                    GestureEvent::Glow(object) => self.trace.push(TraceEvent::Glow { t: now, room, object }),
                    GestureEvent::Command {
                        object,
                        command,
                        destination,
                    } => {
                        let o = self.objects.iter().position(|x| x.id == object).expect("visible object");
                        self.trace.push(TraceEvent::Command {
                            t: now,
                            room,
                            object: object.clone(),
                            command: command.name().into(),
                            tile: tile_of(destination, &self.ws).index(),
                        });
                        let obj = &mut self.objects[o];
                        let from = obj.pose.position;
                        let duration = from.distance(destination) / self.cfg.glide_speed;
                        obj.glide = Some(Glide {
                            from,
                            to: destination,
                            start: now,
                            duration,
                        });
                        obj.glide_id += 1;
                        // The user sees the object settle once the glide has
                        // run its course in their delayed view.
                        for viewer in 0..self.rooms.len() {
                            let delay = if obj.authority == Authority::Room(viewer) { 0.0 } else { self.script.delay };
                            let due = ((now + duration + delay) / self.cfg.dt - 1e-9).ceil().max(k as f64) as usize;
                            self.scheduled.push((due, viewer, o, destination));
                        }
                    }
                    GestureEvent::Grab(_) | GestureEvent::Release(_) => {}
                }
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, now: f64) -> Result<(), RunError> {
        let mut demands: Vec<DemandPoint> = Vec::new();
        for r in 0..self.users.len() {
            let object = match self.users[r].holding {
                Some(o) if self.pool_objects.contains(&o) => Some(self.objects[o].id.clone()),
                _ => self.users[r].wrist.and_then(|w| {
                    let candidates: Vec<(ObjectId, Vec2)> = self
                        .pool_objects
                        .iter()
                        .map(|&o| (self.objects[o].id.clone(), self.objects[o].views[r].rendered.position))
                        .collect();
                    nearest_object_with_hysteresis(w.position, &candidates, self.users[r].demand.as_ref(), self.pool_margin)
                }),
            };
            self.users[r].demand = object.clone();
            if let Some(id) = object {
                if !demands.iter().any(|d| d.object == id) {
                    let o = self.objects.iter().position(|x| x.id == id).expect("pool object");
                    demands.push(DemandPoint {
                        object: id,
                        position: self.objects[o].views[r].rendered.position,
                        source: DemandSource::HandProximity,
                    });
                }
            }
        }
        let pool: Vec<PoolProxy> = self
            .proxies
            .iter()
            .filter(|p| p.role == Role::Pool)
            .map(|p| PoolProxy {
                id: p.id,
                room: self.rooms[p.room].cfg.room_id,
                position: self.rooms[p.room].to_session.apply(p.state.pose.position),
            })
            .collect();
        let out = dispatch_one_to_many(&demands, &pool, &self.bindings, self.pool_margin)?;

        for i in 0..self.proxies.len() {
            if self.proxies[i].role != Role::Pool {
                continue;
            }
            let id = self.proxies[i].id;
            let new = out.bindings.iter().find(|b| b.proxy == id);
            let new_obj = new.map(|b| self.objects.iter().position(|x| x.id == b.object).expect("pool object"));
            let old_obj = self.proxies[i].object;
            if new_obj == old_obj {
                continue;
            }
            if let Some(o) = old_obj {
                if new_obj.is_none() {
                    self.trace.push(TraceEvent::Unbind {
                        t: now,
                        proxy: id,
                        object: self.objects[o].id.clone(),
                    });
                }
            }
            let p = &mut self.proxies[i];
            p.object = new_obj;
            p.binding = None;
            p.target = None;
            p.pending_move = None;
            if let Some(o) = new_obj {
                self.trace.push(TraceEvent::Bind {
                    t: now,
                    proxy: id,
                    object: self.objects[o].id.clone(),
                    previous: old_obj.map(|o| self.objects[o].id.clone()),
                });
            }
        }
        let queued: BTreeSet<ObjectId> = out.queued.iter().map(|d| d.object.clone()).collect();
        for q in queued.difference(&self.queued) {
            self.trace.push(TraceEvent::Queued { t: now, object: q.clone() });
        }
        self.queued = queued;
        self.bindings = out
            .bindings
            .into_iter()
            .map(|mut b| {
                if let Some(p) = self.proxies.iter().find(|p| p.id == b.proxy) {
                    b.state = p.binding.unwrap_or(BindingState::Pending);
                }
                b
            })
            .collect();
        Ok(())
    }

    fn targets(&mut self, now: f64) {
        for i in 0..self.proxies.len() {
            let (r, role, object) = (self.proxies[i].room, self.proxies[i].role, self.proxies[i].object);
            let Some(o) = object else {
                self.proxies[i].target = None;
                continue;
            };
            let obj = &self.objects[o];
            let carried = obj.held.is_some_and(|(holder, _)| holder == r);
            let session = match role {
                Role::OneToOne(_) if obj.tracked_in.is_some_and(|t| t != r) => obj.views[r].latest.position,
                Role::OneToOne(_) => obj.glide.map_or(obj.pose.position, |g| g.to),
                Role::ManyToOne(_) | Role::Pool => obj.views[r].rendered.position,
            };
            let target = self.rooms[r].local_target(session);
            let glide_id = obj.glide_id;
            let p = &mut self.proxies[i];
            if carried {
                p.state.pose = Pose2::new(target, p.state.pose.heading);
                p.state.status = RobotStatus::Carrying;
            } else if p.state.status == RobotStatus::Carrying {
                p.state.status = RobotStatus::Idle;
            }
            let fresh_binding = p.target.is_none() && role == Role::Pool;
            let new_glide = matches!(role, Role::OneToOne(_)) && glide_id != p.seen_glide;
            p.seen_glide = glide_id;
            p.target = Some(target);
            if fresh_binding || new_glide {
                let bound = travel_time_bound(&p.state, target, &self.cfg.limits);
                p.pending_move = Some((now, bound));
                let id = p.id;
                self.trace.push(TraceEvent::Move {
                    t: now,
                    proxy: id,
                    object: self.objects[o].id.clone(),
                    target: (target.x, target.y),
                    bound,
                });
            }
        }
    }

    fn bookkeeping(&mut self, k: usize, now: f64) {
        let tol = self.cfg.limits.arrive_pos_tol;
        for p in &mut self.proxies {
            p.history.push(p.state.pose.position);
            let (Some(o), Some(target)) = (p.object, p.target) else { continue };
            let state = binding_state(&p.state, target, tol);
            if p.binding != Some(state) {
                p.binding = Some(state);
                self.trace.push(TraceEvent::Binding {
                    t: now,
                    proxy: p.id,
                    object: self.objects[o].id.clone(),
                    state,
                });
            }
            if state == BindingState::Engaged {
                if let Some((start, bound)) = p.pending_move.take() {
                    self.trace.push(TraceEvent::Arrive {
                        t: now,
                        proxy: p.id,
                        object: self.objects[o].id.clone(),
                        travel: now - start,
                        bound,
                    });
                }
            }
        }
        for b in &mut self.bindings {
            if let Some(p) = self.proxies.iter().find(|p| p.id == b.proxy) {
                b.state = p.binding.unwrap_or(BindingState::Pending);
            }
        }

        // Rendered settles of commanded glides.
        let due: Vec<(usize, usize, Vec2)> = self
            .scheduled
            .iter()
            .filter(|s| s.0 == k)
            .map(|s| (s.1, s.2, s.3))
            .collect();
        self.scheduled.retain(|s| s.0 != k);
        for (r, o, dest) in due {
            if let Some(p) = self.backing_proxy(r, o) {
                self.pending.push(PendingContact {
                    room: r,
                    object: o,
                    proxy: Some(p),
                    point: self.rooms[r].local_target(dest),
                    at: now,
                    at_tick: k,
                    cause: "settle",
                });
            }
        }

        // A user's own tracked object meeting a rendered remote one.
        let touch = self.cfg.contact_distance + CONTACT_EPS;
        for r in 0..self.rooms.len() {
            for own in 0..self.objects.len() {
                if self.objects[own].tracked_in != Some(r) {
                    continue;
                }
                for other in 0..self.objects.len() {
                    if other == own || self.objects[other].tracked_in.is_none_or(|t| t == r) {
                        continue;
                    }
                    let seen = self.objects[other].views[r].rendered.position;
                    let d = self.objects[own].pose.position.distance(seen);
                    let armed = self.armed.entry((r, own, other)).or_insert(true);
                    if *armed && d <= touch {
                        *armed = false;
                        let proxy = self.backing_proxy(r, other);
                        self.pending.push(PendingContact {
                            room: r,
                            object: other,
                            proxy,
                            point: self.rooms[r].local_target(seen),
                            at: now,
                            at_tick: k,
                            cause: "touch",
                        });
                    } else if !*armed && d > touch + self.cfg.contact_rearm {
                        *armed = true;
                    }
                }
            }
        }

        // Resolve contacts against proxy history.
        let pending = std::mem::take(&mut self.pending);
        for c in pending {
            let resolved = match c.proxy {
                None => Some(None),
                Some(p) => {
                    let hist = &self.proxies[p].history;
                    let near = |j: usize| hist[j].distance(c.point) <= tol;
                    if near(c.at_tick) {
                        let mut j = c.at_tick;
                        while j > 0 && near(j - 1) {
                            j -= 1;
                        }
                        Some(Some(j as f64 * self.cfg.dt))
                    } else if k > c.at_tick && near(k) {
                        Some(Some(now))
                    } else {
                        None
                    }
                }
            };
            match resolved {
                Some(arrival) => self.emit_contact(now, &c, arrival),
                None => self.pending.push(c),
            }
        }

        // Proxies sharing a table must keep apart.
        for r in 0..self.rooms.len() {
            let here: Vec<usize> = (0..self.proxies.len()).filter(|&i| self.proxies[i].room == r).collect();
            for (x, &a) in here.iter().enumerate() {
                for &b in &here[x + 1..] {
                    let d = self.proxies[a].state.pose.position.distance(self.proxies[b].state.pose.position);
                    if d < MIN_PROXY_SEPARATION {
                        if self.unsafe_pairs.insert((a, b)) {
                            self.trace.push(TraceEvent::Safety {
                                t: now,
                                room: self.room_id(r),
                                a: self.proxies[a].id,
                                b: self.proxies[b].id,
                                distance: d,
                            });
                        }
                    } else {
                        self.unsafe_pairs.remove(&(a, b));
                    }
                }
            }
        }
    }

    fn emit_contact(&mut self, now: f64, c: &PendingContact, arrival: Option<f64>) {
        self.trace.push(TraceEvent::Contact {
            t: now,
            room: self.room_id(c.room),
            object: self.objects[c.object].id.clone(),
            proxy: c.proxy.map(|p| self.proxies[p].id),
            contact_at: c.at,
            arrival,
            mask: arrival.is_some_and(|a| mask_check(a, c.at)),
            cause: c.cause,
        });
    }

    fn log_tick(&mut self, k: usize, now: f64) {
        self.trace.push(TraceEvent::Tick { k: k as u64, t: now });
        for p in &self.proxies {
            self.trace.push(TraceEvent::Proxy {
                id: p.id,
                room: self.rooms[p.room].cfg.room_id,
                pose: p.state.pose,
                status: p.state.status,
                object: p.object.map(|o| self.objects[o].id.clone()),
                target: p.target.map(|t| (t.x, t.y)),
                binding: p.binding,
            });
        }
        for (r, room) in self.rooms.iter().enumerate() {
            for o in &self.objects {
                self.trace.push(TraceEvent::View {
                    room: room.cfg.room_id,
                    object: o.id.clone(),
                    pose: o.views[r].rendered,
                });
            }
        }
    }

    fn step_robots(&mut self) -> Result<(), RunError> {
        for p in &mut self.proxies {
            if p.state.status == RobotStatus::Carrying {
                continue;
            }
            let (cmd, status) = match p.target {
                Some(t) => drive_to(&p.state, t, &self.cfg.limits),
                None => (MotionCommand::STOP, RobotStatus::Idle),
            };
            p.state.status = status;
            p.state = step_robot(&p.state, cmd, self.cfg.dt, &self.cfg.limits)?;
        }
        Ok(())
    }

    fn finish(&mut self, ticks: usize) {
        let end = ticks as f64 * self.cfg.dt;
        for c in std::mem::take(&mut self.pending) {
            self.emit_contact(end, &c, None);
        }
        let (mut contacts, mut masked) = (0, 0);
        for e in &self.trace.events {
            if let TraceEvent::Contact { mask, .. } = e {
                contacts += 1;
                masked += i64::from(*mask);
            }
        }
        let mut out = Record::new().int("contacts", contacts).int("masked", masked);
        match self.script.kind {
            ScenarioKind::PassTheMug => {
                if let Some(o) = self.objects.iter().find(|o| o.tracked_in.is_none()) {
                    let tile = tile_of(o.pose.position, &self.ws).index();
                    out = out.text("object", o.id.as_str()).int("tile", tile.into());
                    if let Some(want) = self.script.expect_tile {
                        out = out.int("intended", want.index().into()).flag("ok", want.index() == tile);
                    }
                }
            }
            ScenarioKind::TicTacToe => {
                let results: Vec<GameResult> = self.boards.iter().map(ttt_winner).collect();
                let agree = self.boards.windows(2).all(|w| w[0] == w[1]);
                let moves = self.boards[0].empty_cells().len();
                out = out
                    .text("result", results[0].as_str())
                    .flag("agree", agree)
                    .int("moves", 9 - moves as i64);
            }
            ScenarioKind::CityBuilder => {
                let (mut grabs, mut engaged, mut switches) = (0, 0, 0);
                for e in &self.trace.events {
                    match e {
                        TraceEvent::Grab { engaged: g, .. } => {
                            grabs += 1;
                            engaged += i64::from(*g);
                        }
                        TraceEvent::Bind { previous: Some(_), .. } => switches += 1,
                        _ => {}
                    }
                }
                out = out.int("grabs", grabs).int("engaged_grabs", engaged).int("switches", switches);
            }
            ScenarioKind::ClinkingDrinks => {}
        }
        self.trace.push(TraceEvent::Outcome(out.text("scenario", self.script.kind.as_str())));
    }
}

pub fn run_scenario(script: &ScenarioScript) -> Result<Trace, RunError> {
    run_scenario_with(script, EngineConfig::default())
}

pub fn run_scenario_with(script: &ScenarioScript, cfg: EngineConfig) -> Result<Trace, RunError> {
    Sim::new(script, cfg)?.run()
}
