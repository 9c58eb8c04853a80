//! Seeded generators for the four demo scenarios.
//!
//! Generators work in session coordinates and convert to each room's own
//! frame when writing the script, so the scripts read like tracker logs.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    room_to_session, shared_workspace, tile_center, Pose2, Rect, RigidTransform2, RoomConfig, SeatSlot,
    SharedWorkspace, Tile, Vec2,
};
use crate::mapping::{one_to_one_target, MappingPolicy, ObjectId, ProxyId};
use crate::sync::{ChannelModel, DEFAULT_DELAY};

use super::script::{
    Ease, ObjectKind, ObjectSpec, ProxySpec, ScenarioKind, ScenarioScript, TimelineAction, TimelineEvent,
};
use super::tictactoe::{ttt_apply, ttt_winner, Board, GameResult};

/// Seat distance behind the table edge, matching the engine.
const STANDOFF: f64 = 0.1;
/// How far in front of the user the resting wrist hovers.
const WRIST_REACH: f64 = 0.15;

fn demo_channel(seed: u64) -> ChannelModel {
    ChannelModel {
        base_latency: 0.05,
        jitter: 0.02,
        drop_prob: 0.05,
        seed,
    }
}

fn demo_rooms() -> Vec<RoomConfig> {
    vec![
        RoomConfig::new(1, Rect::new(0.6, 0.4).unwrap(), -FRAC_PI_2).unwrap(),
        RoomConfig::new(2, Rect::new(0.5, 0.35).unwrap(), 0.0).unwrap(),
    ]
}

struct Draft {
    rooms: Vec<RoomConfig>,
    frames: Vec<RigidTransform2>,
    ws: SharedWorkspace,
    timeline: Vec<TimelineEvent>,
}

impl Draft {
    fn new(rooms: Vec<RoomConfig>) -> Self {
        let frames = rooms
            .iter()
            .enumerate()
            .map(|(i, r)| room_to_session(r, SeatSlot::for_index(i)))
            .collect();
        let ws = shared_workspace(&rooms).unwrap();
        Draft {
            rooms,
            frames,
            ws,
            timeline: Vec::new(),
        }
    }

    fn local(&self, r: usize, p: Vec2) -> Vec2 {
        self.frames[r].inverse().apply(p)
    }

    fn user(&self, r: usize) -> Vec2 {
        self.frames[r].apply(self.rooms[r].seat_position(STANDOFF))
    }

    /// Resting wrist: a little in front of the user, toward the centre.
    fn rest(&self, r: usize) -> Vec2 {
        let u = self.user(r);
        u + (Vec2::ZERO - u).normalized().unwrap_or(Vec2::new(0.0, 1.0)) * WRIST_REACH
    }

    fn event(&mut self, t: f64, r: usize, action: TimelineAction) {
        self.timeline.push(TimelineEvent {
            t,
            room: self.rooms[r].room_id,
            action,
        });
    }

    /// Wrist keyframe given in session coordinates.
    fn wrist(&mut self, t: f64, r: usize, at: Vec2, palm: f64, ease: Ease) {
        let position = self.local(r, at);
        let palm = crate::geometry::normalize_angle(palm - self.frames[r].rotation);
        self.event(t, r, TimelineAction::Wrist { position, palm, ease });
    }

    fn track(&mut self, t: f64, r: usize, object: &str, at: Pose2, ease: Ease) {
        let pose = self.frames[r].inverse().apply_pose(at);
        self.event(
            t,
            r,
            TimelineAction::Track {
                object: ObjectId::new(object),
                pose,
                ease,
            },
        );
    }

    fn proxy(&self, id: u32, r: usize, session: Pose2) -> ProxySpec {
        ProxySpec {
            id: ProxyId(id),
            room: self.rooms[r].room_id,
            pose: self.frames[r].inverse().apply_pose(session),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        mut self,
        kind: ScenarioKind,
        seed: u64,
        delay: f64,
        gestures: bool,
        channel: ChannelModel,
        proxies: Vec<ProxySpec>,
        objects: Vec<ObjectSpec>,
        policies: Vec<MappingPolicy>,
        expect_tile: Option<Tile>,
        tail: f64,
    ) -> ScenarioScript {
        self.timeline.sort_by(|a, b| a.t.total_cmp(&b.t));
        let end = self.timeline.last().map_or(0.0, |e| e.t);
        ScenarioScript {
            kind,
            seed,
            delay,
            duration: ((end + tail) * 10.0).ceil() / 10.0,
            gestures,
            channel,
            rooms: self.rooms,
            proxies,
            objects,
            policies,
            expect_tile,
            timeline: self.timeline,
        }
        .canonical()
        .expect("generated script is valid")
    }
}

fn virtual_object(id: &str, at: Vec2) -> ObjectSpec {
    ObjectSpec {
        id: ObjectId::new(id),
        kind: ObjectKind::Virtual { pose: Pose2::new(at, 0.0) },
    }
}

#[derive(Clone, Copy)]
enum Stroke {
    Push,
    Pull,
    Left,
    Right,
}

/// Gesture strokes that carry a mug from the centre tile to `tile`.
fn strokes_to(tile: Tile) -> Vec<Stroke> {
    let mut out = match tile.row() {
        0 => vec![Stroke::Push],
        2 => vec![Stroke::Pull],
        _ => Vec::new(),
    };
    match tile.col() {
        0 => out.push(Stroke::Left),
        2 => out.push(Stroke::Right),
        _ if tile.row() == 1 => out.extend([Stroke::Left, Stroke::Right]),
        _ => {}
    }
    out
}

/// One user flicks a virtual mug across a single table with palm gestures.
pub fn pass_the_mug(seed: u64, tile: Option<Tile>) -> ScenarioScript {
    pass_the_mug_with_delay(seed, tile, DEFAULT_DELAY)
}

pub fn pass_the_mug_with_delay(seed: u64, tile: Option<Tile>, delay: f64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seat = [0.0, FRAC_PI_2, PI, -FRAC_PI_2][rng.gen_range(0..4)];
    let room = RoomConfig::new(1, Rect::new(0.35, 0.4).unwrap(), seat).unwrap();
    let intended = tile.unwrap_or_else(|| Tile::new(1 + (seed % 9) as u8).unwrap());
    let mut d = Draft::new(vec![room]);

    let user = d.user(0);
    let rest = d.rest(0) + Vec2::new(rng.gen_range(-0.02..0.02), 0.0);
    let away = (user - rest).angle();
    let mut mug = Vec2::ZERO;
    let mut here = Tile::new(5).unwrap();
    let mut t = 0.2;
    d.wrist(0.0, 0, rest, away, Ease::Linear);
    for stroke in strokes_to(intended) {
        let axis = (mug - user).normalized().unwrap();
        let dir = match stroke {
            Stroke::Push => axis,
            Stroke::Pull => -axis,
            Stroke::Left => axis.perp(),
            Stroke::Right => -axis.perp(),
        };
        let aim = (mug - rest).angle();
        let reach = 0.2 + rng.gen_range(-0.02..0.02);
        let sweep = 0.4 + rng.gen_range(-0.04..0.04);
        let settle = 0.7 + rng.gen_range(0.0..0.1);
        d.wrist(t, 0, rest, aim, Ease::Linear);
        d.wrist(t + settle, 0, rest, aim, Ease::Linear);
        d.wrist(t + settle + sweep, 0, rest + dir * reach, aim, Ease::Trapezoid);
        d.wrist(t + settle + sweep + 0.02, 0, rest + dir * reach, away, Ease::Linear);
        d.wrist(t + settle + sweep + 0.6, 0, rest, away, Ease::Linear);

        let next = match stroke {
            Stroke::Push => Tile::from_row_col(0, here.col()),
            Stroke::Pull => Tile::from_row_col(2, here.col()),
            Stroke::Left => Tile::from_row_col(here.row(), here.col().saturating_sub(1)),
            Stroke::Right => Tile::from_row_col(here.row(), here.col() + 1),
        };
        let dest = tile_center(next, &d.ws);
        let glide = mug.distance(dest) / 0.5;
        here = next;
        mug = dest;
        t += settle + sweep + glide + delay + 0.6;
    }

    let mug_local = one_to_one_target(&Pose2::new(Vec2::ZERO, 0.0), &d.rooms[0], SeatSlot::Near);
    let proxies = vec![ProxySpec {
        id: ProxyId(1),
        room: 1,
        pose: Pose2::new(mug_local, 0.0),
    }];
    let policies = vec![MappingPolicy::OneToOne {
        pairs: vec![(ObjectId::new("mug"), ProxyId(1))],
    }];
    d.finish(
        ScenarioKind::PassTheMug,
        seed,
        delay,
        true,
        ChannelModel::LOSSLESS,
        proxies,
        vec![virtual_object("mug", Vec2::ZERO)],
        policies,
        Some(intended),
        1.0,
    )
}

/// Two users in different rooms tap their real mugs together.
pub fn clinking_drinks(seed: u64) -> ScenarioScript {
    clinking_drinks_with_delay(seed, DEFAULT_DELAY)
}

pub fn clinking_drinks_with_delay(seed: u64, delay: f64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Draft::new(demo_rooms());
    let gap = 0.04;
    let far = 0.3;
    let sx0 = rng.gen_range(-0.15..0.15);
    let start = [
        Pose2::new(Vec2::new(sx0, -far), FRAC_PI_2),
        Pose2::new(Vec2::new(sx0, far), -FRAC_PI_2),
    ];
    for (r, name) in [(0, "mug_1"), (1, "mug_2")] {
        d.track(0.0, r, name, start[r], Ease::Linear);
    }
    let mut t = 0.5;
    let mut sx = sx0;
    for strike in 0..2 {
        if strike > 0 {
            sx = rng.gen_range(-0.15..0.15);
        }
        for (r, name, side) in [(0, "mug_1", -1.0), (1, "mug_2", 1.0)] {
            let t0 = t + rng.gen_range(-0.1..0.1);
            let approach = 0.6 + rng.gen_range(0.0..0.1);
            let hold = delay + 0.8 + rng.gen_range(0.0..0.2);
            let heading = start[r].heading;
            let back = Pose2::new(Vec2::new(sx, side * far), heading);
            let touch = Pose2::new(Vec2::new(sx, side * gap), heading);
            d.track(t0, r, name, back, Ease::Linear);
            d.track(t0 + approach, r, name, touch, Ease::Trapezoid);
            d.track(t0 + approach + hold, r, name, touch, Ease::Linear);
            d.track(t0 + approach + hold + 0.6, r, name, back, Ease::Trapezoid);
        }
        t += 0.8 + delay + 1.0 + 0.7 + 1.0;
    }

    // Each table's proxy stands in for the other user's mug.
    let proxies = vec![d.proxy(1, 0, start[1]), d.proxy(2, 1, start[0])];
    let objects = vec![
        ObjectSpec {
            id: ObjectId::new("mug_1"),
            kind: ObjectKind::Tracked { room: 1 },
        },
        ObjectSpec {
            id: ObjectId::new("mug_2"),
            kind: ObjectKind::Tracked { room: 2 },
        },
    ];
    let policies = vec![MappingPolicy::OneToOne {
        pairs: vec![(ObjectId::new("mug_2"), ProxyId(1)), (ObjectId::new("mug_1"), ProxyId(2))],
    }];
    d.finish(
        ScenarioKind::ClinkingDrinks,
        seed,
        delay,
        false,
        demo_channel(seed),
        proxies,
        objects,
        policies,
        None,
        delay + 1.5,
    )
}

/// Two users take turns moving one shared controller onto board tiles.
pub fn tic_tac_toe(seed: u64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Draft::new(demo_rooms());
    let delay = DEFAULT_DELAY;

    let mut board = Board::new();
    let mut moves = Vec::new();
    while ttt_winner(&board) == GameResult::None {
        let cell = *board.empty_cells().choose(&mut rng).unwrap();
        board = ttt_apply(&board, cell, board.next()).unwrap();
        moves.push(cell);
    }

    for r in 0..2 {
        let rest = d.rest(r);
        d.wrist(0.0, r, rest, 0.0, Ease::Linear);
    }
    let mut t = 0.5;
    for (i, &cell) in moves.iter().enumerate() {
        let r = i % 2;
        let rest = d.rest(r);
        let spot = tile_center(Tile::new(cell).unwrap(), &d.ws);
        let jitter = rng.gen_range(0.0..0.2);
        d.wrist(t, r, rest, 0.0, Ease::Linear);
        d.wrist(t + 0.6, r, Vec2::ZERO, 0.0, Ease::Trapezoid);
        d.event(t + 0.7, r, TimelineAction::Grab { object: ObjectId::new("ctrl") });
        d.wrist(t + 0.7, r, Vec2::ZERO, 0.0, Ease::Linear);
        d.wrist(t + 1.9 + jitter, r, spot, 0.0, Ease::Trapezoid);
        d.event(t + 2.1 + jitter, r, TimelineAction::Select);
        d.wrist(t + 2.2 + jitter, r, spot, 0.0, Ease::Linear);
        d.wrist(t + 3.4 + jitter, r, Vec2::ZERO, 0.0, Ease::Trapezoid);
        d.event(t + 3.5 + jitter, r, TimelineAction::Release);
        d.wrist(t + 3.5 + jitter, r, Vec2::ZERO, 0.0, Ease::Linear);
        d.wrist(t + 4.1 + jitter, r, rest, 0.0, Ease::Trapezoid);
        t += 4.1 + jitter + delay + 1.5;
    }

    let centre = Pose2::new(Vec2::ZERO, 0.0);
    let proxies = vec![d.proxy(1, 0, centre), d.proxy(2, 1, centre)];
    let policies = vec![MappingPolicy::ManyToOne {
        object: ObjectId::new("ctrl"),
        proxies: [(1, ProxyId(1)), (2, ProxyId(2))].into_iter().collect(),
    }];
    d.finish(
        ScenarioKind::TicTacToe,
        seed,
        delay,
        false,
        demo_channel(seed),
        proxies,
        vec![virtual_object("ctrl", Vec2::ZERO)],
        policies,
        None,
        1.0,
    )
}

/// One user handles four virtual buildings served by two proxies.
pub fn city_builder(seed: u64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Draft::new(vec![demo_rooms()[0]]);
    let names = ["b1", "b2", "b3", "b4"];
    let spots = [
        Vec2::new(-0.25, 0.15),
        Vec2::new(0.25, 0.15),
        Vec2::new(-0.25, -0.15),
        Vec2::new(0.25, -0.15),
    ];
    let mut order: Vec<usize> = (0..4).collect();
    order.shuffle(&mut rng);

    let rest = d.rest(0);
    d.wrist(0.0, 0, rest, 0.0, Ease::Linear);
    let mut t = 0.3;
    let mut at = rest;
    for &b in &order {
        let over = spots[b];
        let hover = 2.0 + rng.gen_range(0.0..0.3);
        d.wrist(t, 0, at, 0.0, Ease::Linear);
        d.wrist(t + 0.6, 0, over, 0.0, Ease::Trapezoid);
        d.event(t + 0.6 + hover, 0, TimelineAction::Grab { object: ObjectId::new(names[b]) });
        d.event(t + 0.6 + hover + 0.6, 0, TimelineAction::Release);
        at = over;
        t += 0.6 + hover + 0.9;
    }
    d.wrist(t, 0, at, 0.0, Ease::Linear);
    d.wrist(t + 0.6, 0, rest, 0.0, Ease::Trapezoid);

    let proxies = vec![
        d.proxy(1, 0, Pose2::new(Vec2::new(-0.25, 0.0), FRAC_PI_2)),
        d.proxy(2, 0, Pose2::new(Vec2::new(0.25, 0.0), FRAC_PI_2)),
    ];
    let policies = vec![MappingPolicy::OneToMany {
        objects: names.iter().map(|n| ObjectId::new(*n)).collect(),
        pool: vec![ProxyId(1), ProxyId(2)],
        hysteresis_margin: crate::mapping::DEFAULT_HYSTERESIS,
    }];
    let objects = names.iter().zip(spots).map(|(n, p)| virtual_object(n, p)).collect();
    d.finish(
        ScenarioKind::CityBuilder,
        seed,
        0.0,
        false,
        ChannelModel::LOSSLESS,
        proxies,
        objects,
        policies,
        None,
        1.0,
    )
}

pub fn builtin_script(kind: ScenarioKind, seed: u64) -> ScenarioScript {
    match kind {
        ScenarioKind::PassTheMug => pass_the_mug(seed, None),
        ScenarioKind::ClinkingDrinks => clinking_drinks(seed),
        ScenarioKind::TicTacToe => tic_tac_toe(seed),
        ScenarioKind::CityBuilder => city_builder(seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strokes_reach_every_tile() {
        let ws = SharedWorkspace::new(Rect::new(0.35, 0.4).unwrap());
        for tile in Tile::all() {
            let mut here = Tile::new(5).unwrap();
            for s in strokes_to(tile) {
                here = match s {
                    Stroke::Push => Tile::from_row_col(0, here.col()),
                    Stroke::Pull => Tile::from_row_col(2, here.col()),
                    Stroke::Left => Tile::from_row_col(here.row(), here.col().saturating_sub(1)),
                    Stroke::Right => Tile::from_row_col(here.row(), here.col() + 1),
                };
            }
            assert_eq!(here, tile);
            let _ = tile_center(tile, &ws);
        }
    }

    #[test]
    fn generators_are_seed_stable() {
        for kind in ScenarioKind::ALL {
            assert_eq!(builtin_script(kind, 11), builtin_script(kind, 11));
            let text = builtin_script(kind, 11).to_text();
            assert_eq!(ScenarioScript::parse(&text).unwrap().to_text(), text);
        }
    }
}
