//! Planar frames on the table surface.
//!
//! Every room has its own tracker frame whose origin is the table centre.
//! [`localize_room`] rotates that frame so the seated user ends up at the
//! canonical south seat, and [`SeatSlot`] then places the room on one side of
//! the shared session table so that partners render opposite each other.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

/// Seat angle every localized user is mapped to ("south").
pub const CANONICAL_SEAT: f64 = -FRAC_PI_2;

const CARDINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("rotation {0} rad is not a multiple of pi/2")]
    NonCardinalRotation(f64),
    #[error("shared workspace needs at least one room")]
    EmptyRoomSet,
    #[error("tile index {0} outside 1..=9")]
    BadTileIndex(u8),
    #[error("invalid rectangle {half_width} x {half_depth}: half extents must be finite and positive")]
    InvalidRect { half_width: f64, half_depth: f64 },
    #[error("room {0}: seat angle {1} rad is not a table edge")]
    NonCardinalSeat(u8, f64),
    #[error("room id {0} used more than once")]
    DuplicateRoom(u8),
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; this guards the 2π edge.
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Returns `k` when `a` is within tolerance of `k·π/2`.
fn quarter_turns(a: f64) -> Option<i64> {
    let k = (a / FRAC_PI_2).round();
    if (a - k * FRAC_PI_2).abs() <= CARDINAL_TOL {
        Some(k as i64)
    } else {
        None
    }
}

/// A point or displacement on the table plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(a: f64) -> Self {
        Self::new(a.cos(), a.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-12).then(|| self * (1.0 / n))
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise rotation by `a` radians.
    pub fn rotated(self, a: f64) -> Vec2 {
        let (s, c) = a.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Left-hand perpendicular (rotation by +π/2).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.x, self.y)
    }
}

/// Position plus heading. The heading is kept in (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }

    pub fn at(x: f64, y: f64) -> Self {
        Self::new(Vec2::new(x, y), 0.0)
    }
}

/// Rotation about the origin followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2 {
    pub rotation: f64,
    pub translation: Vec2,
}

impl Default for RigidTransform2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform2 {
    pub const IDENTITY: RigidTransform2 = RigidTransform2 {
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    pub fn new(rotation: f64, translation: Vec2) -> Self {
        Self {
            rotation: normalize_angle(rotation),
            translation,
        }
    }

    pub fn rotation(rotation: f64) -> Self {
        Self::new(rotation, Vec2::ZERO)
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotated(self.rotation) + self.translation
    }

    pub fn apply_pose(&self, p: Pose2) -> Pose2 {
        Pose2::new(self.apply(p.position), p.heading + self.rotation)
    }

    pub fn apply_vector(&self, v: Vec2) -> Vec2 {
        v.rotated(self.rotation)
    }

    pub fn inverse(&self) -> Self {
        Self::new(-self.rotation, -self.translation.rotated(-self.rotation))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform2) -> Self {
        Self::new(
            self.rotation + other.rotation,
            self.apply(other.translation),
        )
    }
}

/// Axis-aligned rectangle centred on the table origin, given by half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub half_width: f64,
    pub half_depth: f64,
}

impl Rect {
    pub fn new(half_width: f64, half_depth: f64) -> Result<Self, GeometryError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(half_width) && ok(half_depth) {
            Ok(Self {
                half_width,
                half_depth,
            })
        } else {
            Err(GeometryError::InvalidRect {
                half_width,
                half_depth,
            })
        }
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p.x.abs() <= self.half_width + tol && p.y.abs() <= self.half_depth + tol
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(-self.half_width, self.half_width),
            p.y.clamp(-self.half_depth, self.half_depth),
        )
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (w, d) = (self.half_width, self.half_depth);
        [
            Vec2::new(-w, -d),
            Vec2::new(w, -d),
            Vec2::new(w, d),
            Vec2::new(-w, d),
        ]
    }

    /// Half extent of the table along a cardinal direction `angle`.
    fn extent_towards(&self, angle: f64) -> f64 {
        let d = Vec2::from_angle(angle);
        if d.x.abs() >= d.y.abs() {
            self.half_width
        } else {
            self.half_depth
        }
    }
}

/// One participating room: its table and where the user sits around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomConfig {
    pub room_id: u8,
    pub table: Rect,
    pub seat_angle: f64,
}

impl RoomConfig {
    /// Builds a room, rejecting seats that are not on a table edge.
    pub fn new(room_id: u8, table: Rect, seat_angle: f64) -> Result<Self, GeometryError> {
        let seat_angle = normalize_angle(seat_angle);
        if quarter_turns(seat_angle).is_none() {
            return Err(GeometryError::NonCardinalSeat(room_id, seat_angle));
        }
        Ok(Self {
            room_id,
            table,
            seat_angle,
        })
    }

    /// Where the seated user's body is, in the room's tracker frame.
    pub fn seat_position(&self, standoff: f64) -> Vec2 {
        let reach = self.table.extent_towards(self.seat_angle) + standoff;
        Vec2::from_angle(self.seat_angle) * reach
    }
}

/// The local → canonical transform for a room: seat goes to −π/2, the table
/// centre stays at the origin.
pub fn localize_room(config: &RoomConfig) -> RigidTransform2 {
    RigidTransform2::new(CANONICAL_SEAT - config.seat_angle, Vec2::ZERO)
}

/// The table's extents after a cardinal rotation.
pub fn transformed_extents(table: Rect, t: &RigidTransform2) -> Result<Rect, GeometryError> {
    let k = quarter_turns(t.rotation).ok_or(GeometryError::NonCardinalRotation(t.rotation))?;
    Ok(if k.rem_euclid(2) == 1 {
        Rect {
            half_width: table.half_depth,
            half_depth: table.half_width,
        }
    } else {
        table
    })
}

/// Side of the session table a room is rendered on.
///
/// The first room sits south (`Near`); its partner is rendered across the
/// table (`Far`), which is a half turn of its canonical frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeatSlot {
    Near,
    Far,
}

impl SeatSlot {
    /// Slot for the `index`-th room of a session.
    pub fn for_index(index: usize) -> Self {
        if index % 2 == 0 {
            SeatSlot::Near
        } else {
            SeatSlot::Far
        }
    }

    pub fn rotation(self) -> f64 {
        match self {
            SeatSlot::Near => 0.0,
            SeatSlot::Far => PI,
        }
    }
}

/// Local tracker frame → session frame for a room in the given slot.
pub fn room_to_session(config: &RoomConfig, slot: SeatSlot) -> RigidTransform2 {
    RigidTransform2::rotation(slot.rotation()).compose(&localize_room(config))
}

/// The common operating rectangle shared by all rooms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedWorkspace {
    pub bounds: Rect,
}

impl SharedWorkspace {
    pub fn new(bounds: Rect) -> Self {
        Self { bounds }
    }
}

/// Intersects every room's localized table ("minimum boundary").
pub fn shared_workspace(rooms: &[RoomConfig]) -> Result<SharedWorkspace, GeometryError> {
    let mut ids = std::collections::BTreeSet::new();
    let mut bounds: Option<Rect> = None;
    for room in rooms {
        if !ids.insert(room.room_id) {
            return Err(GeometryError::DuplicateRoom(room.room_id));
        }
        let r = transformed_extents(room.table, &localize_room(room))?;
        bounds = Some(match bounds {
            None => r,
            Some(b) => Rect {
                half_width: b.half_width.min(r.half_width),
                half_depth: b.half_depth.min(r.half_depth),
            },
        });
    }
    bounds
        .map(SharedWorkspace::new)
        .ok_or(GeometryError::EmptyRoomSet)
}

pub fn clamp_to_workspace(p: Vec2, ws: &SharedWorkspace) -> Vec2 {
    ws.bounds.clamp(p)
}

/// One cell of the 3×3 table partition, numbered 1..=9 row-major from the
/// far-left corner as seen from the south seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tile(u8);

impl Tile {
    pub fn new(index: u8) -> Result<Self, GeometryError> {
        if (1..=9).contains(&index) {
            Ok(Tile(index))
        } else {
            Err(GeometryError::BadTileIndex(index))
        }
    }

    pub fn all() -> impl Iterator<Item = Tile> {
        (1..=9).map(Tile)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// 0 = far row, 2 = near row.
    pub fn row(self) -> u8 {
        (self.0 - 1) / 3
    }

    /// 0 = left column, 2 = right column.
    pub fn col(self) -> u8 {
        (self.0 - 1) % 3
    }

    pub fn from_row_col(row: u8, col: u8) -> Tile {
        Tile(row.min(2) * 3 + col.min(2) + 1)
    }
}

impl fmt::Display for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn tile_of(p: Vec2, ws: &SharedWorkspace) -> Tile {
    let b = ws.bounds;
    let p = b.clamp(p);
    let cell = |offset: f64, span: f64| -> u8 { ((offset / span * 3.0).floor() as i64).clamp(0, 2) as u8 };
    let col = cell(p.x + b.half_width, 2.0 * b.half_width);
    let row = cell(b.half_depth - p.y, 2.0 * b.half_depth);
    Tile::from_row_col(row, col)
}

pub fn tile_center(tile: Tile, ws: &SharedWorkspace) -> Vec2 {
    let b = ws.bounds;
    let x = (tile.col() as f64 - 1.0) * 2.0 * b.half_width / 3.0;
    let y = (1.0 - tile.row() as f64) * 2.0 * b.half_depth / 3.0;
    Vec2::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn rect(w: f64, d: f64) -> Rect {
        Rect::new(w, d).unwrap()
    }

    #[test]
    fn normalize_half_open_interval() {
        assert!(close(normalize_angle(PI), PI, 1e-15));
        assert!(close(normalize_angle(-PI), PI, 1e-15));
        assert!(close(normalize_angle(-3.0 * FRAC_PI_2), FRAC_PI_2, 1e-12));
        assert!(close(normalize_angle(5.0 * PI), PI, 1e-12));
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn localize_examples() {
        let south = RoomConfig::new(1, rect(0.6, 0.4), -FRAC_PI_2).unwrap();
        let t = localize_room(&south);
        assert!(close(t.rotation, 0.0, 1e-12));
        assert_eq!(t.translation, Vec2::ZERO);

        let east = RoomConfig::new(2, rect(0.5, 0.35), 0.0).unwrap();
        let t = localize_room(&east);
        assert!(close(t.rotation, -FRAC_PI_2, 1e-12));
        assert_eq!(t.translation, Vec2::ZERO);

        let west = RoomConfig::new(3, rect(0.5, 0.35), PI).unwrap();
        assert!(close(localize_room(&west).rotation, FRAC_PI_2, 1e-12));
    }

    #[test]
    fn non_cardinal_seat_rejected() {
        assert!(matches!(
            RoomConfig::new(1, rect(0.5, 0.5), 0.3),
            Err(GeometryError::NonCardinalSeat(1, _))
        ));
    }

    #[test]
    fn extents_under_rotation() {
        let r = transformed_extents(rect(0.6, 0.4), &RigidTransform2::IDENTITY).unwrap();
        assert_eq!(r, rect(0.6, 0.4));
        let r = transformed_extents(rect(0.5, 0.35), &RigidTransform2::rotation(-FRAC_PI_2)).unwrap();
        assert_eq!(r, rect(0.35, 0.5));
        let r = transformed_extents(rect(0.6, 0.4), &RigidTransform2::rotation(PI)).unwrap();
        assert_eq!(r, rect(0.6, 0.4));
        assert!(matches!(
            transformed_extents(rect(0.6, 0.4), &RigidTransform2::rotation(0.5)),
            Err(GeometryError::NonCardinalRotation(_))
        ));
    }

    #[test]
    fn workspace_examples() {
        let a = RoomConfig::new(1, rect(0.6, 0.4), -FRAC_PI_2).unwrap();
        let b = RoomConfig::new(2, rect(0.5, 0.35), 0.0).unwrap();
        assert_eq!(shared_workspace(&[a]).unwrap().bounds, rect(0.6, 0.4));
        assert_eq!(shared_workspace(&[a, b]).unwrap().bounds, rect(0.35, 0.4));

        let c = RoomConfig::new(3, rect(0.6, 0.4), FRAC_PI_2).unwrap();
        assert_eq!(shared_workspace(&[a, c]).unwrap().bounds, rect(0.6, 0.4));

        assert_eq!(shared_workspace(&[]), Err(GeometryError::EmptyRoomSet));
        assert_eq!(shared_workspace(&[a, a]), Err(GeometryError::DuplicateRoom(1)));
    }

    #[test]
    fn clamp_examples() {
        let ws = SharedWorkspace::new(rect(0.35, 0.4));
        assert_eq!(clamp_to_workspace(Vec2::ZERO, &ws), Vec2::ZERO);
        assert_eq!(clamp_to_workspace(Vec2::new(0.5, 0.1), &ws), Vec2::new(0.35, 0.1));
        assert_eq!(clamp_to_workspace(Vec2::new(-1.0, -1.0), &ws), Vec2::new(-0.35, -0.4));
    }

    #[test]
    fn tile_examples() {
        let ws = SharedWorkspace::new(rect(0.35, 0.4));
        let eps = 1e-6;
        assert_eq!(tile_of(Vec2::ZERO, &ws).index(), 5);
        assert_eq!(tile_of(Vec2::new(0.0, 0.4 - eps), &ws).index(), 2);
        assert_eq!(tile_of(Vec2::new(-0.35 + eps, -0.4 + eps), &ws).index(), 7);

        let ws = SharedWorkspace::new(rect(0.45, 0.3));
        let c = tile_center(Tile::new(5).unwrap(), &ws);
        assert!(c.norm() < 1e-12);
        let c = tile_center(Tile::new(2).unwrap(), &ws);
        assert!(close(c.x, 0.0, 1e-12) && close(c.y, 0.2, 1e-12));
        let c = tile_center(Tile::new(9).unwrap(), &ws);
        assert!(close(c.x, 0.3, 1e-12) && close(c.y, -0.2, 1e-12));

        assert_eq!(Tile::new(0), Err(GeometryError::BadTileIndex(0)));
        assert_eq!(Tile::new(10), Err(GeometryError::BadTileIndex(10)));
    }

    #[test]
    fn seat_positions() {
        let south = RoomConfig::new(1, rect(0.6, 0.4), -FRAC_PI_2).unwrap();
        let p = south.seat_position(0.1);
        assert!(close(p.x, 0.0, 1e-12) && close(p.y, -0.5, 1e-12));
        let east = RoomConfig::new(2, rect(0.5, 0.35), 0.0).unwrap();
        let p = east.seat_position(0.1);
        assert!(close(p.x, 0.6, 1e-12) && close(p.y, 0.0, 1e-12));
        // Every seat lands south after localization.
        let q = localize_room(&east).apply(p);
        assert!(close(q.x, 0.0, 1e-12) && close(q.y, -0.6, 1e-12));
    }

    #[test]
    fn far_slot_faces_partner() {
        let a = RoomConfig::new(1, rect(0.6, 0.4), -FRAC_PI_2).unwrap();
        let b = RoomConfig::new(2, rect(0.5, 0.35), 0.0).unwrap();
        let ta = room_to_session(&a, SeatSlot::Near);
        let tb = room_to_session(&b, SeatSlot::Far);
        let seat_a = ta.apply(a.seat_position(0.1)).angle();
        let seat_b = tb.apply(b.seat_position(0.1)).angle();
        assert!(close(normalize_angle(seat_a - seat_b).abs(), PI, 1e-9));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_transform() -> impl Strategy<Value = RigidTransform2> {
            (-10.0..10.0f64, -5.0..5.0f64, -5.0..5.0f64)
                .prop_map(|(r, x, y)| RigidTransform2::new(r, Vec2::new(x, y)))
        }

        proptest! {
            #[test]
            fn inverse_round_trip(t in any_transform(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
                let p = Vec2::new(x, y);
                let q = t.apply(t.inverse().apply(p));
                prop_assert!(q.distance(p) <= 1e-9);
                let id = t.compose(&t.inverse());
                prop_assert!(id.rotation.abs() <= 1e-9);
                prop_assert!(id.translation.norm() <= 1e-9);
            }

            #[test]
            fn tile_center_round_trip(w in 0.05..2.0f64, d in 0.05..2.0f64) {
                let ws = SharedWorkspace::new(Rect::new(w, d).unwrap());
                for tile in Tile::all() {
                    prop_assert_eq!(tile_of(tile_center(tile, &ws), &ws), tile);
                }
            }

            #[test]
            fn clamp_idempotent(x in -3.0..3.0f64, y in -3.0..3.0f64, w in 0.05..2.0f64, d in 0.05..2.0f64) {
                let ws = SharedWorkspace::new(Rect::new(w, d).unwrap());
                let once = clamp_to_workspace(Vec2::new(x, y), &ws);
                prop_assert_eq!(clamp_to_workspace(once, &ws), once);
                if ws.bounds.contains(Vec2::new(x, y), 0.0) {
                    prop_assert_eq!(once, Vec2::new(x, y));
                }
            }
        }
    }
}
