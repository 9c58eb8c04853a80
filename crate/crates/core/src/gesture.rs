//! Palm aiming, dwell lock, and push/pull/slide recognition.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{tile_center, tile_of, SharedWorkspace, Tile, Vec2};
use crate::mapping::ObjectId;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GestureError {
    #[error("user and object coincide; no motion axis")]
    DegenerateAxis,
    #[error("gesture parameter {0} must be positive")]
    InvalidConfig(&'static str),
    #[error("wrist samples must advance in time ({prev} then {next})")]
    NonMonotonic { prev: f64, next: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WristSample {
    pub time: f64,
    pub position: Vec2,
    /// Unit vector the palm faces, projected onto the table.
    pub palm_dir: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GestureConfig {
    pub aim_half_angle: f64,
    pub dwell_target: f64,
    pub v_thresh: f64,
    pub window: f64,
    pub reach: f64,
}

impl Default for GestureConfig {
    fn default() -> Self {
        GestureConfig {
            aim_half_angle: 0.26,
            dwell_target: 0.5,
            v_thresh: 0.3,
            window: 0.3,
            reach: 0.15,
        }
    }
}

impl GestureConfig {
    pub fn validate(&self) -> Result<(), GestureError> {
        for (name, v) in [
            ("aim_half_angle", self.aim_half_angle),
            ("dwell_target", self.dwell_target),
            ("v_thresh", self.v_thresh),
            ("window", self.window),
            ("reach", self.reach),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GestureError::InvalidConfig(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GestureState {
    Idle,
    Targeting { object: ObjectId, dwell: f64 },
    Locked { object: ObjectId },
    Grabbing { object: ObjectId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GestureCommand {
    Push,
    Pull,
    Slide { direction: Vec2 },
    Grab,
    Release,
}

impl GestureCommand {
    pub fn name(&self) -> &'static str {
        match self {
            GestureCommand::Push => "push",
            GestureCommand::Pull => "pull",
            GestureCommand::Slide { .. } => "slide",
            GestureCommand::Grab => "grab",
            GestureCommand::Release => "release",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GestureEvent {
    Shake(ObjectId),
    Glow(ObjectId),
    Command {
        object: ObjectId,
        command: GestureCommand,
        destination: Vec2,
    },
    Grab(ObjectId),
    Release(ObjectId),
}

/// Is `object` inside the palm's aiming cone?
pub fn is_aimed(sample: &WristSample, object: Vec2, cfg: &GestureConfig) -> bool {
    let to = object - sample.position;
    if to.norm() < EPS {
        return true;
    }
    let angle = sample.palm_dir.cross(to).atan2(sample.palm_dir.dot(to));
    angle.abs() <= cfg.aim_half_angle + EPS
}

fn nearest_aimed<'a>(
    sample: &WristSample,
    objects: &'a [(ObjectId, Vec2)],
    cfg: &GestureConfig,
) -> Option<&'a ObjectId> {
    objects
        .iter()
        .filter(|(_, p)| is_aimed(sample, *p, cfg))
        .min_by(|a, b| {
            let da = sample.position.distance(a.1);
            let db = sample.position.distance(b.1);
            da.total_cmp(&db).then_with(|| a.0.cmp(&b.0))
        })
        .map(|(id, _)| id)
}

/// One targeting step for a single user.
pub fn update_targeting(
    state: &GestureState,
    sample: &WristSample,
    objects: &[(ObjectId, Vec2)],
    cfg: &GestureConfig,
    dt: f64,
) -> (GestureState, Vec<GestureEvent>) {
    let aimed_at = |id: &ObjectId| {
        objects
            .iter()
            .any(|(o, p)| o == id && is_aimed(sample, *p, cfg))
    };
    let start = |id: &ObjectId| {
        (
            GestureState::Targeting {
                object: id.clone(),
                dwell: 0.0,
            },
            vec![GestureEvent::Shake(id.clone())],
        )
    };
    match state {
        GestureState::Idle => match nearest_aimed(sample, objects, cfg) {
            Some(id) => start(id),
            None => (GestureState::Idle, Vec::new()),
        },
        GestureState::Targeting { object, dwell } => {
            if aimed_at(object) {
                let dwell = dwell + dt;
                if dwell >= cfg.dwell_target - EPS {
                    (
                        GestureState::Locked { object: object.clone() },
                        vec![GestureEvent::Glow(object.clone())],
                    )
                } else {
                    (
                        GestureState::Targeting {
                            object: object.clone(),
                            dwell,
                        },
                        Vec::new(),
                    )
                }
            } else {
                match nearest_aimed(sample, objects, cfg) {
                    Some(id) => start(id),
                    None => (GestureState::Idle, Vec::new()),
                }
            }
        }
        GestureState::Locked { object } => match nearest_aimed(sample, objects, cfg) {
            Some(id) if id != object && !aimed_at(object) => start(id),
            _ => (state.clone(), Vec::new()),
        },
        GestureState::Grabbing { .. } => (state.clone(), Vec::new()),
    }
}

/// Recognises a push, pull, or slide from the mean wrist velocity over the
/// window.
pub fn classify_motion(
    window: &[WristSample],
    user_pos: Vec2,
    object_pos: Vec2,
    cfg: &GestureConfig,
) -> Result<Option<GestureCommand>, GestureError> {
    let axis = (object_pos - user_pos)
        .normalized()
        .filter(|_| object_pos.distance(user_pos) >= 1e-6)
        .ok_or(GestureError::DegenerateAxis)?;
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return Ok(None);
    };
    let span = last.time - first.time;
    if span <= 0.0 {
        return Ok(None);
    }
    let v = (last.position - first.position) * (1.0 / span);
    let radial = v.dot(axis);
    let lateral = v - axis * radial;
    Ok(if radial > cfg.v_thresh {
        Some(GestureCommand::Push)
    } else if radial < -cfg.v_thresh {
        Some(GestureCommand::Pull)
    } else if lateral.norm() > cfg.v_thresh {
        lateral.normalized().map(|direction| GestureCommand::Slide { direction })
    } else {
        None
    })
}

/// Parameter interval where the line `origin + s·dir` lies inside `ws`.
fn ray_span(origin: Vec2, dir: Vec2, ws: &SharedWorkspace) -> Option<(f64, f64)> {
    let (hw, hd) = (ws.bounds.half_width, ws.bounds.half_depth);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, d, h) in [(origin.x, dir.x, hw), (origin.y, dir.y, hd)] {
        if d.abs() < 1e-12 {
            if o.abs() > h {
                return None;
            }
        } else {
            let a = (-h - o) / d;
            let b = (h - o) / d;
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Destination tile center for a push, pull, or slide.
pub fn command_target(cmd: &GestureCommand, object_pos: Vec2, user_pos: Vec2, ws: &SharedWorkspace) -> Vec2 {
    let here = tile_of(object_pos, ws);
    let tile = match cmd {
        GestureCommand::Push | GestureCommand::Pull => {
            let dir = match (object_pos - user_pos).normalized() {
                Some(d) => d,
                None => return tile_center(here, ws),
            };
            match ray_span(user_pos, dir, ws) {
                Some((enter, exit)) => {
                    let s = match cmd {
                        GestureCommand::Push => exit - 1e-6,
                        _ => enter.max(0.0) + 1e-6,
                    };
                    tile_of(user_pos + dir * s, ws)
                }
                None => here,
            }
        }
        GestureCommand::Slide { direction } => {
            let (row, col) = (here.row() as i32, here.col() as i32);
            let (row, col) = if direction.x.abs() >= direction.y.abs() {
                (row, col + direction.x.signum() as i32)
            } else {
                // Row 0 is the far (+y) row.
                (row - direction.y.signum() as i32, col)
            };
            Tile::from_row_col(row.clamp(0, 2) as u8, col.clamp(0, 2) as u8)
        }
        GestureCommand::Grab | GestureCommand::Release => here,
    };
    tile_center(tile, ws)
}

pub fn grab_check(wrist: Vec2, object_pos: Vec2, cfg: &GestureConfig) -> bool {
    wrist.distance(object_pos) <= cfg.reach + EPS
}

/// Full per-user recognizer: targeting plus motion classification once an
/// object is locked.
#[derive(Debug, Clone)]
pub struct GestureMachine {
    cfg: GestureConfig,
    state: GestureState,
    window: VecDeque<WristSample>,
}

impl GestureMachine {
    pub fn new(cfg: GestureConfig) -> Result<Self, GestureError> {
        cfg.validate()?;
        Ok(GestureMachine {
            cfg,
            state: GestureState::Idle,
            window: VecDeque::new(),
        })
    }

    pub fn state(&self) -> &GestureState {
        &self.state
    }

    pub fn config(&self) -> &GestureConfig {
        &self.cfg
    }

    fn record(&mut self, sample: WristSample) -> Result<(), GestureError> {
        if let Some(prev) = self.window.back() {
            if sample.time <= prev.time {
                return Err(GestureError::NonMonotonic {
                    prev: prev.time,
                    next: sample.time,
                });
            }
        }
        self.window.push_back(sample);
        // Keep the newest sample at least `window` seconds old, drop the rest.
        while self.window.len() > 2 && sample.time - self.window[1].time >= self.cfg.window - EPS {
            self.window.pop_front();
        }
        Ok(())
    }

    fn window_full(&self) -> bool {
        match (self.window.front(), self.window.back()) {
            (Some(a), Some(b)) => b.time - a.time >= self.cfg.window - EPS,
            _ => false,
        }
    }

    /// Advances the machine by one wrist sample.
    pub fn step(
        &mut self,
        sample: WristSample,
        objects: &[(ObjectId, Vec2)],
        user_pos: Vec2,
        ws: &SharedWorkspace,
        dt: f64,
    ) -> Result<Vec<GestureEvent>, GestureError> {
        self.record(sample)?;
        let (next, mut events) = update_targeting(&self.state, &sample, objects, &self.cfg, dt);
        let locked_now = matches!(next, GestureState::Locked { .. })
            && !matches!(self.state, GestureState::Locked { .. });
        self.state = next;
        if locked_now {
            // Motion before the lock does not count.
            self.window.retain(|s| s.time >= sample.time);
        }
        if let GestureState::Locked { object } = &self.state {
            if self.window_full() {
                if let Some((_, pos)) = objects.iter().find(|(o, _)| o == object) {
                    let samples: Vec<WristSample> = self.window.iter().copied().collect();
                    if let Some(cmd) = classify_motion(&samples, user_pos, *pos, &self.cfg)? {
                        events.push(GestureEvent::Command {
                            object: object.clone(),
                            command: cmd,
                            destination: command_target(&cmd, *pos, user_pos, ws),
                        });
                        self.state = GestureState::Idle;
                        self.window.clear();
                    }
                }
            }
        }
        Ok(events)
    }

    /// Direct grab of a nearby object; `None` when out of reach.
    pub fn grab(&mut self, object: &ObjectId, wrist: Vec2, object_pos: Vec2) -> Option<GestureEvent> {
        if !grab_check(wrist, object_pos, &self.cfg) {
            return None;
        }
        self.state = GestureState::Grabbing { object: object.clone() };
        Some(GestureEvent::Grab(object.clone()))
    }

    pub fn release(&mut self) -> Option<GestureEvent> {
        match std::mem::replace(&mut self.state, GestureState::Idle) {
            GestureState::Grabbing { object } => Some(GestureEvent::Release(object)),
            other => {
                self.state = other;
                None
            }
        }
    }
}
