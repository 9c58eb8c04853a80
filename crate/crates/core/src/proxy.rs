//! Kinematic model of a tabletop differential-drive proxy and its
//! rotate-then-translate go-to-goal controller.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2, Vec2};

/// Simulation step used by the scenario loop.
pub const DEFAULT_DT: f64 = 0.02;

/// Per-phase settle allowance folded into [`travel_time_bound`].
pub const SETTLE_MARGIN: f64 = 0.1;

/// Proxies closer than this are flagged by the safety check.
pub const MIN_PROXY_SEPARATION: f64 = 0.06;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProxyError {
    #[error("command v={v} w={w} exceeds limits v_max={v_max} w_max={w_max}")]
    CommandOutOfLimits { v: f64, w: f64, v_max: f64, w_max: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimestep(f64),
    #[error("robot limit {0} must be strictly positive")]
    InvalidLimit(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotLimits {
    pub v_max: f64,
    pub w_max: f64,
    pub arrive_pos_tol: f64,
    pub arrive_heading_tol: f64,
    /// Forward speed per meter of remaining distance on the final approach.
    pub approach_gain: f64,
    /// Yaw rate per radian of bearing error while translating.
    pub heading_gain: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            w_max: 2.0 * PI,
            arrive_pos_tol: 0.01,
            arrive_heading_tol: 0.1,
            approach_gain: 10.0,
            heading_gain: 20.0,
        }
    }
}

impl RobotLimits {
    pub fn validate(&self) -> Result<(), ProxyError> {
        let fields = [
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("arrive_pos_tol", self.arrive_pos_tol),
            ("arrive_heading_tol", self.arrive_heading_tol),
            ("approach_gain", self.approach_gain),
            ("heading_gain", self.heading_gain),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(ProxyError::InvalidLimit(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobotStatus {
    Idle,
    Rotating,
    Translating,
    Arrived,
    /// Held by a user; actuation is frozen and the pose follows tracking.
    Carrying,
}

impl RobotStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotStatus::Idle => "idle",
            RobotStatus::Rotating => "rotating",
            RobotStatus::Translating => "translating",
            RobotStatus::Arrived => "arrived",
            RobotStatus::Carrying => "carrying",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "idle" => RobotStatus::Idle,
            "rotating" => RobotStatus::Rotating,
            "translating" => RobotStatus::Translating,
            "arrived" => RobotStatus::Arrived,
            "carrying" => RobotStatus::Carrying,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose2,
    pub status: RobotStatus,
}

impl RobotState {
    pub fn new(pose: Pose2) -> Self {
        Self {
            pose,
            status: RobotStatus::Idle,
        }
    }
}

/// Unicycle actuation: forward speed and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionCommand {
    pub v: f64,
    pub w: f64,
}

impl MotionCommand {
    pub const STOP: MotionCommand = MotionCommand { v: 0.0, w: 0.0 };

    pub fn within(&self, lim: &RobotLimits) -> bool {
        self.v.abs() <= lim.v_max && self.w.abs() <= lim.w_max
    }
}

/// Integrates one step: turn first, then drive along the new heading.
pub fn step_robot(
    s: &RobotState,
    c: MotionCommand,
    dt: f64,
    lim: &RobotLimits,
) -> Result<RobotState, ProxyError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ProxyError::InvalidTimestep(dt));
    }
    if !c.within(lim) {
        return Err(ProxyError::CommandOutOfLimits {
            v: c.v,
            w: c.w,
            v_max: lim.v_max,
            w_max: lim.w_max,
        });
    }
    if s.status == RobotStatus::Carrying {
        return Ok(*s);
    }
    let heading = normalize_angle(s.pose.heading + c.w * dt);
    let position = s.pose.position + Vec2::from_angle(heading) * (c.v * dt);
    Ok(RobotState {
        pose: Pose2 { position, heading },
        status: s.status,
    })
}

/// Rotate-then-translate go-to-goal law. Returns the command and the status
/// the robot should report for this tick.
pub fn drive_to(s: &RobotState, target: Vec2, lim: &RobotLimits) -> (MotionCommand, RobotStatus) {
    if s.status == RobotStatus::Carrying {
        return (MotionCommand::STOP, RobotStatus::Carrying);
    }
    let to_target = target - s.pose.position;
    let distance = to_target.norm();
    if distance <= lim.arrive_pos_tol {
        return (MotionCommand::STOP, RobotStatus::Arrived);
    }
    let error = normalize_angle(to_target.angle() - s.pose.heading);
    if error.abs() > lim.arrive_heading_tol {
        let w = lim.w_max.copysign(error);
        return (MotionCommand { v: 0.0, w }, RobotStatus::Rotating);
    }
    let v = lim.v_max.min(lim.approach_gain * distance);
    let w = (lim.heading_gain * error).clamp(-lim.w_max, lim.w_max);
    (MotionCommand { v, w }, RobotStatus::Translating)
}

/// Upper bound on the time `drive_to` needs to bring the robot to `target`:
/// a worst-case half turn, the straight run at full speed, and two settle
/// margins.
pub fn travel_time_bound(s: &RobotState, target: Vec2, lim: &RobotLimits) -> f64 {
    let distance = s.pose.position.distance(target);
    let settle = 2.0 * SETTLE_MARGIN;
    if distance <= lim.arrive_pos_tol {
        settle
    } else {
        PI / lim.w_max + distance / lim.v_max + settle
    }
}

/// Runs the controller until arrival and returns the elapsed time, or `None`
/// if the robot has not arrived after `max_time` seconds.
pub fn simulate_arrival(
    start: &RobotState,
    target: Vec2,
    lim: &RobotLimits,
    dt: f64,
    max_time: f64,
) -> Result<Option<f64>, ProxyError> {
    let mut s = *start;
    let max_steps = (max_time / dt).ceil() as u64;
    for step in 0..=max_steps {
        let (cmd, status) = drive_to(&s, target, lim);
        if status == RobotStatus::Arrived {
            return Ok(Some(step as f64 * dt));
        }
        s.status = status;
        s = step_robot(&s, cmd, dt, lim)?;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn at(x: f64, y: f64, h: f64) -> RobotState {
        RobotState::new(Pose2::new(Vec2::new(x, y), h))
    }

    #[test]
    fn null_command_is_identity() {
        let s = at(0.1, -0.2, 0.3);
        let lim = RobotLimits::default();
        assert_eq!(step_robot(&s, MotionCommand::STOP, 0.02, &lim).unwrap(), s);
    }

    #[test]
    fn straight_line_step() {
        let lim = RobotLimits::default();
        let s = step_robot(&at(0.0, 0.0, 0.0), MotionCommand { v: 0.4, w: 0.0 }, 0.1, &lim).unwrap();
        assert!((s.pose.position.x - 0.04).abs() < 1e-12);
        assert!(s.pose.position.y.abs() < 1e-12);
    }

    #[test]
    fn pure_rotation_step() {
        let lim = RobotLimits::default();
        let s = step_robot(&at(0.0, 0.0, 0.0), MotionCommand { v: 0.0, w: PI }, 0.5, &lim).unwrap();
        assert!((s.pose.heading - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(s.pose.position, Vec2::ZERO);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let lim = RobotLimits::default();
        let s = at(0.0, 0.0, 0.0);
        assert!(matches!(
            step_robot(&s, MotionCommand { v: 0.6, w: 0.0 }, 0.02, &lim),
            Err(ProxyError::CommandOutOfLimits { .. })
        ));
        assert!(matches!(
            step_robot(&s, MotionCommand { v: 0.0, w: 7.0 }, 0.02, &lim),
            Err(ProxyError::CommandOutOfLimits { .. })
        ));
        assert_eq!(
            step_robot(&s, MotionCommand::STOP, 0.0, &lim),
            Err(ProxyError::InvalidTimestep(0.0))
        );
    }

    #[test]
    fn carrying_freezes_actuation() {
        let lim = RobotLimits::default();
        let mut s = at(0.1, 0.1, 0.0);
        s.status = RobotStatus::Carrying;
        let next = step_robot(&s, MotionCommand { v: 0.5, w: 1.0 }, 0.02, &lim).unwrap();
        assert_eq!(next, s);
        assert_eq!(drive_to(&s, Vec2::new(0.3, 0.3), &lim), (MotionCommand::STOP, RobotStatus::Carrying));
    }

    #[test]
    fn drive_to_examples() {
        let lim = RobotLimits::default();
        let s = at(0.2, 0.1, 1.0);
        assert_eq!(drive_to(&s, Vec2::new(0.2, 0.1), &lim), (MotionCommand::STOP, RobotStatus::Arrived));

        let (cmd, status) = drive_to(&at(0.0, 0.0, 0.0), Vec2::new(0.0, 0.5), &lim);
        assert_eq!(status, RobotStatus::Rotating);
        assert_eq!(cmd, MotionCommand { v: 0.0, w: lim.w_max });

        let (cmd, _) = drive_to(&at(0.0, 0.0, 0.0), Vec2::new(0.0, -0.5), &lim);
        assert_eq!(cmd.w, -lim.w_max);
    }

    #[test]
    fn proportional_slowdown() {
        // With the original gain of 2.0 the slowdown reads min(0.4, 2.0 * 0.1).
        let slow = RobotLimits {
            v_max: 0.4,
            approach_gain: 2.0,
            ..RobotLimits::default()
        };
        let (cmd, status) = drive_to(&at(0.0, 0.0, 0.0), Vec2::new(0.1, 0.0), &slow);
        assert_eq!(status, RobotStatus::Translating);
        assert!((cmd.v - 0.2).abs() < 1e-12);
        assert_eq!(cmd.w, 0.0);

        let default_gain = RobotLimits {
            v_max: 0.4,
            ..RobotLimits::default()
        };
        let (cmd, _) = drive_to(&at(0.0, 0.0, 0.0), Vec2::new(0.1, 0.0), &default_gain);
        assert!((cmd.v - 0.4).abs() < 1e-12);
        let (cmd, _) = drive_to(&at(0.0, 0.0, 0.0), Vec2::new(0.02, 0.0), &default_gain);
        assert!((cmd.v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bound_examples() {
        let lim = RobotLimits::default();
        let s = at(0.1, 0.1, 0.0);
        assert!((travel_time_bound(&s, Vec2::new(0.1, 0.1), &lim) - 0.2).abs() < 1e-12);

        let lim = RobotLimits {
            v_max: 0.4,
            w_max: PI,
            ..RobotLimits::default()
        };
        let b = travel_time_bound(&at(0.0, 0.0, 0.0), Vec2::new(0.6, 0.0), &lim);
        assert!((b - 2.7).abs() < 1e-12);
    }

    #[test]
    fn invalid_limits() {
        let lim = RobotLimits {
            w_max: 0.0,
            ..RobotLimits::default()
        };
        assert_eq!(lim.validate(), Err(ProxyError::InvalidLimit("w_max")));
        assert!(RobotLimits::default().validate().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn start_and_target() -> impl Strategy<Value = (RobotState, Vec2)> {
            (
                -0.35..0.35f64,
                -0.4..0.4f64,
                -PI..PI,
                -0.35..0.35f64,
                -0.4..0.4f64,
            )
                .prop_map(|(x, y, h, tx, ty)| (at(x, y, h), Vec2::new(tx, ty)))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(512))]

            #[test]
            fn arrives_within_bound((s, target) in start_and_target()) {
                let lim = RobotLimits::default();
                let bound = travel_time_bound(&s, target, &lim);
                let t = simulate_arrival(&s, target, &lim, DEFAULT_DT, 10.0).unwrap();
                prop_assert!(t.is_some(), "never arrived");
                prop_assert!(t.unwrap() <= bound + 1e-9, "arrival {} > bound {}", t.unwrap(), bound);
            }

            #[test]
            fn commands_respect_limits_and_hold_after_arrival((s, target) in start_and_target()) {
                let lim = RobotLimits::default();
                let mut s = s;
                let mut arrived_at = None;
                for step in 0..400 {
                    let (cmd, status) = drive_to(&s, target, &lim);
                    prop_assert!(cmd.within(&lim));
                    if status == RobotStatus::Arrived && arrived_at.is_none() {
                        arrived_at = Some(step);
                    }
                    if arrived_at.is_some() {
                        prop_assert!(s.pose.position.distance(target) <= lim.arrive_pos_tol);
                    }
                    s.status = status;
                    s = step_robot(&s, cmd, DEFAULT_DT, &lim).unwrap();
                }
                prop_assert!(arrived_at.is_some());
            }

            #[test]
            fn trajectories_are_deterministic((s, target) in start_and_target()) {
                let lim = RobotLimits::default();
                let run = |mut s: RobotState| {
                    let mut out = Vec::new();
                    for _ in 0..100 {
                        let (cmd, status) = drive_to(&s, target, &lim);
                        s.status = status;
                        s = step_robot(&s, cmd, DEFAULT_DT, &lim).unwrap();
                        out.push((s.pose.position.x.to_bits(), s.pose.position.y.to_bits(), s.pose.heading.to_bits()));
                    }
                    out
                };
                prop_assert_eq!(run(s), run(s));
            }
        }
    }
}
