//! Time-shifted rendering of a pose stream.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2};

/// Display delay used when rooms are remote from each other, in seconds.
pub const DEFAULT_DELAY: f64 = 1.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("query time {query:.6} precedes the buffered history (oldest {oldest:.6})")]
    Underflow { query: f64, oldest: f64 },
    #[error("delay buffer is empty")]
    Empty,
    #[error("delay must be finite and nonnegative, got {0}")]
    BadDelay(f64),
}

#[derive(Debug, Clone)]
pub struct DelayBuffer {
    delay: f64,
    horizon: f64,
    samples: VecDeque<(f64, Pose2)>,
}

impl DelayBuffer {
    pub fn new(delay: f64) -> Result<Self, DelayError> {
        if !delay.is_finite() || delay < 0.0 {
            return Err(DelayError::BadDelay(delay));
        }
        Ok(DelayBuffer {
            delay,
            horizon: (2.0 * delay).max(1.0),
            samples: VecDeque::new(),
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Inserts a sample in time order; a sample at an existing time
    /// replaces it.
    pub fn push(&mut self, t: f64, pose: Pose2) {
        let idx = self.samples.partition_point(|(s, _)| *s < t);
        match self.samples.get_mut(idx) {
            Some(slot) if slot.0 == t => slot.1 = pose,
            _ => self.samples.insert(idx, (t, pose)),
        }
        let newest = self.samples.back().map_or(t, |s| s.0);
        // Keep one sample at or before the horizon so interpolation still
        // has a left neighbour.
        while self.samples.len() > 1 && self.samples[1].0 <= newest - self.horizon {
            self.samples.pop_front();
        }
    }

    pub fn latest(&self) -> Option<(f64, Pose2)> {
        self.samples.back().copied()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Pose as it was `delay` seconds before `t`.
    pub fn delayed_view(&self, t: f64) -> Result<Pose2, DelayError> {
        let q = t - self.delay;
        let &(first_t, first) = self.samples.front().ok_or(DelayError::Empty)?;
        if q < first_t - EPS {
            return Err(DelayError::Underflow {
                query: q,
                oldest: first_t,
            });
        }
        if q <= first_t {
            return Ok(first);
        }
        let idx = self.samples.partition_point(|(s, _)| *s <= q);
        if idx == self.samples.len() {
            return Ok(self.samples[idx - 1].1);
        }
        let (t0, p0) = self.samples[idx - 1];
        let (t1, p1) = self.samples[idx];
        let a = (q - t0) / (t1 - t0);
        Ok(Pose2::new(
            p0.position.lerp(p1.position, a),
            p0.heading + normalize_angle(p1.heading - p0.heading) * a,
        ))
    }
}

/// The proxy was in place no later than the user saw the contact.
pub fn mask_check(robot_arrival: f64, rendered_contact: f64) -> bool {
    robot_arrival <= rendered_contact
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_delay_is_latest() {
        let mut b = DelayBuffer::new(0.0).unwrap();
        b.push(0.0, Pose2::at(0.0, 0.0));
        b.push(0.5, Pose2::at(0.2, 0.1));
        assert_eq!(b.delayed_view(0.5).unwrap(), Pose2::at(0.2, 0.1));
        assert_eq!(b.delayed_view(3.0).unwrap(), Pose2::at(0.2, 0.1));
    }

    #[test]
    fn interpolates_at_shifted_time() {
        let mut b = DelayBuffer::new(1.0).unwrap();
        b.push(0.0, Pose2::at(0.0, 0.0));
        b.push(0.5, Pose2::at(0.1, 0.0));
        let p = b.delayed_view(1.2).unwrap();
        assert!((p.position.x - 0.04).abs() < 1e-12);
    }

    #[test]
    fn underflow_and_empty() {
        let mut b = DelayBuffer::new(1.0).unwrap();
        assert_eq!(b.delayed_view(5.0), Err(DelayError::Empty));
        b.push(2.0, Pose2::at(0.0, 0.0));
        assert!(matches!(b.delayed_view(2.5), Err(DelayError::Underflow { .. })));
        assert!(b.delayed_view(3.0).is_ok());
        assert!(DelayBuffer::new(-1.0).is_err());
    }

    #[test]
    fn heading_takes_short_way() {
        let mut b = DelayBuffer::new(0.0).unwrap();
        b.push(0.0, Pose2::new(Vec2::ZERO, PI - 0.1));
        b.push(1.0, Pose2::new(Vec2::ZERO, -PI + 0.1));
        let h = b.delayed_view(0.5).unwrap().heading;
        assert!((h.abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn out_of_order_inserts_are_sorted() {
        let mut b = DelayBuffer::new(0.5).unwrap();
        b.push(0.2, Pose2::at(0.2, 0.0));
        b.push(0.0, Pose2::at(0.0, 0.0));
        b.push(0.1, Pose2::at(0.1, 0.0));
        let p = b.delayed_view(0.65).unwrap();
        assert!((p.position.x - 0.15).abs() < 1e-12);
    }

    #[test]
    fn old_samples_are_trimmed() {
        let mut b = DelayBuffer::new(1.0).unwrap();
        for k in 0..1000 {
            b.push(k as f64 * 0.02, Pose2::at(k as f64, 0.0));
        }
        assert!(b.len() <= 102);
        assert!(b.delayed_view(19.98 + 1.0 - 2.0).is_ok());
    }

    #[test]
    fn mask_examples() {
        assert!(mask_check(1.3, 1.4));
        assert!(mask_check(1.4, 1.4));
        assert!(!mask_check(1.5, 0.3));
    }

    proptest! {
        #[test]
        fn constant_stream(x in -0.4..0.4f64, y in -0.4..0.4f64, h in -3.0..3.0f64, d in 0.0..2.0f64, q in 0.0..10.0f64) {
            let pose = Pose2::new(Vec2::new(x, y), h);
            let mut b = DelayBuffer::new(d).unwrap();
            for k in 0..=500 {
                b.push(k as f64 * 0.02, pose);
            }
            let got = b.delayed_view(q + 10.0).unwrap();
            prop_assert!(got.position.distance(pose.position) < 1e-12);
            prop_assert!((got.heading - pose.heading).abs() < 1e-12);
        }
    }
}
