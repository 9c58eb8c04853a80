//! Summary numbers pulled out of a finished trace.

use crate::record::Record;

use super::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    /// (measured travel, predicted bound) for every completed proxy move.
    pub travel_times: Vec<(f64, f64)>,
    /// Contact time minus proxy arrival, for contacts the proxy reached.
    pub lead_times: Vec<f64>,
    pub contacts: usize,
    pub mask_failures: usize,
    /// A pool proxy dropped one object for another.
    pub binding_switches: usize,
    pub grabs: usize,
    pub engaged_grabs: usize,
    /// (intended tile, final tile) for gesture runs with a target.
    pub gesture_outcome: Option<(u8, u8)>,
    pub violations: usize,
}

impl Metrics {
    pub fn gesture_ok(&self) -> Option<bool> {
        self.gesture_outcome.map(|(want, got)| want == got)
    }

    pub fn mean_lead(&self) -> Option<f64> {
        (!self.lead_times.is_empty()).then(|| self.lead_times.iter().sum::<f64>() / self.lead_times.len() as f64)
    }

    pub fn to_record(&self) -> Record {
        let mut r = Record::new()
            .text("ev", "summary")
            .int("moves", self.travel_times.len() as i64)
            .int("contacts", self.contacts as i64)
            .int("mask_failures", self.mask_failures as i64)
            .int("switches", self.binding_switches as i64)
            .int("grabs", self.grabs as i64)
            .int("engaged_grabs", self.engaged_grabs as i64)
            .int("violations", self.violations as i64);
        if let Some(worst) = self.travel_times.iter().map(|t| t.0 - t.1).reduce(f64::max) {
            r = r.num("worst_overrun", worst);
        }
        if let Some(lead) = self.mean_lead() {
            r = r.num("mean_lead", lead);
        }
        if let Some((want, got)) = self.gesture_outcome {
            r = r.int("intended", want.into()).int("tile", got.into()).flag("ok", want == got);
        }
        r
    }
}

pub fn compute_metrics(trace: &Trace) -> Metrics {
    let mut m = Metrics::default();
    for e in &trace.events {
        match e {
            TraceEvent::Arrive { travel, bound, .. } => m.travel_times.push((*travel, *bound)),
            TraceEvent::Contact {
                contact_at,
                arrival,
                mask,
                ..
            } => {
                m.contacts += 1;
                if !mask {
                    m.mask_failures += 1;
                }
                if let Some(a) = arrival {
                    m.lead_times.push(contact_at - a);
                }
            }
            TraceEvent::Bind { previous: Some(_), .. } => m.binding_switches += 1,
            TraceEvent::Grab { engaged, .. } => {
                m.grabs += 1;
                m.engaged_grabs += usize::from(*engaged);
            }
            TraceEvent::Outcome(r) => {
                if let (Ok(want), Ok(got)) = (r.get_int("intended"), r.get_int("tile")) {
                    m.gesture_outcome = Some((want as u8, got as u8));
                }
            }
            e if e.is_violation() => m.violations += 1,
            _ => {}
        }
    }
    m
}
