//! Object ↔ proxy bindings under the three mapping policies.
//!
//! * one-to-one: every bound object has its own proxy in the same place,
//! * many-to-one: one shared object is mirrored by one proxy per room,
//! * one-to-many: a small proxy pool is dispatched to whichever object is
//!   currently in demand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{room_to_session, Pose2, RoomConfig, SeatSlot, Vec2};
use crate::proxy::RobotState;

/// Largest pool the brute-force assignment oracle accepts.
pub const ORACLE_MAX_POOL: usize = 6;

/// Default hysteresis margin for one-to-many dispatch, in meters.
pub const DEFAULT_HYSTERESIS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("object {0} has no bound proxy")]
    UnboundObject(ObjectId),
    #[error("room {0} has no proxy for the shared object")]
    MissingRoomProxy(u8),
    #[error("one-to-many dispatch needs a nonempty proxy pool")]
    EmptyPool,
    #[error("oracle instance too large: {demands} demands, {pool} proxies (bound: demands <= pool <= {bound})")]
    OracleTooLarge { demands: usize, pool: usize, bound: usize },
    #[error("proxy {0} appears in more than one binding")]
    DuplicateProxy(ProxyId),
    #[error("proxy {0} is not declared")]
    UnknownProxy(ProxyId),
    #[error("room {room} has more than one proxy for shared object {object}")]
    ExtraRoomProxy { object: ObjectId, room: u8 },
    #[error("invalid proxy id {0:?} (expected p<number>)")]
    BadProxyId(String),
}

/// Name of a virtual object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        ObjectId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Robot identifier, written `p<n>`. Ordering is numeric, which is the
/// dispatch tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProxyId(pub u32);

impl fmt::Display for ProxyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl FromStr for ProxyId {
    type Err = MappingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('p')
            .and_then(|n| n.parse().ok())
            .map(ProxyId)
            .ok_or_else(|| MappingError::BadProxyId(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MappingPolicy {
    OneToOne {
        pairs: Vec<(ObjectId, ProxyId)>,
    },
    ManyToOne {
        object: ObjectId,
        proxies: BTreeMap<u8, ProxyId>,
    },
    OneToMany {
        objects: Vec<ObjectId>,
        pool: Vec<ProxyId>,
        hysteresis_margin: f64,
    },
}

impl MappingPolicy {
    fn proxies(&self) -> Vec<ProxyId> {
        match self {
            MappingPolicy::OneToOne { pairs } => pairs.iter().map(|(_, p)| *p).collect(),
            MappingPolicy::ManyToOne { proxies, .. } => proxies.values().copied().collect(),
            MappingPolicy::OneToMany { pool, .. } => pool.clone(),
        }
    }
}

/// Checks proxy exclusivity and the one-proxy-per-room rule.
pub fn validate_policies(
    policies: &[MappingPolicy],
    proxy_rooms: &BTreeMap<ProxyId, u8>,
    room_ids: &[u8],
) -> Result<(), MappingError> {
    let mut seen = BTreeSet::new();
    for policy in policies {
        for p in policy.proxies() {
            if !proxy_rooms.contains_key(&p) {
                return Err(MappingError::UnknownProxy(p));
            }
            if !seen.insert(p) {
                return Err(MappingError::DuplicateProxy(p));
            }
        }
        if let MappingPolicy::ManyToOne { object, proxies } = policy {
            for (room, p) in proxies {
                if proxy_rooms[p] != *room {
                    return Err(MappingError::ExtraRoomProxy {
                        object: object.clone(),
                        room: proxy_rooms[p],
                    });
                }
            }
            if let Some(missing) = room_ids.iter().find(|r| !proxies.contains_key(r)) {
                return Err(MappingError::MissingRoomProxy(*missing));
            }
        }
    }
    Ok(())
}

/// The proxy bound one-to-one to `object`.
pub fn one_to_one_proxy(policies: &[MappingPolicy], object: &ObjectId) -> Result<ProxyId, MappingError> {
    policies
        .iter()
        .find_map(|p| match p {
            MappingPolicy::OneToOne { pairs } => pairs.iter().find(|(o, _)| o == object).map(|(_, p)| *p),
            _ => None,
        })
        .ok_or_else(|| MappingError::UnboundObject(object.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BindingState {
    /// Proxy still travelling; the client shows a loading sprite.
    Pending,
    Engaged,
}

impl BindingState {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingState::Pending => "pending",
            BindingState::Engaged => "engaged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pending" => Some(BindingState::Pending),
            "engaged" => Some(BindingState::Engaged),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub object: ObjectId,
    pub proxy: ProxyId,
    pub room: u8,
    pub state: BindingState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandSource {
    HandProximity,
    GestureCommand,
    RemoteObject,
}

/// A place where some object needs physical backing, in the session frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPoint {
    pub object: ObjectId,
    pub position: Vec2,
    pub source: DemandSource,
}

/// A pool proxy as seen by the dispatcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolProxy {
    pub id: ProxyId,
    pub room: u8,
    pub position: Vec2,
}

/// Session pose of an object expressed as a target in the room's tracker
/// frame, clamped onto that room's table.
pub fn one_to_one_target(object: &Pose2, room: &RoomConfig, slot: SeatSlot) -> Vec2 {
    let local = room_to_session(room, slot).inverse().apply(object.position);
    room.table.clamp(local)
}

/// One target per room for a shared object.
pub fn many_to_one_targets(
    object: &Pose2,
    rooms: &[(RoomConfig, SeatSlot)],
    proxies: &BTreeMap<u8, ProxyId>,
) -> Result<Vec<(u8, ProxyId, Vec2)>, MappingError> {
    rooms
        .iter()
        .map(|(room, slot)| {
            let proxy = proxies
                .get(&room.room_id)
                .ok_or(MappingError::MissingRoomProxy(room.room_id))?;
            Ok((room.room_id, *proxy, one_to_one_target(object, room, *slot)))
        })
        .collect()
}

/// Closed arrival test: on the tolerance boundary counts as engaged.
pub fn binding_state(proxy: &RobotState, target: Vec2, tol: f64) -> BindingState {
    if proxy.pose.position.distance(target) <= tol {
        BindingState::Engaged
    } else {
        BindingState::Pending
    }
}

/// The object nearest to `hand`, keeping `current` unless another object is
/// nearer by more than `margin`.
pub fn nearest_object_with_hysteresis(
    hand: Vec2,
    objects: &[(ObjectId, Vec2)],
    current: Option<&ObjectId>,
    margin: f64,
) -> Option<ObjectId> {
    let (best, best_d) = objects
        .iter()
        .map(|(id, p)| (id, hand.distance(*p)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)))?;
    if let Some(cur) = current {
        if let Some((_, p)) = objects.iter().find(|(id, _)| id == cur) {
            if hand.distance(*p) - best_d <= margin {
                return Some(cur.clone());
            }
        }
    }
    Some(best.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub bindings: Vec<Binding>,
    /// Demands left without a proxy, in arrival order.
    pub queued: Vec<DemandPoint>,
}

impl Dispatch {
    /// Largest proxy → demand distance among the bindings.
    pub fn makespan(&self, demands: &[DemandPoint], pool: &[PoolProxy]) -> f64 {
        self.bindings
            .iter()
            .map(|b| {
                let d = demands.iter().find(|d| d.object == b.object).expect("bound demand");
                let p = pool.iter().find(|p| p.id == b.proxy).expect("bound proxy");
                d.position.distance(p.position)
            })
            .fold(0.0, f64::max)
    }
}

/// Can every demand in `demands` get a distinct proxy from `free` within
/// `threshold`? Kuhn's augmenting-path matching.
fn matchable(dist: &[Vec<f64>], demands: &[usize], free: &[usize], threshold: f64) -> bool {
    fn augment(
        i: usize,
        dist: &[Vec<f64>],
        free: &[usize],
        threshold: f64,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for (k, &j) in free.iter().enumerate() {
            if seen[k] || dist[i][j] > threshold {
                continue;
            }
            seen[k] = true;
            if owner[k].is_none_or(|o| augment(o, dist, free, threshold, seen, owner)) {
                owner[k] = Some(i);
                return true;
            }
        }
        false
    }
    if demands.len() > free.len() {
        return false;
    }
    let mut owner = vec![None; free.len()];
    demands.iter().all(|&i| {
        let mut seen = vec![false; free.len()];
        augment(i, dist, free, threshold, &mut seen, &mut owner)
    })
}

/// Serves demands from the proxy pool.
///
/// Demands are taken in order (extra ones are queued). The smallest
/// achievable makespan is found first; each demand then takes its nearest
/// free proxy among those that still allow that makespan, so a lone demand
/// simply gets the nearest proxy. A demand keeps its current proxy unless
/// some other admissible proxy is closer by more than `margin`.
pub fn dispatch_one_to_many(
    demands: &[DemandPoint],
    pool: &[PoolProxy],
    current: &[Binding],
    margin: f64,
) -> Result<Dispatch, MappingError> {
    if pool.is_empty() {
        return Err(MappingError::EmptyPool);
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by_key(|&j| pool[j].id);

    let served_n = demands.len().min(pool.len());
    let (served, rest) = demands.split_at(served_n);
    let dist: Vec<Vec<f64>> = served
        .iter()
        .map(|d| pool.iter().map(|p| d.position.distance(p.position)).collect())
        .collect();

    let all: Vec<usize> = (0..served_n).collect();
    let mut candidates: Vec<f64> = dist.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut threshold = if served_n == 0 {
        0.0
    } else {
        *candidates
            .iter()
            .find(|&&t| matchable(&dist, &all, &order, t))
            .expect("a complete matching always exists at the largest distance")
    };

    let mut free = order.clone();
    let mut bindings = Vec::with_capacity(served_n);
    for (i, demand) in served.iter().enumerate() {
        let remaining: Vec<usize> = (i + 1..served_n).collect();
        let admissible = |j: usize, t: f64, free: &[usize]| {
            let others: Vec<usize> = free.iter().copied().filter(|&k| k != j).collect();
            dist[i][j] <= t && matchable(&dist, &remaining, &others, t)
        };
        let nearest = free
            .iter()
            .copied()
            .filter(|&j| admissible(j, threshold, &free))
            .min_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(pool[a].id.cmp(&pool[b].id)))
            .expect("threshold admits a completion");

        let existing = current.iter().find(|b| b.object == demand.object);
        let kept = existing.and_then(|b| {
            let j = free.iter().copied().find(|&j| pool[j].id == b.proxy)?;
            let t = threshold.max(dist[i][j]);
            (j != nearest && dist[i][j] - dist[i][nearest] <= margin && admissible(j, t, &free))
                .then_some((j, t, b.state))
        });
        let (chosen, state) = match kept {
            Some((j, t, state)) => {
                threshold = t;
                (j, state)
            }
            None => {
                let state = existing
                    .filter(|b| b.proxy == pool[nearest].id)
                    .map_or(BindingState::Pending, |b| b.state);
                (nearest, state)
            }
        };
        free.retain(|&j| j != chosen);
        bindings.push(Binding {
            object: demand.object.clone(),
            proxy: pool[chosen].id,
            room: pool[chosen].room,
            state,
        });
    }
    Ok(Dispatch {
        bindings,
        queued: rest.to_vec(),
    })
}

/// Result of the exhaustive assignment search.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Proxy serving each demand, in demand order.
    pub proxies: Vec<ProxyId>,
    pub makespan: f64,
}

/// Exhaustive minimum-makespan assignment; ties go to the lexicographically
/// smallest proxy sequence.
pub fn optimal_assignment(demands: &[DemandPoint], pool: &[PoolProxy]) -> Result<Assignment, MappingError> {
    if pool.len() > ORACLE_MAX_POOL || demands.len() > pool.len() {
        return Err(MappingError::OracleTooLarge {
            demands: demands.len(),
            pool: pool.len(),
            bound: ORACLE_MAX_POOL,
        });
    }
    let mut sorted: Vec<&PoolProxy> = pool.iter().collect();
    sorted.sort_by_key(|p| p.id);

    fn search(
        demands: &[DemandPoint],
        pool: &[&PoolProxy],
        used: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        current_max: f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let i = chosen.len();
        if i == demands.len() {
            if best.as_ref().is_none_or(|(m, _)| current_max < *m) {
                *best = Some((current_max, chosen.clone()));
            }
            return;
        }
        for j in 0..pool.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            chosen.push(j);
            let d = demands[i].position.distance(pool[j].position);
            search(demands, pool, used, chosen, current_max.max(d), best);
            chosen.pop();
            used[j] = false;
        }
    }

    let mut best = None;
    search(demands, &sorted, &mut vec![false; sorted.len()], &mut Vec::new(), 0.0, &mut best);
    let (makespan, idx) = best.unwrap_or((0.0, Vec::new()));
    Ok(Assignment {
        proxies: idx.into_iter().map(|j| sorted[j].id).collect(),
        makespan,
    })
}
