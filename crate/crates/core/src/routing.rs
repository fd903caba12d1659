//! δ-greedy geographic forwarding.
//!
//! A holder at distance `D ∈ [kr, (k+1)r)` from the target, `k >= 1`, forwards to a
//! local contact inside `B(X_t, kr)` that advances at least `r - δ`. Its long-range
//! contact wins whenever it advances strictly further than that local choice. When
//! `D < r` the target itself is in range and receives the message directly.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{annulus_index, Point};
use crate::network::{NetworkInstance, NodeRef, TieBreak};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopKind {
    Local,
    LongRange,
    DirectToTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hop<T> {
    pub from: NodeRef,
    pub to: NodeRef,
    pub kind: HopKind,
    /// Decrease in distance to the target.
    pub progress: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Delivered,
    NoCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingOutcome<T> {
    pub hops: Vec<Hop<T>>,
    pub status: Status,
}

impl<T> RoutingOutcome<T> {
    /// Delivery time `τ_n`; `None` stands for `τ_n = ∞`.
    pub fn tau(&self) -> Option<usize> {
        match self.status {
            Status::Delivered => Some(self.hops.len()),
            Status::NoCandidate => None,
        }
    }

    pub fn is_delivered(&self) -> bool {
        self.status == Status::Delivered
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NextHop<T> {
    Hop(Hop<T>),
    NoCandidate,
}

/// One forwarding decision for the message currently held by `current`.
pub fn next_hop<T: Real, R: Rng + ?Sized>(
    instance: &NetworkInstance<T>,
    current: NodeRef,
    rng: &mut R,
) -> Result<NextHop<T>> {
    if current == NodeRef::Target {
        return Err(Error::param("current", "the target never forwards"));
    }
    let cfg = instance.config();
    let (r, delta) = (cfg.range, cfg.delta);
    let target = instance.target();
    let here = instance.distance_to_target(current);

    if here < r {
        return Ok(NextHop::Hop(Hop {
            from: current,
            to: NodeRef::Target,
            kind: HopKind::DirectToTarget,
            progress: here,
        }));
    }

    let k = annulus_index(here, r)?;
    let inner = T::lit(k as f64) * r;
    let min_progress = r - delta;
    let relays = instance.relays();
    let progress_of = |j: usize| here - relays[j].dist(&target);

    // Qualifying locals: in B(X_t, kr) and advancing at least r - δ. The source is
    // never among them since every candidate is strictly closer than the holder.
    let mut candidates: Vec<(usize, T)> = Vec::new();
    instance.for_each_local_relay(current, |j| {
        if NodeRef::Relay(j) == current {
            return;
        }
        let to_target = relays[j].dist(&target);
        let progress = here - to_target;
        if to_target < inner && progress >= min_progress {
            candidates.push((j, progress));
        }
    });
    candidates.sort_unstable_by_key(|c| c.0);

    let local = match cfg.tie_break {
        TieBreak::Uniform => candidates.choose(rng).copied(),
        TieBreak::MaxProgress => candidates.iter().copied().fold(None, |best: Option<(usize, T)>, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        }),
    };

    let long_range = instance.lrc(current).map(|j| (j, progress_of(j)));
    let lrc_hop = |(j, progress): (usize, T)| {
        NextHop::Hop(Hop { from: current, to: NodeRef::Relay(j), kind: HopKind::LongRange, progress })
    };

    Ok(match (local, long_range) {
        (Some((_, local_progress)), Some(lrc)) if lrc.1 > local_progress => lrc_hop(lrc),
        (Some((j, progress)), _) => {
            NextHop::Hop(Hop { from: current, to: NodeRef::Relay(j), kind: HopKind::Local, progress })
        }
        // Stalled holder: the LRC is used when it advances as much as a local hop must.
        (None, Some(lrc)) if lrc.1 >= min_progress => lrc_hop(lrc),
        (None, _) => NextHop::NoCandidate,
    })
}

/// Forwards from the source until the target is reached or no hop qualifies.
///
/// Errors with [`Error::Invariant`] if more than `n + 1` hops are taken, which the
/// strictly decreasing distance to the target rules out.
pub fn route<T: Real, R: Rng + ?Sized>(instance: &NetworkInstance<T>, rng: &mut R) -> Result<RoutingOutcome<T>> {
    let cap = instance.relays().len() + 1;
    let mut hops = Vec::new();
    if instance.source() == instance.target() {
        return Ok(RoutingOutcome { hops, status: Status::Delivered });
    }
    let mut current = NodeRef::Source;
    loop {
        if hops.len() >= cap {
            return Err(Error::Invariant(format!("trajectory exceeded the hop cap n + 1 = {cap}")));
        }
        match next_hop(instance, current, rng)? {
            NextHop::NoCandidate => return Ok(RoutingOutcome { hops, status: Status::NoCandidate }),
            NextHop::Hop(hop) => {
                hops.push(hop);
                if hop.to == NodeRef::Target {
                    return Ok(RoutingOutcome { hops, status: Status::Delivered });
                }
                current = hop.to;
            }
        }
    }
}

/// `⌊d / (r - δ)⌋ + 1`: no delivered trajectory is longer.
pub fn hop_bound<T: Real>(d: T, range: T, delta: T) -> usize {
    (d / (range - delta)).floor().to_usize().unwrap_or(usize::MAX).saturating_add(1)
}

/// A broken trajectory property. Each one is a bug in the forwarding rule.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotApproaching { hop: usize },
    RepeatedNode { node: NodeRef },
    ShortLocalHop { hop: usize, progress: f64 },
    LeftInnerBall { hop: usize },
    Disconnected { hop: usize },
    ExceedsHopBound { tau: usize, bound: usize },
    NotDelivered,
}

/// Checks a trajectory against the forwarding rule's guarantees: distance to the
/// target strictly decreases, no node repeats, local hops advance `>= r - δ` and
/// land one band in, hops chain, and delivered runs respect [`hop_bound`].
// `!(a < b)` on purpose: a NaN distance must count as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_trajectory<T: Real>(instance: &NetworkInstance<T>, outcome: &RoutingOutcome<T>) -> Vec<Violation> {
    let cfg = instance.config();
    let (r, delta) = (cfg.range, cfg.delta);
    let target: Point<T> = instance.target();
    let mut out = Vec::new();
    let mut seen = vec![NodeRef::Source];
    let mut at = NodeRef::Source;
    for (i, hop) in outcome.hops.iter().enumerate() {
        if hop.from != at {
            out.push(Violation::Disconnected { hop: i });
        }
        let before = instance.position(hop.from).dist(&target);
        let after = instance.position(hop.to).dist(&target);
        if !(after < before) {
            out.push(Violation::NotApproaching { hop: i });
        }
        if seen.contains(&hop.to) {
            out.push(Violation::RepeatedNode { node: hop.to });
        }
        seen.push(hop.to);
        if hop.kind == HopKind::Local {
            if before - after < r - delta {
                out.push(Violation::ShortLocalHop { hop: i, progress: (before - after).as_f64() });
            }
            let k = (before / r).floor();
            if !(after < k * r) {
                out.push(Violation::LeftInnerBall { hop: i });
            }
        }
        at = hop.to;
    }
    if let Some(tau) = outcome.tau() {
        if tau > 0 && at != NodeRef::Target {
            out.push(Violation::NotDelivered);
        }
        let d = instance.source().dist(&target);
        let bound = hop_bound(d, r, delta);
        if tau > bound {
            out.push(Violation::ExceedsHopBound { tau, bound });
        }
    }
    out
}
