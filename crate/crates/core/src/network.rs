//! Finite network instances: relay placement, source/target placement and
//! one outgoing long-range contact (LRC) per node.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_domain, Domain, Point};
use crate::scalar::Real;

/// Rejection attempts before an LRC draw falls back to enumerating candidates.
const LRC_REJECTION_ATTEMPTS: usize = 64;

/// How a message holder picks among qualifying local contacts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    Uniform,
    MaxProgress,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig<T> {
    /// Domain side `R`.
    pub side: T,
    /// Communication range `r`.
    pub range: T,
    /// Slack `δ` of the forwarding rule: local hops must advance at least `r - δ`.
    pub delta: T,
    /// Number of relay nodes `n`.
    pub relays: usize,
    pub lrc_enabled: bool,
    pub tie_break: TieBreak,
    pub seed: u64,
}

impl<T: Real> NetworkConfig<T> {
    /// A validated config with `δ = 0.1·r`, LRCs on and uniform tie-breaking.
    pub fn new(side: T, range: T, relays: usize, seed: u64) -> Result<Self> {
        let cfg = NetworkConfig {
            side,
            range,
            delta: range * T::lit(0.1),
            relays,
            lrc_enabled: true,
            tie_break: TieBreak::Uniform,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (side, r, delta) = (self.side, self.range, self.delta);
        if !(side.is_finite() && side > T::zero()) {
            return Err(Error::param("R", format!("domain side must be finite and > 0, got {side}")));
        }
        if !(r.is_finite() && r > T::zero() && r < side / T::lit(2.0)) {
            return Err(Error::param("r", format!("need 0 < r < R/2, got r = {r}, R = {side}")));
        }
        if !(delta.is_finite() && delta > T::zero() && delta < r) {
            return Err(Error::param("delta", format!("need 0 < delta < r, got delta = {delta}, r = {r}")));
        }
        if self.relays == 0 {
            return Err(Error::param("n", "need at least one relay node"));
        }
        if self.relays > u32::MAX as usize {
            return Err(Error::param("n", "relay count exceeds the index width"));
        }
        Ok(())
    }

    pub fn domain(&self) -> Domain<T> {
        Domain::new(self.side).expect("validated side")
    }

    /// `R/2 - r`, the largest admissible source-target separation.
    pub fn max_separation(&self) -> T {
        self.side / T::lit(2.0) - self.range
    }

    /// Checks `0 <= d <= R/2 - r`, i.e. `B(X_t, d + r) ⊆ D` for a centred target.
    pub fn check_separation(&self, d: T) -> Result<()> {
        let max = self.max_separation();
        if d >= T::zero() && d <= max {
            Ok(())
        } else {
            Err(Error::EdgeEffect { d: d.as_f64(), max: max.as_f64() })
        }
    }
}

/// A node of the network. Relay indices are zero-based positions in
/// [`NetworkInstance::relays`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRef {
    Source,
    Relay(usize),
    Target,
}

/// Uniform grid over `[0, R]²` bucketing relay indices, in CSR layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid<T> {
    cell: T,
    cols: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<T: Real> SpatialGrid<T> {
    pub fn build(points: &[Point<T>], side: T, cell: T) -> Self {
        let cols = ((side / cell).ceil().to_usize().unwrap_or(1)).max(1);
        let cell_of = |p: &Point<T>| {
            let cx = Self::axis(p.x, cell, cols);
            let cy = Self::axis(p.y, cell, cols);
            cy * cols + cx
        };
        let mut counts = vec![0u32; cols * cols + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        SpatialGrid { cell, cols, starts, items }
    }

    fn axis(v: T, cell: T, cols: usize) -> usize {
        let i = (v / cell).floor().to_isize().unwrap_or(0);
        i.clamp(0, cols as isize - 1) as usize
    }

    /// Calls `f(i)` for every point index with `|points[i] - center| < radius`,
    /// in increasing index order within each cell. Requires `radius <= cell`.
    pub fn for_each_within(&self, points: &[Point<T>], center: &Point<T>, radius: T, mut f: impl FnMut(usize)) {
        debug_assert!(radius <= self.cell);
        let radius_sq = radius * radius;
        let cx = Self::axis(center.x, self.cell, self.cols);
        let cy = Self::axis(center.y, self.cell, self.cols);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.cols - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                let c = y * self.cols + x;
                for &i in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                    let i = i as usize;
                    if points[i].dist_sq(center) < radius_sq {
                        f(i);
                    }
                }
            }
        }
    }
}

/// A placed network: relays, source, target and the outgoing LRC of each node.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkInstance<T> {
    config: NetworkConfig<T>,
    relays: Vec<Point<T>>,
    source: Point<T>,
    target: Point<T>,
    source_lrc: Option<usize>,
    relay_lrc: Vec<Option<usize>>,
    grid: SpatialGrid<T>,
}

/// Places the target at the centre of the square, the source at distance `d` in a
/// uniformly random direction, and `n` relays i.i.d. uniform on the square.
/// No long-range contacts are assigned yet; see [`assign_lrcs`].
pub fn place_nodes<T: Real, R: Rng + ?Sized>(
    config: &NetworkConfig<T>,
    d: T,
    rng: &mut R,
) -> Result<NetworkInstance<T>> {
    config.validate()?;
    config.check_separation(d)?;
    let dom = config.domain();
    let relays: Vec<Point<T>> = (0..config.relays).map(|_| sample_uniform_domain(rng, &dom)).collect();
    let target = dom.center();
    let angle = rng.gen::<f64>() * std::f64::consts::TAU;
    let source = if d == T::zero() { target } else { target.offset_polar(d, T::lit(angle)) };
    NetworkInstance::from_parts(*config, relays, source, target)
}

/// Draws the outgoing LRC of every node except the target, uniformly among relays
/// outside the node's local ball and distinct from it. A node with no such relay
/// gets none. Leaves the instance untouched when LRCs are disabled.
pub fn assign_lrcs<T: Real, R: Rng + ?Sized>(mut instance: NetworkInstance<T>, rng: &mut R) -> NetworkInstance<T> {
    if !instance.config.lrc_enabled {
        return instance;
    }
    let r = instance.config.range;
    instance.source_lrc = draw_lrc(&instance.relays, &instance.source, None, r, rng);
    let lrcs: Vec<Option<usize>> =
        (0..instance.relays.len()).map(|i| draw_lrc(&instance.relays, &instance.relays[i], Some(i), r, rng)).collect();
    instance.relay_lrc = lrcs;
    instance
}

/// Uniform draw from `{ j : j != me, |relays[j] - at| >= r }`.
///
/// Rejection from all relays is uniform on the candidate set whenever it accepts;
/// after too many rejections the candidate set is enumerated and sampled directly,
/// which is uniform as well.
pub(crate) fn draw_lrc<T: Real, R: Rng + ?Sized>(
    relays: &[Point<T>],
    at: &Point<T>,
    me: Option<usize>,
    r: T,
    rng: &mut R,
) -> Option<usize> {
    let r_sq = r * r;
    let eligible = |j: usize| Some(j) != me && relays[j].dist_sq(at) >= r_sq;
    for _ in 0..LRC_REJECTION_ATTEMPTS {
        let j = rng.gen_range(0..relays.len());
        if eligible(j) {
            return Some(j);
        }
    }
    let candidates: Vec<usize> = (0..relays.len()).filter(|&j| eligible(j)).collect();
    candidates.choose(rng).copied()
}

impl<T: Real> NetworkInstance<T> {
    /// Assembles an instance from explicit positions, without LRCs.
    pub fn from_parts(
        config: NetworkConfig<T>,
        relays: Vec<Point<T>>,
        source: Point<T>,
        target: Point<T>,
    ) -> Result<Self> {
        config.validate()?;
        if relays.len() != config.relays {
            return Err(Error::param(
                "relays",
                format!("expected {} relay positions, got {}", config.relays, relays.len()),
            ));
        }
        let dom = config.domain();
        let outside = relays.iter().chain([&source, &target]).any(|p| !(p.is_finite() && dom.contains(p)));
        if outside {
            return Err(Error::param("points", "every node must lie inside the domain"));
        }
        let grid = SpatialGrid::build(&relays, config.side, config.range);
        let n = relays.len();
        Ok(NetworkInstance { config, relays, source, target, source_lrc: None, relay_lrc: vec![None; n], grid })
    }

    pub fn config(&self) -> &NetworkConfig<T> {
        &self.config
    }

    pub fn relays(&self) -> &[Point<T>] {
        &self.relays
    }

    pub fn source(&self) -> Point<T> {
        self.source
    }

    pub fn target(&self) -> Point<T> {
        self.target
    }

    pub fn position(&self, node: NodeRef) -> Point<T> {
        match node {
            NodeRef::Source => self.source,
            NodeRef::Relay(i) => self.relays[i],
            NodeRef::Target => self.target,
        }
    }

    /// The outgoing long-range contact of `node`, always a relay. The target has none.
    pub fn lrc(&self, node: NodeRef) -> Option<usize> {
        match node {
            NodeRef::Source => self.source_lrc,
            NodeRef::Relay(i) => self.relay_lrc[i],
            NodeRef::Target => None,
        }
    }

    /// Distance from `node` to the target.
    pub fn distance_to_target(&self, node: NodeRef) -> T {
        self.position(node).dist(&self.target)
    }

    /// Relay indices within distance `< r` of `node`, ascending, excluding `node` itself.
    pub fn local_relays(&self, node: NodeRef) -> Vec<usize> {
        let me = match node {
            NodeRef::Relay(i) => Some(i),
            _ => None,
        };
        let mut out = Vec::new();
        self.grid.for_each_within(&self.relays, &self.position(node), self.config.range, |i| {
            if Some(i) != me {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    pub(crate) fn for_each_local_relay(&self, node: NodeRef, f: impl FnMut(usize)) {
        self.grid.for_each_within(&self.relays, &self.position(node), self.config.range, f);
    }

    /// Serializable snapshot of the instance (the spatial index is rebuilt on load).
    pub fn to_dump(&self) -> InstanceDump<T> {
        let mut lrc = Vec::new();
        if let Some(j) = self.source_lrc {
            lrc.push(LrcEdge { from: NodeRef::Source, to: j });
        }
        lrc.extend(
            self.relay_lrc.iter().enumerate().filter_map(|(i, j)| j.map(|to| LrcEdge { from: NodeRef::Relay(i), to })),
        );
        InstanceDump { config: self.config, relays: self.relays.clone(), source: self.source, target: self.target, lrc }
    }

    pub fn from_dump(dump: InstanceDump<T>) -> Result<Self> {
        let mut inst = Self::from_parts(dump.config, dump.relays, dump.source, dump.target)?;
        for edge in dump.lrc {
            if edge.to >= inst.relays.len() {
                return Err(Error::param("lrc", format!("contact {} is not a relay", edge.to)));
            }
            match edge.from {
                NodeRef::Source => inst.source_lrc = Some(edge.to),
                NodeRef::Relay(i) if i < inst.relays.len() && i != edge.to => inst.relay_lrc[i] = Some(edge.to),
                other => return Err(Error::param("lrc", format!("invalid LRC owner {other:?}"))),
            }
        }
        Ok(inst)
    }
}

/// All nodes within distance `< r` of `node`, excluding itself: relays (ascending)
/// followed by the source and the target when they are in range.
pub fn local_contacts<T: Real>(instance: &NetworkInstance<T>, node: NodeRef) -> Vec<NodeRef> {
    let mut out: Vec<NodeRef> = instance.local_relays(node).into_iter().map(NodeRef::Relay).collect();
    let here = instance.position(node);
    let r = instance.config.range;
    for other in [NodeRef::Source, NodeRef::Target] {
        if other != node && instance.position(other).dist(&here) < r {
            out.push(other);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrcEdge {
    pub from: NodeRef,
    pub to: usize,
}

/// JSON-friendly form of a [`NetworkInstance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InstanceDump<T> {
    pub config: NetworkConfig<T>,
    pub relays: Vec<Point<T>>,
    pub source: Point<T>,
    pub target: Point<T>,
    pub lrc: Vec<LrcEdge>,
}
