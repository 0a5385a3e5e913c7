//! Gait planning for a MIM walking on two manipulator legs.
//!
//! The leg state is the pair of fixtures the left and rear legs are latched
//! to. One step releases one leg and latches it onto a fixture within reach
//! of the leg that stays put, so at least one leg is always anchored.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interconnect::{AssemblyGraph, Configuration, InterconnectError, ModuleAsset, PortRole};
use crate::scene::WarehouseScene;

pub const DEFAULT_REACH_M: f64 = 1.5;
const REACH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocomotionError {
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("no gait reaches fixture `{0}`")]
    NoPath(String),
    #[error("invalid start: {0}")]
    InvalidStart(String),
    #[error("illegal step: {0}")]
    IllegalStep(String),
    #[error("invalid fixture graph: {0}")]
    InvalidGraph(String),
    #[error(transparent)]
    Interconnect(#[from] InterconnectError),
}

type Result<T> = std::result::Result<T, LocomotionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    Left,
    Rear,
}

impl Leg {
    pub fn role(self) -> PortRole {
        match self {
            Leg::Left => PortRole::Left,
            Leg::Rear => PortRole::Rear,
        }
    }

    pub fn other(self) -> Leg {
        match self {
            Leg::Left => Leg::Rear,
            Leg::Rear => Leg::Left,
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::Left => "left",
            Leg::Rear => "rear",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureNode {
    pub id: String,
    pub position: [f64; 3],
    /// Held by equipment outside the walking assembly.
    #[serde(default)]
    pub occupied: bool,
}

impl FixtureNode {
    pub fn new(id: impl Into<String>, position: [f64; 3]) -> Self {
        Self {
            id: id.into(),
            position,
            occupied: false,
        }
    }

    fn distance(&self, other: &FixtureNode) -> f64 {
        let d: f64 = self
            .position
            .iter()
            .zip(&other.position)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitStep {
    pub leg: Leg,
    pub detach_from: String,
    pub attach_to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitPlan {
    pub steps: Vec<GaitStep>,
    /// Starting fixtures of the (left, rear) legs.
    pub start: (String, String),
    pub goal: String,
}

impl GaitPlan {
    /// One line per step: `step <n>: <leg> <from> -> <to>`, numbered from 1.
    pub fn to_lines(&self) -> Vec<String> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                format!(
                    "step {}: {} {} -> {}",
                    i + 1,
                    s.leg,
                    s.detach_from,
                    s.attach_to
                )
            })
            .collect()
    }
}

/// Fixture points with the reach of a free leg. Nodes are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureGraph {
    nodes: Vec<FixtureNode>,
    reach_m: f64,
    index: BTreeMap<String, usize>,
}

/// Search state: fixture indices of the left and rear legs, and the leg that moved last.
type LegState = (usize, usize, Option<Leg>);

/// Ordering key for a partial plan: step count, same-leg repeats, then the
/// step sequence itself as (attach index, detach index, leg).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PlanKey {
    steps: usize,
    repeats: usize,
    moves: Vec<(usize, usize, Leg)>,
}

impl FixtureGraph {
    pub fn new(mut nodes: Vec<FixtureNode>, reach_m: f64) -> Result<Self> {
        if !(reach_m > 0.0 && reach_m.is_finite()) {
            return Err(LocomotionError::InvalidGraph(
                "reach must be positive".into(),
            ));
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.position.iter().any(|c| !c.is_finite()) {
                return Err(LocomotionError::InvalidGraph(format!(
                    "fixture `{}` has a non-finite position",
                    n.id
                )));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(LocomotionError::InvalidGraph(format!(
                    "duplicate fixture `{}`",
                    n.id
                )));
            }
        }
        Ok(Self {
            nodes,
            reach_m,
            index,
        })
    }

    /// Fixture graph of a scene. A fixture is an obstacle when its occupant
    /// is not one of the assembly's own ports.
    pub fn from_scene(
        scene: &WarehouseScene,
        reach_m: f64,
        assembly: Option<&AssemblyGraph>,
    ) -> Result<Self> {
        let nodes = scene
            .fixtures()
            .iter()
            .map(|f| FixtureNode {
                id: f.id.clone(),
                position: f.pose.position,
                occupied: f
                    .occupant
                    .as_deref()
                    .is_some_and(|port| assembly.is_none_or(|a| a.port(port).is_none())),
            })
            .collect();
        Self::new(nodes, reach_m)
    }

    pub fn nodes(&self) -> &[FixtureNode] {
        &self.nodes
    }

    pub fn reach_m(&self) -> f64 {
        self.reach_m
    }

    fn idx(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| LocomotionError::UnknownFixture(id.to_string()))
    }

    pub fn node(&self, id: &str) -> Result<&FixtureNode> {
        Ok(&self.nodes[self.idx(id)?])
    }

    pub fn within_reach(&self, a: &str, b: &str) -> Result<bool> {
        Ok(self.in_reach(self.idx(a)?, self.idx(b)?))
    }

    fn in_reach(&self, a: usize, b: usize) -> bool {
        self.nodes[a].distance(&self.nodes[b]) <= self.reach_m + REACH_EPS
    }

    /// Fixtures a free leg can latch onto while the other leg holds `anchored`.
    pub fn reachable_fixtures(&self, anchored: &str) -> Result<BTreeSet<String>> {
        let a = self.idx(anchored)?;
        Ok(self
            .reachable_from(a)
            .map(|i| self.nodes[i].id.clone())
            .collect())
    }

    fn reachable_from(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len())
            .filter(move |&i| i != a && !self.nodes[i].occupied && self.in_reach(a, i))
    }

    /// Minimum-step gait from `(left, rear)` until either leg stands on `goal`.
    ///
    /// Among plans of equal length, fewer consecutive moves of the same leg
    /// win; remaining ties go to the lexicographically smallest step
    /// sequence by fixture id.
    pub fn plan_walk(&self, start: (&str, &str), goal: &str) -> Result<GaitPlan> {
        let left = self.idx(start.0)?;
        let rear = self.idx(start.1)?;
        let goal_idx = self.idx(goal)?;
        if left == rear {
            return Err(LocomotionError::InvalidStart(
                "legs must stand on distinct fixtures".into(),
            ));
        }
        if !self.in_reach(left, rear) {
            return Err(LocomotionError::InvalidStart(format!(
                "`{}` and `{}` are farther apart than the reach",
                start.0, start.1
            )));
        }

        let mut best: BTreeMap<LegState, PlanKey> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        let origin = (left, rear, None);
        let empty = PlanKey {
            steps: 0,
            repeats: 0,
            moves: Vec::new(),
        };
        best.insert(origin, empty.clone());
        heap.push(Reverse((empty, origin)));

        while let Some(Reverse((key, state))) = heap.pop() {
            if best.get(&state) != Some(&key) {
                continue;
            }
            let (l, r, last) = state;
            if l == goal_idx || r == goal_idx {
                return Ok(self.materialize(start, goal, &key));
            }
            for leg in [Leg::Left, Leg::Rear] {
                let (moving, staying) = match leg {
                    Leg::Left => (l, r),
                    Leg::Rear => (r, l),
                };
                for target in self.reachable_from(staying) {
                    if target == moving {
                        continue;
                    }
                    let next_state = match leg {
                        Leg::Left => (target, r, Some(leg)),
                        Leg::Rear => (l, target, Some(leg)),
                    };
                    let mut moves = key.moves.clone();
                    moves.push((target, moving, leg));
                    let next_key = PlanKey {
                        steps: key.steps + 1,
                        repeats: key.repeats + usize::from(last == Some(leg)),
                        moves,
                    };
                    if best.get(&next_state).is_none_or(|k| next_key < *k) {
                        best.insert(next_state, next_key.clone());
                        heap.push(Reverse((next_key, next_state)));
                    }
                }
            }
        }
        Err(LocomotionError::NoPath(goal.to_string()))
    }

    fn materialize(&self, start: (&str, &str), goal: &str, key: &PlanKey) -> GaitPlan {
        GaitPlan {
            steps: key
                .moves
                .iter()
                .map(|&(to, from, leg)| GaitStep {
                    leg,
                    detach_from: self.nodes[from].id.clone(),
                    attach_to: self.nodes[to].id.clone(),
                })
                .collect(),
            start: (start.0.to_string(), start.1.to_string()),
            goal: goal.to_string(),
        }
    }
}

pub fn reachable_fixtures(graph: &FixtureGraph, anchored: &str) -> Result<BTreeSet<String>> {
    graph.reachable_fixtures(anchored)
}

pub fn plan_walk(graph: &FixtureGraph, start: (&str, &str), goal: &str) -> Result<GaitPlan> {
    graph.plan_walk(start, goal)
}

fn the_mim(assembly: &AssemblyGraph) -> Result<&ModuleAsset> {
    assembly
        .mims()
        .next()
        .ok_or_else(|| LocomotionError::IllegalStep("assembly has no MIM".into()))
}

/// Fixture the given leg is currently anchored on, if any.
pub fn leg_fixture(assembly: &AssemblyGraph, leg: Leg) -> Option<String> {
    let mim = assembly.mims().next()?;
    let distal = assembly.distal_port(mim, leg.role())?;
    assembly.anchor_of(&distal.id).map(|a| a.fixture.clone())
}

/// Carry out one gait step on the assembly: release the moving leg, latch it
/// on the target fixture and bring the new link to full coupling.
pub fn execute_step(
    assembly: &AssemblyGraph,
    graph: &FixtureGraph,
    step: &GaitStep,
) -> Result<AssemblyGraph> {
    match assembly.validate_configuration() {
        Ok(Configuration::Walking) => {}
        Ok(other) => {
            return Err(LocomotionError::IllegalStep(format!(
                "assembly is in {other:?} configuration"
            )))
        }
        Err(e) => return Err(e.into()),
    }
    if step.detach_from == step.attach_to {
        return Err(LocomotionError::IllegalStep("step does not move".into()));
    }
    let target = graph.node(&step.attach_to)?;
    if target.occupied || assembly.is_fixture_taken(&step.attach_to) {
        return Err(LocomotionError::IllegalStep(format!(
            "fixture `{}` is occupied",
            step.attach_to
        )));
    }
    let mim = the_mim(assembly)?;
    let distal = assembly
        .distal_port(mim, step.leg.role())
        .ok_or_else(|| LocomotionError::IllegalStep(format!("no {} leg attached", step.leg)))?
        .id
        .clone();
    match assembly.anchor_of(&distal) {
        Some(a) if a.fixture == step.detach_from => {}
        _ => {
            return Err(LocomotionError::IllegalStep(format!(
                "{} leg is not on `{}`",
                step.leg, step.detach_from
            )))
        }
    }

    let released = assembly.decouple(&distal)?;
    if let Some(hold) = leg_fixture(&released, step.leg.other()) {
        if !graph.within_reach(&hold, &step.attach_to)? {
            return Err(LocomotionError::IllegalStep(format!(
                "`{}` is out of reach from `{hold}`",
                step.attach_to
            )));
        }
    }
    Ok(released.anchor_full(&distal, &step.attach_to)?)
}
