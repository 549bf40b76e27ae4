//! Events, physical vector clocks, the skew-induced happened-before
//! relation, frontiers of consistent cuts, and the lattice operations on
//! satisfying cuts.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::{AgentId, SignTrace, SkewBound, Ticks};

/// How a discrete event arose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    LeftRoot,
    RightRoot,
    /// Created by an abstractor at `t + eps` from a remote right root at `t`.
    OffsetFromRightRoot,
    /// Created by a slicer to complete another agent's event.
    SlicerCreated,
    /// Horizon marker; used only for readiness, never carries a signal value.
    Horizon,
}

/// Identity of a discrete event: the owning agent, its local time, and how
/// it arose. `(agent, t)` is unique within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventId {
    pub agent: AgentId,
    pub t: Ticks,
    pub kind: EventKind,
}

/// Physical vector clock timestamp: one local time per agent, with the
/// owner's position holding the event's own local time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pvc {
    pub owner: AgentId,
    pub stamp: Vec<Ticks>,
}

impl Pvc {
    /// Strict partial order on timestamps: componentwise `<=` and not equal.
    pub fn precedes(&self, other: &Pvc) -> bool {
        self.stamp != other.stamp && self.stamp.iter().zip(&other.stamp).all(|(a, b)| a <= b)
    }
}

/// The constructive timestamp assignment: the owner's component is `t`; all
/// other components are `t - eps`, or zero while `t < eps`.
pub fn pvc_assign(agent: AgentId, t: Ticks, n_agents: usize, eps: SkewBound) -> Pvc {
    let other = if t < eps.ticks() {
        Ticks::ZERO
    } else {
        t - eps.ticks()
    };
    let mut stamp = vec![other; n_agents];
    stamp[agent] = t;
    Pvc {
        owner: agent,
        stamp,
    }
}

/// A discrete event together with its timestamp; the unit the abstractor
/// emits and the slicer consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: EventId,
    pub pvc: Pvc,
}

/// Happened-before test. Events on one agent are ordered by local time;
/// across agents the receiver's timestamp decides: `e -> f` iff
/// `f.pvc[e.agent] >= e.t`.
pub fn happened_before(e: &Event, f: &Event) -> bool {
    if e.id.agent == f.id.agent {
        e.id.t < f.id.t
    } else {
        f.pvc.stamp[e.id.agent] >= e.id.t
    }
}

/// One frontier component: the last event of an agent in a cut, with its
/// predicate truth at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub t: Ticks,
    pub kind: EventKind,
    pub truth: bool,
}

/// The frontier of a consistent cut: exactly one event per agent, indexed
/// by agent id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub entries: Vec<FrontierEntry>,
}

impl Frontier {
    pub fn from_times(times: &[Ticks]) -> Frontier {
        Frontier {
            entries: times
                .iter()
                .map(|&t| FrontierEntry {
                    t,
                    kind: EventKind::SlicerCreated,
                    truth: true,
                })
                .collect(),
        }
    }

    pub fn times(&self) -> Vec<Ticks> {
        self.entries.iter().map(|e| e.t).collect()
    }

    /// Consistency: the frontier is a possible global state iff its local
    /// times span at most the skew bound.
    pub fn is_consistent(&self, eps: SkewBound) -> bool {
        let max = self.entries.iter().map(|e| e.t).max().unwrap();
        let min = self.entries.iter().map(|e| e.t).min().unwrap();
        max - min <= eps.ticks()
    }

    /// Predicate satisfaction: the conjunction of `sign_at` over all agents.
    pub fn satisfies(&self, signs: &[SignTrace]) -> Result<bool> {
        for (agent, entry) in self.entries.iter().enumerate() {
            if !signs[agent].sign_at(entry.t)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Lattice join: componentwise-latest entries.
    pub fn join(&self, other: &Frontier) -> Frontier {
        Frontier {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| if b.t > a.t { *b } else { *a })
                .collect(),
        }
    }

    /// Lattice meet: componentwise-earliest entries.
    pub fn meet(&self, other: &Frontier) -> Frontier {
        Frontier {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| if b.t < a.t { *b } else { *a })
                .collect(),
        }
    }
}

/// A maximal interval of satisfying cuts, represented by its extremal
/// frontiers. Every consistent frontier componentwise between the two is a
/// satisfying cut; `rightmost_satisfying` is false when a discontinuous
/// right end makes the rightmost frontier itself non-satisfying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatcutInterval {
    pub leftmost: Vec<Ticks>,
    pub rightmost: Vec<Ticks>,
    pub rightmost_satisfying: bool,
}
