//! Continuous-time signal model: fixed-point timestamps, drifting local
//! clocks with a bounded pairwise skew, piecewise-linear traces, predicate
//! normalization, and reduction of a trace to its signed intervals.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tick resolution: one microsecond.
pub const DEFAULT_TICK_HZ: i64 = 1_000_000;

/// Agents are indexed `0..n_agents`.
pub type AgentId = usize;

/// Exact fixed-point time in integer ticks.
///
/// All protocol arithmetic happens in ticks so that equality tests such as
/// "an event exists at exactly `t - eps`" are exact. Negative values appear
/// only as intermediate arithmetic; event times are always non-negative.
#[derive(
    Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Ticks(pub i64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    pub fn from_secs(secs: f64, tick_hz: i64) -> Ticks {
        Ticks((secs * tick_hz as f64).round() as i64)
    }

    pub fn as_secs(self, tick_hz: i64) -> f64 {
        self.0 as f64 / tick_hz as f64
    }

    pub fn max(self, other: Ticks) -> Ticks {
        Ticks(self.0.max(other.0))
    }

    pub fn min(self, other: Ticks) -> Ticks {
        Ticks(self.0.min(other.0))
    }
}

impl Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The maximum pairwise clock skew, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewBound(Ticks);

impl SkewBound {
    pub fn new(epsilon: Ticks) -> Result<SkewBound> {
        if epsilon.0 <= 0 {
            return Err(Error::Config(format!(
                "skew bound must be strictly positive, got {} ticks",
                epsilon.0
            )));
        }
        Ok(SkewBound(epsilon))
    }

    pub fn from_secs(secs: f64, tick_hz: i64) -> Result<SkewBound> {
        SkewBound::new(Ticks::from_secs(secs, tick_hz))
    }

    pub fn ticks(self) -> Ticks {
        self.0
    }

    /// Largest per-agent clock offset magnitude that keeps every pairwise
    /// clock difference strictly below the bound.
    pub fn offset_cap(self) -> i64 {
        (self.0 .0 - 1) / 2
    }
}

/// One segment of a piecewise-constant clock offset schedule: from global
/// time `from` onward the local clock reads `global + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockSegment {
    pub from: Ticks,
    pub offset: i64,
}

/// A drifting local clock: `c(chi) = chi + offset(chi)` with a
/// piecewise-constant offset schedule.
///
/// Offsets are bounded by `SkewBound::offset_cap` so any two clocks stay
/// strictly within the skew bound of each other, and must be nondecreasing
/// along the schedule so the clock itself is strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalClock {
    pub agent: AgentId,
    segments: Vec<ClockSegment>,
}

impl LocalClock {
    pub fn new(agent: AgentId, segments: Vec<ClockSegment>, skew: SkewBound) -> Result<LocalClock> {
        if segments.is_empty() || segments[0].from != Ticks::ZERO {
            return Err(Error::Config(
                "clock schedule must start at global time 0".into(),
            ));
        }
        let cap = skew.offset_cap();
        let mut prev: Option<ClockSegment> = None;
        for seg in &segments {
            if seg.offset.abs() > cap {
                return Err(Error::Config(format!(
                    "clock offset {} exceeds cap {} for skew bound",
                    seg.offset, cap
                )));
            }
            if let Some(p) = prev {
                if seg.from <= p.from {
                    return Err(Error::Config("clock schedule times must increase".into()));
                }
                if seg.offset < p.offset {
                    return Err(Error::Config(
                        "clock offsets must be nondecreasing to keep the clock increasing".into(),
                    ));
                }
            }
            prev = Some(*seg);
        }
        Ok(LocalClock { agent, segments })
    }

    pub fn identity(agent: AgentId) -> LocalClock {
        LocalClock {
            agent,
            segments: vec![ClockSegment {
                from: Ticks::ZERO,
                offset: 0,
            }],
        }
    }

    pub fn constant(agent: AgentId, offset: i64, skew: SkewBound) -> Result<LocalClock> {
        LocalClock::new(
            agent,
            vec![ClockSegment {
                from: Ticks::ZERO,
                offset,
            }],
            skew,
        )
    }

    /// Local clock reading at a global instant.
    pub fn local_time(&self, global: Ticks) -> Ticks {
        debug_assert!(global.0 >= 0);
        let idx = self
            .segments
            .partition_point(|seg| seg.from <= global)
            .saturating_sub(1);
        Ticks(global.0 + self.segments[idx].offset)
    }

    /// Earliest global instant at which the local clock reads at least
    /// `local`.
    pub fn global_time_reaching(&self, local: Ticks) -> Ticks {
        for (i, seg) in self.segments.iter().enumerate() {
            let seg_end = self
                .segments
                .get(i + 1)
                .map(|s| Ticks(s.from.0 - 1))
                .unwrap_or(Ticks(i64::MAX));
            let candidate = Ticks((local.0 - seg.offset).max(seg.from.0).max(0));
            if candidate <= seg_end && self.local_time(candidate) >= local {
                return candidate;
            }
        }
        unreachable!("clock is unbounded above");
    }
}

/// Comparison direction of a predicate atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomOp {
    Ge,
    Le,
}

/// One conjunct of the global predicate: `x_agent >= threshold` or
/// `x_agent <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredicateAtom {
    pub agent: AgentId,
    pub op: AtomOp,
    pub threshold: f64,
}

impl PredicateAtom {
    pub fn ge(agent: AgentId, threshold: f64) -> PredicateAtom {
        PredicateAtom {
            agent,
            op: AtomOp::Ge,
            threshold,
        }
    }

    pub fn le(agent: AgentId, threshold: f64) -> PredicateAtom {
        PredicateAtom {
            agent,
            op: AtomOp::Le,
            threshold,
        }
    }
}

/// One sample of a piecewise-linear trace. A sample flagged `jump` takes its
/// value right-continuously; the trace holds the previous sample's value up
/// to (but excluding) the jump time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: Ticks,
    pub value: f64,
    #[serde(default)]
    pub jump: bool,
}

/// An agent's signal sampled piecewise-linearly against its local clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLTrace {
    pub agent: AgentId,
    samples: Vec<TraceSample>,
}

impl PLTrace {
    pub fn new(agent: AgentId, samples: Vec<TraceSample>) -> Result<PLTrace> {
        if samples.is_empty() {
            return Err(Error::MalformedTrace {
                agent,
                detail: "trace has no samples".into(),
            });
        }
        if samples[0].t != Ticks::ZERO {
            return Err(Error::MalformedTrace {
                agent,
                detail: format!("trace must start at time 0, got {}", samples[0].t),
            });
        }
        for w in samples.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::MalformedTrace {
                    agent,
                    detail: format!("sample times not strictly increasing at {}", w[1].t),
                });
            }
        }
        for s in &samples {
            if !s.value.is_finite() {
                return Err(Error::MalformedTrace {
                    agent,
                    detail: format!("non-finite value at {}", s.t),
                });
            }
        }
        Ok(PLTrace { agent, samples })
    }

    pub fn from_points(agent: AgentId, points: &[(Ticks, f64)]) -> Result<PLTrace> {
        PLTrace::new(
            agent,
            points
                .iter()
                .map(|&(t, value)| TraceSample {
                    t,
                    value,
                    jump: false,
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn horizon(&self) -> Ticks {
        self.samples.last().unwrap().t
    }

    /// Signal value at a local time within the trace domain.
    pub fn value_at(&self, t: Ticks) -> Result<f64> {
        let horizon = self.horizon();
        if t < Ticks::ZERO || t > horizon {
            return Err(Error::OutOfRange {
                agent: self.agent,
                t: t.0,
                horizon: horizon.0,
            });
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        if idx == self.samples.len() {
            return Ok(self.samples.last().unwrap().value);
        }
        let hi = self.samples[idx];
        let lo = self.samples[idx - 1];
        if t == lo.t {
            return Ok(lo.value);
        }
        if hi.jump {
            // Held at the previous value until the jump instant.
            return Ok(lo.value);
        }
        let frac = (t.0 - lo.t.0) as f64 / (hi.t.0 - lo.t.0) as f64;
        Ok(lo.value + frac * (hi.value - lo.value))
    }
}

/// Normalizes a trace against a predicate atom so the conjunct becomes
/// `y(t) >= 0`. Sample times are unchanged.
pub fn normalize(trace: &PLTrace, atom: &PredicateAtom) -> Result<PLTrace> {
    if atom.agent != trace.agent {
        return Err(Error::Config(format!(
            "predicate atom for agent {} applied to trace of agent {}",
            atom.agent, trace.agent
        )));
    }
    let samples = trace
        .samples
        .iter()
        .map(|s| TraceSample {
            t: s.t,
            value: match atom.op {
                AtomOp::Ge => s.value - atom.threshold,
                AtomOp::Le => atom.threshold - s.value,
            },
            jump: s.jump,
        })
        .collect();
    PLTrace::new(trace.agent, samples)
}

/// How an interval endpoint arose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointTag {
    LeftRoot,
    RightRoot,
    HorizonBoundary,
}

/// A maximal interval on which the normalized signal is non-negative.
///
/// `right_open` marks a discontinuous right end: the signal jumps to a
/// negative value at `end`, so `end` itself does not satisfy the predicate
/// even though it is the interval's right root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignInterval {
    pub start: Ticks,
    pub end: Ticks,
    pub start_tag: EndpointTag,
    pub end_tag: EndpointTag,
    pub right_open: bool,
}

/// Which role a root event plays in its interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    Left,
    Right,
    /// Degenerate interval: a single instant that is both a left and a
    /// right root (the signal touches zero from below).
    Both,
}

/// An agent's signal reduced to its non-negative intervals with tagged
/// endpoints, up to a bounded horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTrace {
    pub agent: AgentId,
    pub horizon: Ticks,
    pub intervals: Vec<SignInterval>,
}

impl SignTrace {
    /// True iff `t` lies in some non-negative interval. Closed at tagged
    /// roots except discontinuous right ends.
    pub fn sign_at(&self, t: Ticks) -> Result<bool> {
        if t < Ticks::ZERO || t > self.horizon {
            return Err(Error::OutOfRange {
                agent: self.agent,
                t: t.0,
                horizon: self.horizon.0,
            });
        }
        Ok(self.contains(t))
    }

    /// Like `sign_at` but false (instead of an error) outside the horizon.
    /// Protocol code uses this so events placed past the horizon can never
    /// contribute to a satisfying cut.
    pub fn truth_at(&self, t: Ticks) -> bool {
        t >= Ticks::ZERO && t <= self.horizon && self.contains(t)
    }

    fn contains(&self, t: Ticks) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.start <= t);
        if idx == 0 {
            return false;
        }
        let iv = self.intervals[idx - 1];
        if iv.right_open {
            t < iv.end
        } else {
            t <= iv.end
        }
    }

    /// Index of the interval containing `t`, if any. Satisfying frontier
    /// components always lie in exactly one interval.
    pub fn interval_index(&self, t: Ticks) -> Option<usize> {
        let idx = self.intervals.partition_point(|iv| iv.start <= t);
        if idx == 0 {
            return None;
        }
        let iv = self.intervals[idx - 1];
        let inside = if iv.right_open {
            t < iv.end
        } else {
            t <= iv.end
        };
        inside.then_some(idx - 1)
    }

    /// Root events in local-time order, horizon boundaries excluded.
    pub fn roots(&self) -> Vec<(Ticks, RootKind)> {
        let mut out = Vec::new();
        for iv in &self.intervals {
            let left = iv.start_tag == EndpointTag::LeftRoot;
            let right = iv.end_tag == EndpointTag::RightRoot;
            if left && right && iv.start == iv.end {
                out.push((iv.start, RootKind::Both));
                continue;
            }
            if left {
                out.push((iv.start, RootKind::Left));
            }
            if right {
                out.push((iv.end, RootKind::Right));
            }
        }
        out
    }

    pub fn right_root_count(&self) -> usize {
        self.roots()
            .iter()
            .filter(|(_, k)| matches!(k, RootKind::Right | RootKind::Both))
            .count()
    }
}

#[derive(Clone, Copy)]
enum Piece {
    // Linear from (t0,v0) to (t1,v1), including both endpoints.
    Linear(Ticks, f64, Ticks, f64),
    // Held at v0 on [t0, t1), then jumps to v1 at t1.
    Jump(Ticks, f64, Ticks, f64),
}

/// Reduces a trace to its maximal non-negative intervals.
///
/// A zero crossing interior to a linear segment is placed by interpolation
/// and rounded to the nearest tick, clamped so the sign at the segment's own
/// sample points is preserved.
pub fn extract_roots(trace: &PLTrace) -> Result<SignTrace> {
    let samples = trace.samples();
    let horizon = trace.horizon();

    let mut pieces = Vec::with_capacity(samples.len().saturating_sub(1));
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.jump {
            pieces.push(Piece::Jump(a.t, a.value, b.t, b.value));
        } else {
            pieces.push(Piece::Linear(a.t, a.value, b.t, b.value));
        }
    }

    let mut intervals: Vec<SignInterval> = Vec::new();
    // Open run of non-negativity: (start tick, start tag).
    let mut run: Option<(Ticks, EndpointTag)> = None;

    let first = samples[0];
    if first.value >= 0.0 {
        run = Some((Ticks::ZERO, EndpointTag::HorizonBoundary));
    }

    let close = |intervals: &mut Vec<SignInterval>,
                 run: &mut Option<(Ticks, EndpointTag)>,
                 end: Ticks,
                 end_tag: EndpointTag,
                 right_open: bool| {
        let (start, start_tag) = run.take().expect("closing a run that is not open");
        if right_open && start == end {
            // Zero-length open interval: nothing is non-negative.
            return;
        }
        intervals.push(SignInterval {
            start,
            end,
            start_tag,
            end_tag,
            right_open,
        });
    };

    for piece in pieces {
        match piece {
            Piece::Linear(t0, v0, t1, v1) => {
                let neg0 = v0 < 0.0;
                let neg1 = v1 < 0.0;
                match (neg0, neg1) {
                    (false, false) | (true, true) => {}
                    (true, false) => {
                        // Up-crossing: the run starts here.
                        let c = if v1 == 0.0 {
                            t1
                        } else {
                            cross_tick(t0, v0, t1, v1, true)
                        };
                        debug_assert!(run.is_none());
                        run = Some((c, EndpointTag::LeftRoot));
                    }
                    (false, true) => {
                        let c = if v0 == 0.0 {
                            t0
                        } else {
                            cross_tick(t0, v0, t1, v1, false)
                        };
                        close(&mut intervals, &mut run, c, EndpointTag::RightRoot, false);
                    }
                }
            }
            Piece::Jump(_t0, v0, t1, v1) => {
                let neg_held = v0 < 0.0;
                let neg_after = v1 < 0.0;
                match (neg_held, neg_after) {
                    (false, false) | (true, true) => {}
                    (true, false) => {
                        debug_assert!(run.is_none());
                        run = Some((t1, EndpointTag::LeftRoot));
                    }
                    (false, true) => {
                        // Discontinuous sign change: root at t1, value there
                        // already negative.
                        close(&mut intervals, &mut run, t1, EndpointTag::RightRoot, true);
                    }
                }
            }
        }
    }

    if run.is_some() {
        close(
            &mut intervals,
            &mut run,
            horizon,
            EndpointTag::HorizonBoundary,
            false,
        );
    }

    // Tick rounding can make adjacent intervals touch; contiguity of
    // non-negativity at tick resolution means they are one interval.
    let mut merged: Vec<SignInterval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match merged.last_mut() {
            Some(prev) if !prev.right_open && iv.start <= prev.end => {
                prev.end = iv.end;
                prev.end_tag = iv.end_tag;
                prev.right_open = iv.right_open;
            }
            _ => merged.push(iv),
        }
    }

    Ok(SignTrace {
        agent: trace.agent,
        horizon,
        intervals: merged,
    })
}

/// Tick position of the zero crossing of the segment (t0,v0)-(t1,v1), with
/// signs differing at the endpoints. Rounded to the nearest tick but kept
/// strictly on the correct side of each endpoint whose value is nonzero.
fn cross_tick(t0: Ticks, v0: f64, t1: Ticks, v1: f64, upward: bool) -> Ticks {
    let span = (t1.0 - t0.0) as f64;
    let raw = t0.0 as f64 + span * (-v0) / (v1 - v0);
    let mut c = raw.round() as i64;
    // Keep the sample-grid sign consistent: an up-crossing may not claim t0,
    // a down-crossing may not claim t1.
    if upward {
        c = c.clamp(t0.0 + 1, t1.0);
    } else {
        c = c.clamp(t0.0, t1.0 - 1);
    }
    Ticks(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(secs: f64) -> Ticks {
        Ticks::from_secs(secs, DEFAULT_TICK_HZ)
    }

    fn trace(agent: AgentId, pts: &[(f64, f64)]) -> PLTrace {
        PLTrace::from_points(
            agent,
            &pts.iter().map(|&(s, v)| (t(s), v)).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    /// Three agents whose signals are non-negative on [1,4], [2,5.5] and
    /// [2.5,4] respectively.
    fn fig1_trace(agent: AgentId) -> PLTrace {
        let (l, r) = [(1.0, 4.0), (2.0, 5.5), (2.5, 4.0)][agent];
        let mid = (l + r) / 2.0;
        trace(
            agent,
            &[
                (0.0, -1.0),
                (l, 0.0),
                (mid, 1.0),
                (r, 0.0),
                ((r + 8.0) / 2.0, -1.0),
                (8.0, -1.0),
            ],
        )
    }

    #[test]
    fn normalize_height_atom_shifts_threshold() {
        let x = trace(0, &[(0.0, 12.0), (3.0, 8.0), (6.0, 15.0)]);
        let y = normalize(&x, &PredicateAtom::ge(0, 10.0)).unwrap();
        assert_eq!(y.value_at(t(0.0)).unwrap(), 2.0);
        assert_eq!(y.value_at(t(3.0)).unwrap(), -2.0);
        assert_eq!(y.value_at(t(6.0)).unwrap(), 5.0);
    }

    #[test]
    fn normalize_ge_zero_is_identity() {
        let x = trace(0, &[(0.0, -1.0), (2.0, 3.0)]);
        let y = normalize(&x, &PredicateAtom::ge(0, 0.0)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn normalize_le_atom_flips_sign() {
        // x(t) = 3 - t sampled on {0..5}: pointwise, y >= 0 iff the atom
        // holds, and y = threshold - x.
        let pts: Vec<(f64, f64)> = (0..=5).map(|i| (i as f64, 3.0 - i as f64)).collect();
        let x = trace(0, &pts);
        let y = normalize(&x, &PredicateAtom::le(0, 3.0)).unwrap();
        for i in 0..=5 {
            let ti = t(i as f64);
            let xv = x.value_at(ti).unwrap();
            let yv = y.value_at(ti).unwrap();
            assert_eq!(yv, 3.0 - xv);
            assert_eq!(yv >= 0.0, xv <= 3.0);
        }
        // x(0) sits exactly on the threshold: normalized value is zero.
        assert_eq!(y.value_at(t(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn normalize_agent_mismatch_is_config_error() {
        let x = trace(0, &[(0.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(
            normalize(&x, &PredicateAtom::ge(1, 0.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn extract_roots_single_interval() {
        let st = extract_roots(&fig1_trace(1)).unwrap();
        assert_eq!(st.intervals.len(), 1);
        let iv = st.intervals[0];
        assert_eq!(iv.start, t(2.0));
        assert_eq!(iv.end, t(5.5));
        assert_eq!(iv.start_tag, EndpointTag::LeftRoot);
        assert_eq!(iv.end_tag, EndpointTag::RightRoot);
        assert!(!iv.right_open);
    }

    #[test]
    fn extract_roots_everywhere_negative() {
        let st = extract_roots(&trace(0, &[(0.0, -1.0), (5.0, -2.0)])).unwrap();
        assert!(st.intervals.is_empty());
    }

    #[test]
    fn extract_roots_interpolated_crossings() {
        // (0,-1),(2,1),(4,-1): crossings at 1 and 3.
        let st = extract_roots(&trace(0, &[(0.0, -1.0), (2.0, 1.0), (4.0, -1.0)])).unwrap();
        assert_eq!(st.intervals.len(), 1);
        assert_eq!(st.intervals[0].start, t(1.0));
        assert_eq!(st.intervals[0].end, t(3.0));
    }

    #[test]
    fn extract_roots_zero_touch_is_degenerate_interval() {
        let st = extract_roots(&trace(0, &[(0.0, -1.0), (2.0, 0.0), (4.0, -1.0)])).unwrap();
        assert_eq!(st.intervals.len(), 1);
        let iv = st.intervals[0];
        assert_eq!((iv.start, iv.end), (t(2.0), t(2.0)));
        assert_eq!(iv.start_tag, EndpointTag::LeftRoot);
        assert_eq!(iv.end_tag, EndpointTag::RightRoot);
        assert_eq!(st.roots(), vec![(t(2.0), RootKind::Both)]);
    }

    #[test]
    fn extract_roots_zero_plateau_merges() {
        let st = extract_roots(&trace(
            0,
            &[(0.0, -1.0), (1.0, 0.0), (2.0, 0.0), (3.0, -1.0)],
        ))
        .unwrap();
        assert_eq!(st.intervals.len(), 1);
        assert_eq!(st.intervals[0].start, t(1.0));
        assert_eq!(st.intervals[0].end, t(2.0));
    }

    #[test]
    fn extract_roots_boundary_tags() {
        // Non-negative at both ends of the trace.
        let st = extract_roots(&trace(0, &[(0.0, 1.0), (2.0, -1.0), (4.0, 1.0)])).unwrap();
        assert_eq!(st.intervals.len(), 2);
        assert_eq!(st.intervals[0].start_tag, EndpointTag::HorizonBoundary);
        assert_eq!(st.intervals[0].end_tag, EndpointTag::RightRoot);
        assert_eq!(st.intervals[1].start_tag, EndpointTag::LeftRoot);
        assert_eq!(st.intervals[1].end_tag, EndpointTag::HorizonBoundary);
        // Boundaries are never roots.
        assert_eq!(st.roots().len(), 2);
    }

    #[test]
    fn extract_roots_discontinuous_right_end_is_open() {
        let mut samples = vec![
            TraceSample {
                t: t(0.0),
                value: -1.0,
                jump: false,
            },
            TraceSample {
                t: t(1.0),
                value: 1.0,
                jump: false,
            },
            TraceSample {
                t: t(3.0),
                value: -1.0,
                jump: true,
            },
            TraceSample {
                t: t(5.0),
                value: -1.0,
                jump: false,
            },
        ];
        samples[1].value = 1.0;
        let x = PLTrace::new(0, samples).unwrap();
        let st = extract_roots(&x).unwrap();
        assert_eq!(st.intervals.len(), 1);
        let iv = st.intervals[0];
        assert_eq!(iv.end, t(3.0));
        assert!(iv.right_open);
        assert!(!st.sign_at(t(3.0)).unwrap());
        assert!(st.sign_at(t(2.999999)).unwrap());
    }

    #[test]
    fn sign_at_fig1_examples() {
        let st = extract_roots(&fig1_trace(1)).unwrap();
        assert!(st.sign_at(t(2.0)).unwrap());
        assert!(!st.sign_at(t(5.6)).unwrap());
        assert!(st.sign_at(t(5.5)).unwrap());
    }

    #[test]
    fn sign_at_empty_trace_is_false() {
        let st = extract_roots(&trace(0, &[(0.0, -1.0), (8.0, -1.0)])).unwrap();
        assert!(!st.sign_at(t(4.0)).unwrap());
    }

    #[test]
    fn sign_at_out_of_range_errors() {
        let st = extract_roots(&fig1_trace(0)).unwrap();
        assert!(matches!(st.sign_at(t(9.0)), Err(Error::OutOfRange { .. })));
        assert!(!st.truth_at(t(9.0)));
    }

    #[test]
    fn local_time_identity_and_symmetric_offsets() {
        let eps = SkewBound::new(t(1.0)).unwrap();
        let id = LocalClock::identity(0);
        assert_eq!(id.local_time(t(3.0)), t(3.0));

        let cap = eps.offset_cap();
        let o = (cap as f64 * 0.8) as i64 / 2;
        let c1 = LocalClock::constant(0, o, eps).unwrap();
        let c2 = LocalClock::constant(1, -o, eps).unwrap();
        for chi in [0.0, 1.7, 5.0, 100.0] {
            let d = (c1.local_time(t(chi)).0 - c2.local_time(t(chi)).0).abs();
            assert!(d < eps.ticks().0);
        }
    }

    #[test]
    fn local_time_random_schedules_stay_within_skew() {
        use rand::{Rng, SeedableRng};
        let eps = SkewBound::new(t(0.5)).unwrap();
        let cap = eps.offset_cap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut make = |agent: AgentId| {
            let mut segs = vec![ClockSegment {
                from: Ticks::ZERO,
                offset: rng.gen_range(-cap..=0),
            }];
            let mut at = 0i64;
            for _ in 0..8 {
                at += rng.gen_range(1..=2_000_000);
                let prev = segs.last().unwrap().offset;
                let next = rng.gen_range(prev..=cap.min(prev + cap / 4 + 1));
                segs.push(ClockSegment {
                    from: Ticks(at),
                    offset: next,
                });
            }
            LocalClock::new(agent, segs, eps).unwrap()
        };
        let a = make(0);
        let b = make(1);
        for i in 0..10_000 {
            let chi = Ticks(i * 2_111);
            let d = (a.local_time(chi).0 - b.local_time(chi).0).abs();
            assert!(d < eps.ticks().0, "gap {} at {}", d, chi);
        }
    }

    #[test]
    fn global_time_reaching_inverts_local_time() {
        let eps = SkewBound::new(t(1.0)).unwrap();
        let clk = LocalClock::new(
            0,
            vec![
                ClockSegment {
                    from: Ticks::ZERO,
                    offset: -100,
                },
                ClockSegment {
                    from: Ticks(1000),
                    offset: 250,
                },
            ],
            eps,
        )
        .unwrap();
        for local in [0, 5, 899, 900, 901, 1250, 5000] {
            let chi = clk.global_time_reaching(Ticks(local));
            assert!(clk.local_time(chi) >= Ticks(local));
            if chi.0 > 0 {
                assert!(clk.local_time(Ticks(chi.0 - 1)) < Ticks(local));
            }
        }
    }

    #[test]
    fn sign_at_agrees_with_direct_evaluation_on_sample_grid() {
        let x = trace(
            0,
            &[
                (0.0, -0.3),
                (0.7, 1.1),
                (1.9, -0.4),
                (2.4, 0.0),
                (3.0, 2.0),
                (4.2, -1.0),
                (5.0, -2.0),
            ],
        );
        let st = extract_roots(&x).unwrap();
        for s in x.samples() {
            assert_eq!(
                st.sign_at(s.t).unwrap(),
                s.value >= 0.0,
                "mismatch at sample {}",
                s.t
            );
        }
    }

    #[test]
    fn malformed_trace_rejected() {
        assert!(PLTrace::from_points(0, &[(t(0.0), 1.0), (t(0.0), 2.0)]).is_err());
        assert!(PLTrace::from_points(0, &[(t(1.0), 1.0)]).is_err());
        assert!(PLTrace::new(
            0,
            vec![TraceSample {
                t: Ticks::ZERO,
                value: f64::NAN,
                jump: false
            }]
        )
        .is_err());
    }
}
