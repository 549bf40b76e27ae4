//! Per-agent abstractor: turns the continuous signal into a stream of
//! discrete, timestamped events.
//!
//! Roots are buffered as they are found; right roots are additionally
//! broadcast to every other agent. Receiving a remote right root at `t`
//! creates a local event at `t + eps`. A buffered event at `s` is released
//! to the local slicer once every other agent has furnished a right root
//! (or horizon marker) with timestamp at least `s` and the local clock has
//! passed `s`, which guarantees the slicer sees each agent's events in
//! nondecreasing local-time order.

use serde::{Deserialize, Serialize};

use crate::causality::{pvc_assign, Event, EventId, EventKind};
use crate::error::{Error, Result};
use crate::signal::{AgentId, RootKind, SkewBound, Ticks};

/// Wire format of a right-root broadcast. A `marker` message announces that
/// the origin reached its horizon and will send nothing more; it counts as
/// a right root at the horizon for readiness purposes only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RightRootMsg {
    pub origin: AgentId,
    pub t: Ticks,
    pub marker: bool,
}

/// What one trigger firing produced: messages to send (with their
/// destinations) and events released to the local slicer, in local-time
/// order.
#[derive(Debug, Default)]
pub struct AbstractorOutput {
    pub broadcast: Vec<(AgentId, RightRootMsg)>,
    pub flushed: Vec<Event>,
}

/// Structured log line for one trigger firing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractorLog {
    pub agent: AgentId,
    pub trigger: String,
    pub event: Option<EventId>,
    pub pvc: Option<Vec<Ticks>>,
    pub buffer_size: usize,
}

#[derive(Debug)]
pub struct Abstractor {
    agent: AgentId,
    n_agents: usize,
    eps: SkewBound,
    horizon: Ticks,
    buffer: Vec<Event>,
    /// Latest right-root (or marker) timestamp received from each agent.
    last_rr: Vec<Option<Ticks>>,
    marker_seen: Vec<bool>,
    /// Latest local-clock reading observed by this abstractor.
    local_scan: Ticks,
    local_done: bool,
    last_local_root: Option<Ticks>,
    pub logs: Vec<AbstractorLog>,
    pub msgs_sent: u64,
    pub events_emitted: u64,
    pub max_buffer: usize,
}

impl Abstractor {
    pub fn new(agent: AgentId, n_agents: usize, eps: SkewBound, horizon: Ticks) -> Abstractor {
        Abstractor {
            agent,
            n_agents,
            eps,
            horizon,
            buffer: Vec::new(),
            last_rr: vec![None; n_agents],
            marker_seen: vec![false; n_agents],
            local_scan: Ticks::ZERO,
            local_done: false,
            last_local_root: None,
            logs: Vec::new(),
            msgs_sent: 0,
            events_emitted: 0,
            max_buffer: 0,
        }
    }

    /// No further events will ever leave this abstractor.
    pub fn is_drained(&self) -> bool {
        self.local_done
            && self.buffer.is_empty()
            && (0..self.n_agents).all(|k| k == self.agent || self.marker_seen[k])
    }

    /// A root of the local signal was found at local time `t`.
    pub fn on_root(&mut self, t: Ticks, kind: RootKind) -> Result<AbstractorOutput> {
        if self.local_done {
            return Err(Error::Protocol {
                agent: self.agent,
                detail: format!("root at {} after horizon", t),
            });
        }
        if let Some(prev) = self.last_local_root {
            if t <= prev {
                return Err(Error::Protocol {
                    agent: self.agent,
                    detail: format!("roots out of order: {} after {}", t, prev),
                });
            }
        }
        self.last_local_root = Some(t);
        self.local_scan = self.local_scan.max(t);

        let event_kind = match kind {
            RootKind::Left => EventKind::LeftRoot,
            RootKind::Right | RootKind::Both => EventKind::RightRoot,
        };
        let ev = Event {
            id: EventId {
                agent: self.agent,
                t,
                kind: event_kind,
            },
            pvc: pvc_assign(self.agent, t, self.n_agents, self.eps),
        };
        self.insert_buffered(ev.clone());

        let mut out = AbstractorOutput::default();
        if event_kind == EventKind::RightRoot {
            for m in 0..self.n_agents {
                if m != self.agent {
                    out.broadcast.push((
                        m,
                        RightRootMsg {
                            origin: self.agent,
                            t,
                            marker: false,
                        },
                    ));
                }
            }
            self.msgs_sent += out.broadcast.len() as u64;
        }
        self.log("root", Some(ev.id), Some(ev.pvc.stamp.clone()));
        out.flushed = self.flush();
        self.events_emitted += out.flushed.len() as u64;
        Ok(out)
    }

    /// A right-root (or horizon-marker) message arrived from another agent.
    /// `local_now` is this agent's clock reading at delivery.
    pub fn on_remote_right_root(
        &mut self,
        msg: RightRootMsg,
        local_now: Ticks,
    ) -> Result<AbstractorOutput> {
        if msg.origin == self.agent || msg.origin >= self.n_agents {
            return Err(Error::Protocol {
                agent: self.agent,
                detail: format!("right-root message from invalid origin {}", msg.origin),
            });
        }
        if let Some(prev) = self.last_rr[msg.origin] {
            if msg.t < prev {
                return Err(Error::Fifo {
                    src: msg.origin,
                    dst: self.agent,
                    detail: format!("right-root time {} after {}", msg.t, prev),
                });
            }
        }
        self.last_rr[msg.origin] = Some(msg.t);
        self.local_scan = self.local_scan.max(local_now);

        let mut created = None;
        if msg.marker {
            self.marker_seen[msg.origin] = true;
        } else {
            // The offset event inherits its origin component from the
            // message, which is exactly the constructive timestamp.
            let t_new = msg.t + self.eps.ticks();
            let ev = Event {
                id: EventId {
                    agent: self.agent,
                    t: t_new,
                    kind: EventKind::OffsetFromRightRoot,
                },
                pvc: pvc_assign(self.agent, t_new, self.n_agents, self.eps),
            };
            created = Some(ev.id);
            self.insert_buffered(ev);
        }
        self.log(
            if msg.marker {
                "marker"
            } else {
                "remote_right_root"
            },
            created,
            None,
        );
        let mut out = AbstractorOutput::default();
        out.flushed = self.flush();
        self.events_emitted += out.flushed.len() as u64;
        Ok(out)
    }

    /// The local clock reached the horizon: broadcast markers and stop
    /// producing local roots.
    pub fn on_horizon(&mut self) -> Result<AbstractorOutput> {
        if self.local_done {
            return Err(Error::Protocol {
                agent: self.agent,
                detail: "horizon trigger fired twice".into(),
            });
        }
        self.local_done = true;
        self.local_scan = self.local_scan.max(self.horizon);
        let mut out = AbstractorOutput::default();
        for m in 0..self.n_agents {
            if m != self.agent {
                out.broadcast.push((
                    m,
                    RightRootMsg {
                        origin: self.agent,
                        t: self.horizon,
                        marker: true,
                    },
                ));
            }
        }
        self.msgs_sent += out.broadcast.len() as u64;
        self.log("horizon", None, None);
        out.flushed = self.flush();
        self.events_emitted += out.flushed.len() as u64;
        Ok(out)
    }

    fn insert_buffered(&mut self, ev: Event) {
        match self.buffer.binary_search_by_key(&ev.id.t, |e| e.id.t) {
            Ok(i) => {
                // Duplicate instant: keep the more informative kind (a root
                // over a derived offset); timestamps coincide by
                // construction.
                if self.buffer[i].id.kind == EventKind::OffsetFromRightRoot {
                    self.buffer[i].id.kind = ev.id.kind;
                }
                for (a, b) in self.buffer[i].pvc.stamp.iter_mut().zip(ev.pvc.stamp.iter()) {
                    *a = (*a).max(*b);
                }
            }
            Err(i) => self.buffer.insert(i, ev),
        }
        self.max_buffer = self.max_buffer.max(self.buffer.len());
    }

    /// An event at `s` is ready once no earlier event can still appear:
    /// every other agent has furnished a right root at `>= s` (a marker
    /// waives the constraint permanently) and the local clock passed `s`.
    fn ready(&self, s: Ticks) -> bool {
        if !self.local_done && s > self.local_scan {
            return false;
        }
        (0..self.n_agents).all(|k| {
            k == self.agent || self.marker_seen[k] || self.last_rr[k].map_or(false, |t| t >= s)
        })
    }

    fn flush(&mut self) -> Vec<Event> {
        let ready_prefix = self
            .buffer
            .iter()
            .take_while(|e| self.ready(e.id.t))
            .count();
        let mut flushed: Vec<Event> = self.buffer.drain(..ready_prefix).collect();
        for ev in &mut flushed {
            // Finalize the timestamp; equal to the provisional one by
            // construction.
            ev.pvc = pvc_assign(self.agent, ev.id.t, self.n_agents, self.eps);
        }
        flushed
    }

    fn log(&mut self, trigger: &str, event: Option<EventId>, pvc: Option<Vec<Ticks>>) {
        self.logs.push(AbstractorLog {
            agent: self.agent,
            trigger: trigger.to_string(),
            event,
            pvc,
            buffer_size: self.buffer.len(),
        });
    }
}
