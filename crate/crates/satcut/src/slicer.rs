//! Per-agent slicer: a token-based detector that completes each discrete
//! event of its agent into a satisfying cut, or proves that none has that
//! event on its frontier.
//!
//! Each agent owns one token. To complete a pending event at local time `t`
//! the token pins its owner's frontier entry at `t` and travels between
//! agents. A blocked candidate names a forbidden agent: an agent whose
//! entry falsifies the predicate, or the earliest entry when the candidate
//! is inconsistent. The token then targets either the instant `t - eps` on
//! that agent (taken from the pending event's timestamp; the host creates
//! the event if the abstractor can no longer produce it) or the successor
//! of the blocking entry in the host's event log. Entries only ever move
//! forward in time.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::causality::{Event, EventKind, Frontier, FrontierEntry};
use crate::error::{Error, Result};
use crate::signal::{AgentId, SignTrace, SkewBound, Ticks};

/// An event known to a slicer, keyed by its local time in `F_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEvent {
    pub kind: EventKind,
    pub truth: bool,
    pub from_abstractor: bool,
}

/// One candidate frontier entry carried by a token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandEntry {
    pub t: Ticks,
    pub kind: EventKind,
    pub truth: bool,
}

/// What a travelling token is looking for on its target agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Want {
    /// An event at exactly this instant; the host creates it once the
    /// abstractor can no longer deliver anything at or before it.
    Exact(Ticks),
    /// The next event strictly after this instant.
    After(Ticks),
}

impl Want {
    fn key_time(self) -> Ticks {
        match self {
            Want::Exact(s) => s,
            Want::After(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub agent: AgentId,
    pub want: Want,
}

/// The event a token is completing: its local time, the lowest instant
/// other agents may contribute (`max(t - eps, 0)`, read off the event's
/// timestamp), and how the event arose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub t: Ticks,
    pub floor: Ticks,
    pub kind: EventKind,
}

/// The constant-size token: the event being completed, the candidate
/// frontier assembled so far, and the current routing state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub owner: AgentId,
    pub candidate: Vec<Option<CandEntry>>,
    pub pending: Option<Pending>,
    pub target: Option<Target>,
    /// Set when heading home: whether the completion found a satcut.
    pub verdict: Option<bool>,
}

impl Token {
    fn new(owner: AgentId, n_agents: usize) -> Token {
        Token {
            owner,
            candidate: vec![None; n_agents],
            pending: None,
            target: None,
            verdict: None,
        }
    }
}

/// A satisfying cut reported by a token's owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub owner: AgentId,
    pub pending_t: Ticks,
    pub frontier: Frontier,
}

/// Token transfers and emissions produced by one slicer call.
#[derive(Debug, Default)]
pub struct SlicerEffects {
    pub sends: Vec<(AgentId, Token)>,
    pub emissions: Vec<Emission>,
}

/// Structured token-trace log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicerLog {
    pub agent: AgentId,
    pub token: AgentId,
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Ticks>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_agent: Option<AgentId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontier: Option<Vec<Ticks>>,
}

enum Serve {
    Served(Ticks, LocalEvent),
    Parked,
    Exhausted,
}

enum Check {
    Satcut,
    Forbidden(AgentId),
}

#[derive(Debug)]
pub struct Slicer {
    agent: AgentId,
    eps: SkewBound,
    sign: SignTrace,
    /// `F_n`: abstractor events plus slicer-created events, by local time.
    events: BTreeMap<Ticks, LocalEvent>,
    /// Highest local time delivered by the abstractor; FIFO delivery means
    /// nothing at or below it will ever arrive from there again.
    abstractor_high: Option<Ticks>,
    /// Abstractor events not yet completed, in local-time order.
    pending_queue: VecDeque<Ticks>,
    /// This agent's own token while it is at home (idle or between hops).
    home: Option<Token>,
    /// Visiting tokens waiting for an event, keyed by awaited time.
    parked: BTreeMap<(Ticks, AgentId), Token>,
    stream_complete: bool,
    retired: bool,
    pub logs: Vec<SlicerLog>,
    pub created_count: u64,
    pub emitted_count: u64,
}

impl Slicer {
    pub fn new(agent: AgentId, n_agents: usize, eps: SkewBound, sign: SignTrace) -> Slicer {
        Slicer {
            agent,
            eps,
            sign,
            events: BTreeMap::new(),
            abstractor_high: None,
            pending_queue: VecDeque::new(),
            home: Some(Token::new(agent, n_agents)),
            parked: BTreeMap::new(),
            stream_complete: false,
            retired: false,
            logs: Vec::new(),
            created_count: 0,
            emitted_count: 0,
        }
    }

    pub fn is_quiescent(&self) -> bool {
        self.parked.is_empty() && (self.retired || self.pending_queue.is_empty())
    }

    /// Events arriving from the local abstractor, in local-time order.
    pub fn ingest(&mut self, batch: &[Event]) -> Result<SlicerEffects> {
        let mut fx = SlicerEffects::default();
        for ev in batch {
            if ev.id.agent != self.agent {
                return Err(Error::Protocol {
                    agent: self.agent,
                    detail: "abstractor event for a different agent".into(),
                });
            }
            if self.abstractor_high.map_or(false, |h| ev.id.t < h) {
                return Err(Error::Protocol {
                    agent: self.agent,
                    detail: format!("abstractor events out of order at {}", ev.id.t),
                });
            }
            self.abstractor_high = Some(ev.id.t);
            let truth = self.sign.truth_at(ev.id.t);
            match self.events.get_mut(&ev.id.t) {
                Some(existing) => {
                    // A slicer-created event at the same instant: it is the
                    // same event; adopt the abstractor's kind.
                    existing.kind = ev.id.kind;
                    existing.from_abstractor = true;
                }
                None => {
                    self.events.insert(
                        ev.id.t,
                        LocalEvent {
                            kind: ev.id.kind,
                            truth,
                            from_abstractor: true,
                        },
                    );
                }
            }
            self.pending_queue.push_back(ev.id.t);
        }
        self.settle(&mut fx)?;
        Ok(fx)
    }

    /// A token arrived over the network.
    pub fn receive_token(&mut self, tok: Token) -> Result<SlicerEffects> {
        let mut fx = SlicerEffects::default();
        if tok.verdict.is_some() {
            if tok.owner != self.agent {
                return Err(Error::Protocol {
                    agent: self.agent,
                    detail: "completed token routed to a non-owner".into(),
                });
            }
        } else if tok.target.map(|tg| tg.agent) != Some(self.agent) {
            return Err(Error::Protocol {
                agent: self.agent,
                detail: "token arrived without a target for this agent".into(),
            });
        }
        self.drive(tok, &mut fx)?;
        self.settle(&mut fx)?;
        Ok(fx)
    }

    /// The local abstractor is drained: no further abstractor events will
    /// ever arrive.
    pub fn mark_stream_complete(&mut self) -> Result<SlicerEffects> {
        let mut fx = SlicerEffects::default();
        self.stream_complete = true;
        self.settle(&mut fx)?;
        Ok(fx)
    }

    /// Wake every parked token that can now make progress, then put the
    /// home token to work on the next pending event.
    fn settle(&mut self, fx: &mut SlicerEffects) -> Result<()> {
        loop {
            let key = self
                .parked
                .iter()
                .find(|(_, tok)| {
                    let want = tok.target.expect("parked token has a target").want;
                    !matches!(self.peek_serve(want), Serve::Parked)
                })
                .map(|(k, _)| *k);
            match key {
                Some(k) => {
                    let tok = self.parked.remove(&k).unwrap();
                    self.log_tok(&tok, "wake", Some(k.0), None, None);
                    self.drive(tok, fx)?;
                }
                None => break,
            }
        }
        // Start the home token on newly available work.
        if let Some(tok) = self.home.take() {
            if tok.pending.is_none() && (!self.pending_queue.is_empty() || self.stream_complete) {
                self.drive_from_home(tok, fx)?;
            } else {
                self.home = Some(tok);
            }
        }
        Ok(())
    }

    fn drive_from_home(&mut self, mut tok: Token, fx: &mut SlicerEffects) -> Result<()> {
        if !self.advance_pending(&mut tok) {
            self.stash_home(tok);
            return Ok(());
        }
        self.drive(tok, fx)
    }

    /// Run a token until it leaves this agent, parks, idles at home, or
    /// retires.
    fn drive(&mut self, mut tok: Token, fx: &mut SlicerEffects) -> Result<()> {
        loop {
            // A verdict is processed at home: emit on success, then move on.
            if let Some(found) = tok.verdict.take() {
                debug_assert_eq!(tok.owner, self.agent);
                if found {
                    self.emit(&tok, fx);
                } else {
                    let t = tok.pending.map(|p| p.t);
                    self.log_tok(&tok, "fail", t, None, None);
                }
                if !self.advance_pending(&mut tok) {
                    self.stash_home(tok);
                    return Ok(());
                }
                continue;
            }

            // Serve or route an outstanding target.
            if let Some(tg) = tok.target {
                if tg.agent != self.agent {
                    fx.sends.push((tg.agent, tok));
                    return Ok(());
                }
                match self.serve(tg.want, &tok)? {
                    Serve::Served(t, ev) => {
                        tok.candidate[self.agent] = Some(CandEntry {
                            t,
                            kind: ev.kind,
                            truth: ev.truth,
                        });
                        tok.target = None;
                        self.log_tok(&tok, "incorporated", Some(t), None, None);
                        continue;
                    }
                    Serve::Parked => {
                        let key = (tg.want.key_time(), tok.owner);
                        self.log_tok(&tok, "park", Some(key.0), None, None);
                        self.parked.insert(key, tok);
                        return Ok(());
                    }
                    Serve::Exhausted => {
                        tok.target = None;
                        if tok.owner == self.agent {
                            let t = tok.pending.map(|p| p.t);
                            self.log_tok(&tok, "fail", t, None, None);
                            if !self.advance_pending(&mut tok) {
                                self.stash_home(tok);
                                return Ok(());
                            }
                            continue;
                        }
                        tok.verdict = Some(false);
                        fx.sends.push((tok.owner, tok));
                        return Ok(());
                    }
                }
            }

            // Evaluate the candidate.
            let pending = tok.pending.ok_or_else(|| Error::Protocol {
                agent: self.agent,
                detail: "token driven with no pending event".into(),
            })?;
            match self.check(&tok) {
                Check::Satcut => {
                    if tok.owner == self.agent {
                        self.emit(&tok, fx);
                        if !self.advance_pending(&mut tok) {
                            self.stash_home(tok);
                            return Ok(());
                        }
                        continue;
                    }
                    tok.verdict = Some(true);
                    fx.sends.push((tok.owner, tok));
                    return Ok(());
                }
                Check::Forbidden(m) => {
                    if m == tok.owner {
                        // The pinned event itself blocks: no satisfying cut
                        // has it on the frontier.
                        if tok.owner == self.agent {
                            self.log_tok(&tok, "fail", Some(pending.t), None, None);
                            if !self.advance_pending(&mut tok) {
                                self.stash_home(tok);
                                return Ok(());
                            }
                            continue;
                        }
                        tok.verdict = Some(false);
                        fx.sends.push((tok.owner, tok));
                        return Ok(());
                    }
                    let want = self.want_for(&tok, m, pending);
                    tok.target = Some(Target { agent: m, want });
                    self.log_tok(&tok, "target", Some(want.key_time()), Some(m), None);
                }
            }
        }
    }

    /// What the token should look for on the forbidden agent. An entry at
    /// or above the window floor advances to its successor; otherwise the
    /// token incorporates the instant exactly at the floor, read off the
    /// pending root's timestamp, creating the event if the abstractor can
    /// no longer produce it.
    fn want_for(&self, tok: &Token, m: AgentId, pending: Pending) -> Want {
        match tok.candidate[m] {
            Some(e) if e.t >= pending.floor => Want::After(e.t),
            _ => Want::Exact(pending.floor),
        }
    }

    /// Candidate status: a satcut, or the forbidden agent blocking it.
    /// Falsified entries take precedence over inconsistency; ties break to
    /// the lowest agent id so runs are reproducible.
    fn check(&self, tok: &Token) -> Check {
        // Entries never move backward, so once any entry has passed the
        // pinned event's window the completion can never succeed; naming
        // the owner as forbidden fails it without touring the remaining
        // agents.
        if let Some(p) = tok.pending {
            let ceiling = p.t + self.eps.ticks();
            if tok.candidate.iter().flatten().any(|e| e.t > ceiling) {
                return Check::Forbidden(tok.owner);
            }
        }
        for (m, entry) in tok.candidate.iter().enumerate() {
            if let Some(e) = entry {
                if !e.truth {
                    return Check::Forbidden(m);
                }
            }
        }
        if let Some(m) = tok.candidate.iter().position(|e| e.is_none()) {
            return Check::Forbidden(m);
        }
        let times: Vec<Ticks> = tok.candidate.iter().map(|e| e.unwrap().t).collect();
        let max = *times.iter().max().unwrap();
        let min = *times.iter().min().unwrap();
        if max - min <= self.eps.ticks() {
            Check::Satcut
        } else {
            let m = times.iter().position(|&t| t == min).unwrap();
            Check::Forbidden(m)
        }
    }

    fn peek_serve(&self, want: Want) -> Serve {
        match want {
            Want::Exact(s) => {
                if let Some(ev) = self.events.get(&s) {
                    Serve::Served(s, *ev)
                } else if self.abstractor_high.map_or(false, |h| h > s) || self.stream_complete {
                    // Creatable.
                    Serve::Served(
                        s,
                        LocalEvent {
                            kind: EventKind::SlicerCreated,
                            truth: self.sign.truth_at(s),
                            from_abstractor: false,
                        },
                    )
                } else {
                    Serve::Parked
                }
            }
            Want::After(v) => {
                use std::ops::Bound::{Excluded, Unbounded};
                if let Some((&t, ev)) = self.events.range((Excluded(v), Unbounded)).next() {
                    Serve::Served(t, *ev)
                } else if self.stream_complete {
                    Serve::Exhausted
                } else {
                    Serve::Parked
                }
            }
        }
    }

    fn serve(&mut self, want: Want, tok: &Token) -> Result<Serve> {
        if let Want::Exact(s) = want {
            if !self.events.contains_key(&s)
                && (self.abstractor_high.map_or(false, |h| h > s) || self.stream_complete)
            {
                // FIFO delivery (or a drained stream) guarantees the
                // abstractor will never produce an event at `s`, so this
                // instant of the continuous signal is materialized here.
                let ev = LocalEvent {
                    kind: EventKind::SlicerCreated,
                    truth: self.sign.truth_at(s),
                    from_abstractor: false,
                };
                self.events.insert(s, ev);
                self.created_count += 1;
                self.log_tok(tok, "created", Some(s), None, None);
            }
        }
        Ok(self.peek_serve(want))
    }

    fn advance_pending(&mut self, tok: &mut Token) -> bool {
        while let Some(t) = self.pending_queue.pop_front() {
            let ev = self.events[&t];
            // Only roots anchor completions. Derived offset events carry no
            // new satisfaction information of their own: they are kept in
            // the log for tokens to incorporate, and the extremal endpoints
            // they would pin are recovered at aggregation. A falsified root
            // can head no satisfying cut either way.
            let is_root = matches!(ev.kind, EventKind::LeftRoot | EventKind::RightRoot);
            if !ev.truth || !is_root {
                self.log_tok(tok, "skip", Some(t), None, None);
                continue;
            }
            let floor = (t - self.eps.ticks()).max(Ticks::ZERO);
            tok.pending = Some(Pending {
                t,
                floor,
                kind: ev.kind,
            });
            tok.candidate[self.agent] = Some(CandEntry {
                t,
                kind: ev.kind,
                truth: true,
            });
            self.log_tok(tok, "pending", Some(t), None, None);
            return true;
        }
        tok.pending = None;
        if self.stream_complete {
            self.retired = true;
            self.log_tok(tok, "retire", None, None, None);
        }
        false
    }

    fn stash_home(&mut self, tok: Token) {
        if !self.retired {
            self.home = Some(tok);
        }
    }

    fn emit(&mut self, tok: &Token, fx: &mut SlicerEffects) {
        let entries: Vec<FrontierEntry> = tok
            .candidate
            .iter()
            .map(|e| {
                let e = e.expect("emitting with incomplete candidate");
                FrontierEntry {
                    t: e.t,
                    kind: e.kind,
                    truth: e.truth,
                }
            })
            .collect();
        let frontier = Frontier { entries };
        let pending_t = tok.pending.map(|p| p.t).unwrap_or(Ticks::ZERO);
        self.emitted_count += 1;
        self.log_tok(tok, "emit", Some(pending_t), None, Some(frontier.times()));
        fx.emissions.push(Emission {
            owner: tok.owner,
            pending_t,
            frontier,
        });
    }

    fn log_tok(
        &mut self,
        tok: &Token,
        action: &str,
        t: Option<Ticks>,
        target_agent: Option<AgentId>,
        frontier: Option<Vec<Ticks>>,
    ) {
        self.logs.push(SlicerLog {
            agent: self.agent,
            token: tok.owner,
            action: action.to_string(),
            t,
            target_agent,
            frontier,
        });
    }
}
