//! Six-state VNF lifecycle: timed transitions, per-state resource
//! footprints, and in-flight transition tracking.
//!
//! The state machine has a forward chain (fetch, build, deploy, start) and
//! backward edges (stop plus instantaneous deletes). Pause/unpause hang off
//! Running. Transitions hold resources under a reserve-ahead rule: while a
//! transition is in flight the instance holds the componentwise max of the
//! current and target footprints, adjusted down on completion.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::topology::{EdgeCloud, ResourceVector};
use crate::types::{NodeId, VnfTypeId};

/// Lifecycle states ordered by readiness: comparing two states tells which
/// one is closer to serving traffic (`time_to_running` is non-increasing
/// along this order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LifecycleState {
    Descriptor,
    Source,
    Image,
    Stopped,
    Paused,
    Running,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 6] = [
        LifecycleState::Descriptor,
        LifecycleState::Source,
        LifecycleState::Image,
        LifecycleState::Stopped,
        LifecycleState::Paused,
        LifecycleState::Running,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LifecycleState::Descriptor => "descriptor",
            LifecycleState::Source => "source",
            LifecycleState::Image => "image",
            LifecycleState::Stopped => "stopped",
            LifecycleState::Paused => "paused",
            LifecycleState::Running => "running",
        }
    }

    pub fn parse(s: &str) -> Option<LifecycleState> {
        LifecycleState::ALL.into_iter().find(|st| st.label() == s)
    }
}

impl std::fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LifecycleError {
    #[error("transition to {target} already in flight until {completion_time}")]
    TransitionInFlight {
        target: LifecycleState,
        completion_time: f64,
    },
    #[error("no lifecycle edge {from} -> {to}")]
    IllegalEdge {
        from: LifecycleState,
        to: LifecycleState,
    },
    #[error("insufficient resources at edge cloud (free {free:?}, needed {needed:?})")]
    InsufficientResources {
        free: ResourceVector,
        needed: ResourceVector,
    },
    #[error("completion at {now} before scheduled time {completion_time}")]
    PrematureCompletion { now: f64, completion_time: f64 },
    #[error("completion requested with no transition in flight")]
    NothingInFlight,
}

/// Durations of the lifecycle edges plus the per-state resource usage mask.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    durations: BTreeMap<(LifecycleState, LifecycleState), f64>,
    masks: BTreeMap<LifecycleState, ResourceVector>,
}

use LifecycleState::*;

/// The lifecycle edges in a fixed order, with the default durations in
/// seconds: download 12, build 0, deploy 0.1, start 0.53, pause/unpause
/// 0.096, stop 0.53 (= start), deletes 0.
const DEFAULT_EDGES: [(LifecycleState, LifecycleState, f64); 10] = [
    (Descriptor, Source, 12.0),
    (Source, Image, 0.0),
    (Image, Stopped, 0.1),
    (Stopped, Running, 0.53),
    (Running, Paused, 0.096),
    (Paused, Running, 0.096),
    (Running, Stopped, 0.53),
    (Stopped, Image, 0.0),
    (Image, Source, 0.0),
    (Source, Descriptor, 0.0),
];

/// Which resource components each state occupies (1 = the VNF's requirement
/// for that component, 0 = nothing).
fn default_masks() -> BTreeMap<LifecycleState, ResourceVector> {
    BTreeMap::from([
        (Descriptor, ResourceVector::new(0, 0, 0)),
        (Source, ResourceVector::new(0, 0, 1)),
        (Image, ResourceVector::new(0, 0, 1)),
        (Stopped, ResourceVector::new(0, 0, 1)),
        (Paused, ResourceVector::new(0, 1, 1)),
        (Running, ResourceVector::new(1, 1, 1)),
    ])
}

/// The realistic table with the default durations.
pub fn default_transition_table() -> TransitionTable {
    TransitionTable {
        durations: DEFAULT_EDGES.iter().map(|&(a, b, d)| ((a, b), d)).collect(),
        masks: default_masks(),
    }
}

/// The same edges with every duration forced to zero: instantaneous
/// embedding for the idealized baseline.
pub fn zeroed_transition_table() -> TransitionTable {
    let mut t = default_transition_table();
    for d in t.durations.values_mut() {
        *d = 0.0;
    }
    t
}

impl TransitionTable {
    /// Duration of a single edge, if it exists.
    pub fn duration(&self, from: LifecycleState, to: LifecycleState) -> Option<f64> {
        self.durations.get(&(from, to)).copied()
    }

    /// Override one edge duration. Unknown edges are rejected so a typo in a
    /// scenario file cannot silently invent new transitions.
    pub fn set_duration(
        &mut self,
        from: LifecycleState,
        to: LifecycleState,
        seconds: f64,
    ) -> Result<(), LifecycleError> {
        match self.durations.get_mut(&(from, to)) {
            Some(d) => {
                *d = seconds;
                Ok(())
            }
            None => Err(LifecycleError::IllegalEdge { from, to }),
        }
    }

    /// Resources a VNF with requirement `req` occupies in `state`.
    pub fn footprint(&self, state: LifecycleState, req: ResourceVector) -> ResourceVector {
        let mask = self.masks[&state];
        ResourceVector::new(
            if mask.cpu > 0 { req.cpu } else { 0 },
            if mask.memory > 0 { req.memory } else { 0 },
            if mask.disk > 0 { req.disk } else { 0 },
        )
    }

    /// Shortest-duration edge sequence from `from` to `to`; empty when equal.
    /// Ties are broken toward the earlier state in the readiness order so the
    /// route is deterministic.
    pub fn route_to(&self, from: LifecycleState, to: LifecycleState) -> Vec<(LifecycleState, LifecycleState)> {
        if from == to {
            return Vec::new();
        }
        // Dijkstra over six nodes; a scan beats a heap at this size.
        let idx = |s: LifecycleState| LifecycleState::ALL.iter().position(|&x| x == s).unwrap();
        let mut dist = [f64::INFINITY; 6];
        let mut prev: [Option<LifecycleState>; 6] = [None; 6];
        let mut done = [false; 6];
        dist[idx(from)] = 0.0;
        loop {
            let mut u: Option<usize> = None;
            for i in 0..6 {
                if !done[i] && dist[i].is_finite() && u.is_none_or(|b| dist[i] < dist[b]) {
                    u = Some(i);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            let from_state = LifecycleState::ALL[u];
            for (&(a, b), &d) in &self.durations {
                if a == from_state {
                    let v = idx(b);
                    if dist[u] + d < dist[v] {
                        dist[v] = dist[u] + d;
                        prev[v] = Some(a);
                    }
                }
            }
        }
        let mut edges = Vec::new();
        let mut cur = to;
        while let Some(p) = prev[idx(cur)] {
            edges.push((p, cur));
            cur = p;
        }
        debug_assert_eq!(cur, from, "lifecycle FSM should be strongly connected");
        edges.reverse();
        edges
    }

    /// Total duration of an edge route. Summed tail-first so the small
    /// terms accumulate before the large ones; with the default constants
    /// this makes the totals exact (0.53 + 0.1 + 0 + 12 = 12.63).
    pub fn route_duration(&self, route: &[(LifecycleState, LifecycleState)]) -> f64 {
        route.iter().rev().map(|&(a, b)| self.durations[&(a, b)]).sum()
    }

    /// Total seconds to reach Running from `from` along the fastest route.
    pub fn time_to_running(&self, from: LifecycleState) -> f64 {
        self.route_duration(&self.route_to(from, Running))
    }
}

/// One VNF type materialized at one edge cloud.
#[derive(Debug, Clone)]
pub struct VnfInstance {
    pub vnf_type: VnfTypeId,
    pub location: NodeId,
    pub state: LifecycleState,
    pub in_flight: Option<InFlight>,
    /// Resources currently reserved at the co-located edge cloud.
    held: ResourceVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlight {
    pub target: LifecycleState,
    pub completion_time: f64,
}

impl VnfInstance {
    /// A fresh instance holding nothing: every VNF starts life as a
    /// descriptor known to the orchestrator.
    pub fn new(vnf_type: VnfTypeId, location: NodeId) -> Self {
        Self {
            vnf_type,
            location,
            state: Descriptor,
            in_flight: None,
            held: ResourceVector::ZERO,
        }
    }

    /// Construct directly in `state` with resources already reserved at
    /// `ec`: used for scenario-file initial deployments.
    pub fn deployed(
        vnf_type: VnfTypeId,
        location: NodeId,
        state: LifecycleState,
        req: ResourceVector,
        table: &TransitionTable,
        ec: &mut EdgeCloud,
    ) -> Result<Self, LifecycleError> {
        let need = table.footprint(state, req);
        ec.reserve(need)
            .map_err(|free| LifecycleError::InsufficientResources { free, needed: need })?;
        Ok(Self {
            vnf_type,
            location,
            state,
            in_flight: None,
            held: need,
        })
    }

    pub fn held(&self) -> ResourceVector {
        self.held
    }

    /// The state this instance is heading to (in-flight target, else the
    /// current state).
    pub fn effective_state(&self) -> LifecycleState {
        self.in_flight.map_or(self.state, |f| f.target)
    }

    /// Start a one-edge transition, reserving the componentwise max of the
    /// current and target footprints. Returns the completion time.
    pub fn begin_transition(
        &mut self,
        target: LifecycleState,
        now: f64,
        req: ResourceVector,
        table: &TransitionTable,
        ec: &mut EdgeCloud,
    ) -> Result<f64, LifecycleError> {
        if let Some(f) = self.in_flight {
            return Err(LifecycleError::TransitionInFlight {
                target: f.target,
                completion_time: f.completion_time,
            });
        }
        let Some(duration) = table.duration(self.state, target) else {
            return Err(LifecycleError::IllegalEdge {
                from: self.state,
                to: target,
            });
        };
        let need = table
            .footprint(self.state, req)
            .max(table.footprint(target, req));
        // The instance already holds footprint(state); reserve only the gap.
        let extra = need
            .checked_minus(self.held)
            .expect("held resources exceed reserve-ahead footprint");
        ec.reserve(extra)
            .map_err(|free| LifecycleError::InsufficientResources { free, needed: extra })?;
        self.held = need;
        let completion_time = now + duration;
        self.in_flight = Some(InFlight {
            target,
            completion_time,
        });
        Ok(completion_time)
    }

    /// Finish the in-flight transition: adopt the target state and release
    /// the share of the reserve-ahead holding the new state does not use.
    pub fn complete_transition(
        &mut self,
        now: f64,
        req: ResourceVector,
        table: &TransitionTable,
        ec: &mut EdgeCloud,
    ) -> Result<(), LifecycleError> {
        let Some(f) = self.in_flight else {
            return Err(LifecycleError::NothingInFlight);
        };
        if now < f.completion_time {
            return Err(LifecycleError::PrematureCompletion {
                now,
                completion_time: f.completion_time,
            });
        }
        self.state = f.target;
        self.in_flight = None;
        let keep = table.footprint(self.state, req);
        let surplus = self
            .held
            .checked_minus(keep)
            .expect("state footprint exceeds reserve-ahead holding");
        ec.release(surplus);
        self.held = keep;
        Ok(())
    }
}
