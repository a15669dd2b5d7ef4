//! The deterministic event-driven simulator.
//!
//! One run takes a scenario plus a seed and plays out user motion, periodic
//! placement planning, lifecycle transitions with reserve-ahead resource
//! accounting, and Poisson packet arrivals classified against the
//! end-to-end delay budget. Determinism is bit-exact: every random draw
//! comes from a per-purpose, per-user ChaCha stream derived from the master
//! seed, all map iteration is ordered, and ties in event time resolve by a
//! fixed priority then insertion order.

pub mod metrics;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::forecast::{no_connect_over_horizon, Forecast, PredictorKind};
use crate::lifecycle::{
    zeroed_transition_table, LifecycleError, LifecycleState, TransitionTable, VnfInstance,
};
use crate::linkmap::{embed_links, Embedding, LinkmapError};
use crate::mobility::{step_user, ConnectionModel};
use crate::policy::{ideal_plan, reactive_plan, ripple_plan, validate_plan, PlanningContext};
use crate::queueing::{e2e_delay, INFINITE_DELAY};
use crate::scenario::{Materialized, PolicyKind, Scenario, ScenarioError};
use crate::topology::ResourceVector;
use crate::types::{NodeId, SfcTypeId, UserId, Vec2, VnfTypeId};

use self::metrics::{
    burst_lengths, MetricsReport, PacketOutcome, PacketRecord, RunOutput, TransitionRecord,
    UserMetrics,
};

/// Resource demand of a single VNF instance, uniform across types.
pub const VNF_REQUIREMENT: ResourceVector = ResourceVector::new(1, 1, 1);

// ── events ───────────────────────────────────────────────────────────────
// Priorities order same-time events: completions land before the tick that
// observes them, the tick updates attachments before any planning at that
// instant, and packets always see the settled state of the world.

const PRIO_LIFECYCLE_COMPLETE: u8 = 0;
const PRIO_MOBILITY_TICK: u8 = 1;
const PRIO_DECISION_EPOCH: u8 = 2;
const PRIO_PACKET_ARRIVAL: u8 = 3;

#[derive(Debug, Clone, Copy)]
enum EventKind {
    LifecycleComplete { key: (VnfTypeId, NodeId) },
    MobilityTick { index: usize },
    DecisionEpoch,
    PacketArrival { user: usize },
}

#[derive(Debug)]
struct Event {
    time: f64,
    priority: u8,
    seq: u64,
    kind: EventKind,
}

// Reversed comparisons turn the std max-heap into the min-heap we need.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.priority.cmp(&self.priority))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl Eq for Event {}

// ── seed streams ─────────────────────────────────────────────────────────
// Independent substreams per purpose and user, so adding a user or drawing
// more packets never perturbs anyone else's randomness.

const STREAM_TRACE: u64 = 1;
const STREAM_CONNECT: u64 = 2;
const STREAM_PACKETS: u64 = 3;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_seed(master: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ purpose) ^ index)
}

// ── simulator state ──────────────────────────────────────────────────────

/// A lifecycle instance plus the state the last plan asked of it. The
/// probability orders promotions when several instances compete for the
/// same freed resources.
#[derive(Debug)]
struct ManagedInstance {
    inst: VnfInstance,
    desired: LifecycleState,
    probability: f64,
}

#[derive(Debug)]
struct UserRt {
    id: UserId,
    sfc: SfcTypeId,
    lambda_u: f64,
    position: Vec2,
    attached: NodeId,
}

struct Sim<'a> {
    sc: &'a Scenario,
    m: Materialized,
    /// Table the planner reasons with (always the realistic durations).
    plan_table: TransitionTable,
    /// Table transitions actually run under; zeroed for the idealized
    /// baseline so its embeddings complete instantaneously.
    apply_table: TransitionTable,
    t_end: f64,
    tick: f64,
    num_ticks: usize,
    cur_tick: usize,
    now: f64,
    seq: u64,
    heap: BinaryHeap<Event>,
    users: Vec<UserRt>,
    /// Realized trace per user: index i is the position at time i·tick,
    /// extended past the run end so horizon forecasts never starve.
    positions: Vec<Vec<Vec2>>,
    /// Realized attachment per user for ticks 0..=num_ticks.
    attachments: Vec<Vec<NodeId>>,
    instances: BTreeMap<(VnfTypeId, NodeId), ManagedInstance>,
    /// Cached chain embedding per user, rebuilt lazily when marked dirty.
    embeddings: Vec<Result<Embedding, LinkmapError>>,
    dirty: bool,
    epoch_pending: bool,
    packet_rngs: Vec<ChaCha8Rng>,
    interarrival: Vec<Exp<f64>>,
    /// Per-user `(arrival time, success)` log in arrival order.
    user_logs: Vec<Vec<(f64, bool)>>,
    packets: Vec<PacketRecord>,
    transitions: Vec<TransitionRecord>,
    prep_counts: BTreeMap<(LifecycleState, LifecycleState), u64>,
}

/// Simulate `sc` under one master seed.
pub fn run(sc: &Scenario, seed: u64) -> Result<RunOutput, ScenarioError> {
    Sim::new(sc, seed)?.run()
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, seed: u64) -> Result<Self, ScenarioError> {
        let mut m = sc.materialize()?;
        let t_end = sc.duration;
        let tick = m.mobility.tick;

        // Largest i with i·tick ≤ t_end, computed without float floor wobble.
        let mut num_ticks = 0usize;
        while (num_ticks + 1) as f64 * tick <= t_end {
            num_ticks += 1;
        }
        let horizon_ticks = (sc.horizon_h / tick).ceil() as usize;

        // Realize every user's whole trace up front: motion is independent
        // of the system state, and the oracle predictor reads the future.
        let conn = ConnectionModel::new(sc.softness);
        let mut positions = Vec::with_capacity(m.users.len());
        let mut attachments = Vec::with_capacity(m.users.len());
        for (u, setup) in m.users.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_TRACE, u as u64));
            let mut trace = Vec::with_capacity(num_ticks + horizon_ticks + 1);
            let (mut pos, mut speed, mut dir) = (
                setup.start,
                m.mobility.mean_speed,
                m.mobility.mean_direction,
            );
            trace.push(pos);
            for _ in 0..num_ticks + horizon_ticks {
                let (p, s, d) = step_user(pos, speed, dir, &m.mobility, &mut rng);
                (pos, speed, dir) = (p, s, d);
                trace.push(pos);
            }
            let mut conn_rng =
                ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_CONNECT, u as u64));
            let attach: Vec<NodeId> = trace[..=num_ticks]
                .iter()
                .map(|&p| conn.realize(p, &m.net, &mut conn_rng))
                .collect();
            positions.push(trace);
            attachments.push(attach);
        }

        let users: Vec<UserRt> = m
            .users
            .iter()
            .enumerate()
            .map(|(u, setup)| UserRt {
                id: setup.id,
                sfc: setup.sfc,
                lambda_u: setup.lambda_u,
                position: positions[u][0],
                attached: attachments[u][0],
            })
            .collect();

        let packet_rngs: Vec<ChaCha8Rng> = (0..users.len())
            .map(|u| ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_PACKETS, u as u64)))
            .collect();
        let mut interarrival = Vec::with_capacity(users.len());
        for rt in &users {
            let exp = Exp::new(rt.lambda_u)
                .map_err(|e| invalid("users.lambda", format!("rate {}: {e:?}", rt.lambda_u)))?;
            interarrival.push(exp);
        }

        // Pre-run deployments reserve their footprints immediately.
        let mut instances = BTreeMap::new();
        for &(vnf, node, state) in &sc.deployments {
            if node.0 as usize >= m.net.nodes().len() {
                return Err(invalid("deploy", format!("unknown node {node}")));
            }
            let key = (vnf, node);
            if instances.contains_key(&key) {
                return Err(invalid("deploy", format!("duplicate instance ({vnf}, {node})")));
            }
            let inst = VnfInstance::deployed(
                vnf,
                node,
                state,
                VNF_REQUIREMENT,
                &m.table,
                m.net.edge_cloud_mut(node),
            )
            .map_err(|e| invalid("deploy", e.to_string()))?;
            instances.insert(
                key,
                ManagedInstance {
                    inst,
                    desired: state,
                    probability: 1.0,
                },
            );
        }

        let apply_table = match sc.policy {
            PolicyKind::Ideal => zeroed_transition_table(),
            _ => m.table.clone(),
        };
        let plan_table = m.table.clone();
        let num_users = users.len();

        let mut sim = Sim {
            sc,
            m,
            plan_table,
            apply_table,
            t_end,
            tick,
            num_ticks,
            cur_tick: 0,
            now: 0.0,
            seq: 0,
            heap: BinaryHeap::new(),
            users,
            positions,
            attachments,
            instances,
            embeddings: Vec::new(),
            dirty: true,
            epoch_pending: false,
            packet_rngs,
            interarrival,
            user_logs: vec![Vec::new(); num_users],
            packets: Vec::new(),
            transitions: Vec::new(),
            prep_counts: BTreeMap::new(),
        };

        sim.epoch_pending = true;
        sim.push(0.0, PRIO_DECISION_EPOCH, EventKind::DecisionEpoch);
        for i in 1..=sim.num_ticks {
            let t = i as f64 * sim.tick;
            sim.push(t, PRIO_MOBILITY_TICK, EventKind::MobilityTick { index: i });
            // The proactive policy replans every tick; baselines replan only
            // on handovers, scheduled as they happen.
            if sim.sc.policy == PolicyKind::Ripple {
                sim.push(t, PRIO_DECISION_EPOCH, EventKind::DecisionEpoch);
            }
        }
        for u in 0..num_users {
            let gap = sim.interarrival[u].sample(&mut sim.packet_rngs[u]);
            if gap <= sim.t_end {
                sim.push(gap, PRIO_PACKET_ARRIVAL, EventKind::PacketArrival { user: u });
            }
        }
        Ok(sim)
    }

    fn push(&mut self, time: f64, priority: u8, kind: EventKind) {
        debug_assert!(time >= self.now, "event scheduled in the past");
        self.seq += 1;
        self.heap.push(Event {
            time,
            priority,
            seq: self.seq,
            kind,
        });
    }

    fn run(mut self) -> Result<RunOutput, ScenarioError> {
        while let Some(ev) = self.heap.pop() {
            if ev.time > self.t_end {
                break;
            }
            debug_assert!(ev.time >= self.now, "event order violates causality");
            self.now = ev.time;
            match ev.kind {
                EventKind::LifecycleComplete { key } => self.handle_completion(key),
                EventKind::MobilityTick { index } => self.handle_tick(index),
                EventKind::DecisionEpoch => self.handle_epoch()?,
                EventKind::PacketArrival { user } => self.handle_arrival(user),
            }
        }
        Ok(self.finalize())
    }

    // ── lifecycle ────────────────────────────────────────────────────────

    fn handle_completion(&mut self, key: (VnfTypeId, NodeId)) {
        let (from, to) = {
            let mi = self
                .instances
                .get_mut(&key)
                .expect("completion event for a live instance");
            let from = mi.inst.state;
            let to = mi
                .inst
                .in_flight
                .expect("scheduled completion implies an in-flight transition")
                .target;
            let ec = self.m.net.edge_cloud_mut(key.1);
            mi.inst
                .complete_transition(self.now, VNF_REQUIREMENT, &self.apply_table, ec)
                .expect("scheduled completion is legal");
            (from, to)
        };
        *self.prep_counts.entry((from, to)).or_insert(0) += 1;
        self.transitions.push(TransitionRecord {
            time: self.now,
            vnf: key.0,
            cloud: key.1,
            from,
            to,
        });
        self.dirty = true;
        // Freed resources may unblock stalled promotions; multi-edge routes
        // continue here too.
        self.advance_instances();
    }

    /// Start the next route edge of every instance not yet at its desired
    /// state. Demotions go first (they release resources), then promotions
    /// in descending demand-probability order so the likeliest chains win
    /// contended capacity. Instances that cannot reserve right now simply
    /// stay put and are retried at the next completion or epoch.
    fn advance_instances(&mut self) {
        // Fully-demoted descriptors hold nothing and serve nothing: forget
        // them so the orchestrator's working set stays bounded.
        let dead: Vec<(VnfTypeId, NodeId)> = self
            .instances
            .iter()
            .filter(|(_, mi)| {
                mi.inst.state == LifecycleState::Descriptor
                    && mi.desired == LifecycleState::Descriptor
                    && mi.inst.in_flight.is_none()
            })
            .map(|(&k, _)| k)
            .collect();
        for k in dead {
            self.instances.remove(&k);
        }

        let mut demotions = Vec::new();
        let mut promotions = Vec::new();
        for (&k, mi) in &self.instances {
            if mi.inst.in_flight.is_some() || mi.inst.state == mi.desired {
                continue;
            }
            if mi.desired < mi.inst.state {
                demotions.push(k);
            } else {
                promotions.push((mi.probability, k));
            }
        }
        promotions.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for k in demotions {
            self.start_next_edge(k);
        }
        for (_, k) in promotions {
            self.start_next_edge(k);
        }
    }

    fn start_next_edge(&mut self, key: (VnfTypeId, NodeId)) {
        let completion = {
            let mi = self
                .instances
                .get_mut(&key)
                .expect("advancing a live instance");
            let route = self.apply_table.route_to(mi.inst.state, mi.desired);
            let Some(&(_, next)) = route.first() else {
                return;
            };
            let ec = self.m.net.edge_cloud_mut(key.1);
            match mi
                .inst
                .begin_transition(next, self.now, VNF_REQUIREMENT, &self.apply_table, ec)
            {
                Ok(t) => Some(t),
                Err(LifecycleError::InsufficientResources { .. }) => None,
                Err(e) => unreachable!("lifecycle route produced an illegal edge: {e}"),
            }
        };
        if let Some(t) = completion {
            self.push(t, PRIO_LIFECYCLE_COMPLETE, EventKind::LifecycleComplete { key });
        }
    }

    // ── mobility ─────────────────────────────────────────────────────────

    fn handle_tick(&mut self, index: usize) {
        self.cur_tick = index;
        let mut handover = false;
        for u in 0..self.users.len() {
            self.users[u].position = self.positions[u][index];
            let next = self.attachments[u][index];
            if next != self.users[u].attached {
                self.users[u].attached = next;
                handover = true;
            }
        }
        if handover {
            self.dirty = true;
            if self.sc.policy != PolicyKind::Ripple && !self.epoch_pending {
                self.epoch_pending = true;
                self.push(self.now, PRIO_DECISION_EPOCH, EventKind::DecisionEpoch);
            }
        }
    }

    // ── planning ─────────────────────────────────────────────────────────

    fn handle_epoch(&mut self) -> Result<(), ScenarioError> {
        self.epoch_pending = false;
        let current: BTreeMap<(VnfTypeId, NodeId), LifecycleState> = self
            .instances
            .iter()
            .map(|(&k, mi)| (k, mi.inst.effective_state()))
            .collect();
        let users_map: BTreeMap<UserId, SfcTypeId> =
            self.users.iter().map(|rt| (rt.id, rt.sfc)).collect();
        let ctx = PlanningContext {
            net: &self.m.net,
            sfcs: &self.m.sfcs,
            users: &users_map,
            current: &current,
            thresholds: &self.sc.thresholds,
            table: &self.plan_table,
            requirement: VNF_REQUIREMENT,
            delay: &self.sc.delay,
        };
        let plan = match self.sc.policy {
            PolicyKind::Ripple => {
                let forecasts = self.build_forecasts();
                ripple_plan(&ctx, &forecasts)
            }
            PolicyKind::Ideal => ideal_plan(&ctx, &self.attachment_map()),
            PolicyKind::Reactive => reactive_plan(&ctx, &self.attachment_map()),
        }
        .map_err(|e| invalid("policy", e.to_string()))?;
        debug_assert_eq!(
            validate_plan(&plan, &self.m.net, &self.m.sfcs, &self.plan_table, VNF_REQUIREMENT),
            Ok(()),
            "planner emitted an invalid placement"
        );
        debug_assert!(
            self.instances.keys().all(|k| plan.targets.contains_key(k)),
            "plan must cover every existing instance"
        );

        for (&key, target) in &plan.targets {
            match self.instances.get_mut(&key) {
                Some(mi) => {
                    mi.desired = target.state;
                    mi.probability = target.probability;
                }
                // A target that asks for a nonexistent instance to not exist
                // is a no-op; anything else births a descriptor to promote.
                None if target.state > LifecycleState::Descriptor => {
                    self.instances.insert(
                        key,
                        ManagedInstance {
                            inst: VnfInstance::new(key.0, key.1),
                            desired: target.state,
                            probability: target.probability,
                        },
                    );
                }
                None => {}
            }
        }
        self.dirty = true;
        self.advance_instances();
        Ok(())
    }

    /// Attachment-probability forecasts over the horizon for every user.
    /// With too little history for a velocity fit (at the very start of a
    /// run) the estimate degenerates to the current position.
    fn build_forecasts(&self) -> BTreeMap<UserId, Forecast> {
        let idx = self.cur_tick;
        let mut out = BTreeMap::new();
        for (u, rt) in self.users.iter().enumerate() {
            let observed = &self.positions[u][..=idx];
            let window = observed.len().min(self.sc.history_k.max(1));
            let history = &observed[observed.len() - window..];
            let future = &self.positions[u][idx + 1..];
            let fc = no_connect_over_horizon(
                rt.id,
                rt.position,
                history,
                future,
                &self.m.net,
                self.sc.horizon_h,
                self.tick,
                self.sc.predictor,
                self.sc.estimator_softness,
            )
            .or_else(|_| {
                no_connect_over_horizon(
                    rt.id,
                    rt.position,
                    history,
                    &[],
                    &self.m.net,
                    0.0,
                    self.tick,
                    PredictorKind::Oracle,
                    self.sc.estimator_softness,
                )
            })
            .expect("zero-horizon forecast cannot fail");
            out.insert(rt.id, fc);
        }
        out
    }

    fn attachment_map(&self) -> BTreeMap<UserId, NodeId> {
        self.users.iter().map(|rt| (rt.id, rt.attached)).collect()
    }

    // ── packets ──────────────────────────────────────────────────────────

    /// Rebuild chain embeddings and wired-link arrival rates from the
    /// current serving sets. An instance serves while it is Running with no
    /// transition in flight.
    fn refresh(&mut self) {
        if !self.dirty {
            return;
        }
        self.dirty = false;
        let mut running: BTreeMap<VnfTypeId, BTreeSet<NodeId>> = BTreeMap::new();
        for (&(v, c), mi) in &self.instances {
            if mi.inst.state == LifecycleState::Running && mi.inst.in_flight.is_none() {
                running.entry(v).or_default().insert(c);
            }
        }
        self.m.net.clear_link_lambdas();
        let mut embeddings = Vec::with_capacity(self.users.len());
        for rt in &self.users {
            let sfc = self
                .m
                .sfcs
                .get(&rt.sfc)
                .expect("user chain exists in the catalog");
            let emb = embed_links(rt.id, rt.attached, &sfc.vnfs, &self.m.net, &running);
            if let Ok(e) = &emb {
                for w in e.total_path.windows(2) {
                    self.m.net.add_link_lambda(w[0], w[1], rt.lambda_u);
                }
            }
            embeddings.push(emb);
        }
        self.embeddings = embeddings;
    }

    fn handle_arrival(&mut self, u: usize) {
        self.refresh();
        let (user_id, time) = (self.users[u].id, self.now);
        let (outcome, measured_delay) = match &self.embeddings[u] {
            // Some chain layer has no running instance: unsuccessful by
            // definition, before any delay is even measured.
            Err(_) => (PacketOutcome::NotRunning, INFINITE_DELAY),
            Ok(emb) => {
                let rt = &self.users[u];
                let sfc = &self.m.sfcs[&rt.sfc];
                let bs_pos = self
                    .m
                    .net
                    .node(rt.attached)
                    .position
                    .expect("base stations have positions");
                let mut params = self.sc.delay;
                params.vnf_proc = sfc.vnf_proc;
                let d = e2e_delay(
                    emb,
                    &self.m.net,
                    rt.lambda_u,
                    rt.position.distance_to(bs_pos),
                    &params,
                );
                if d <= sfc.e2e_limit {
                    (PacketOutcome::Success, d)
                } else {
                    (PacketOutcome::LateDelay, d)
                }
            }
        };
        self.packets.push(PacketRecord {
            user: user_id,
            time,
            outcome,
            measured_delay,
        });
        self.user_logs[u].push((time, outcome == PacketOutcome::Success));
        let gap = self.interarrival[u].sample(&mut self.packet_rngs[u]);
        let next = time + gap;
        if next <= self.t_end {
            self.push(next, PRIO_PACKET_ARRIVAL, EventKind::PacketArrival { user: u });
        }
    }

    // ── wrap-up ──────────────────────────────────────────────────────────

    fn finalize(self) -> RunOutput {
        let mut per_user = BTreeMap::new();
        let mut total_unsuccessful = 0u64;
        for (u, rt) in self.users.iter().enumerate() {
            let log = &self.user_logs[u];
            let total = log.len() as u64;
            let unsuccessful = log.iter().filter(|(_, ok)| !ok).count() as u64;
            total_unsuccessful += unsuccessful;
            let mean_gap = 1.0 / rt.lambda_u;
            per_user.insert(
                rt.id,
                UserMetrics {
                    total_packets: total,
                    unsuccessful_packets: unsuccessful,
                    unsuccessful_ratio: if total == 0 {
                        0.0
                    } else {
                        unsuccessful as f64 / total as f64
                    },
                    bursts: burst_lengths(log, mean_gap),
                    mean_interarrival: mean_gap,
                },
            );
        }
        let objective = if self.t_end > 0.0 {
            total_unsuccessful as f64 / self.t_end
        } else {
            0.0
        };
        RunOutput {
            report: MetricsReport {
                duration: self.t_end,
                per_user,
                vnf_prep_counts: self.prep_counts,
                objective,
            },
            packets: self.packets,
            transitions: self.transitions,
        }
    }
}
