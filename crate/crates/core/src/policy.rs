//! Placement planning: demand probabilities per edge cloud, probability-to-
//! lifecycle-state thresholds, and the shared distance-first-fit planner
//! behind the proactive policy and its two baselines.
//!
//! Planning walks chains layer-wise from the tail: the deepest layer of
//! every chain is placed before any shallower layer, at the furthest
//! multiplexing-layer cloud that still meets the latency budget. Heads stay
//! mobile: they are replicated across base-station clouds at a readiness
//! band driven by each station's demand probability. Capacity is tracked in
//! a planning ledger of end-state footprints; the runtime re-checks every
//! transition against live cloud accounting when it begins.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::forecast::Forecast;
use crate::lifecycle::{LifecycleState, TransitionTable};
use crate::queueing::{md1_sojourn, mm1_sojourn, wireless_rate, DelayParams};
use crate::topology::{LinkKind, ResourceVector, SubstrateNetwork};
use crate::types::{NodeId, SfcTypeId, UserId, VnfTypeId};

use LifecycleState::*;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no forecast for user {user} covering bs {bs}")]
    MissingForecast { user: UserId, bs: NodeId },
    #[error("thresholds must satisfy 1 > run > stage > fetch > 0, got ({run}, {stage}, {fetch})")]
    BadThresholds { run: f64, stage: f64, fetch: f64 },
    #[error("sfc {0} has no definition")]
    UnknownSfc(SfcTypeId),
}

/// One user's chain of VNF types, head first.
#[derive(Debug, Clone, PartialEq)]
pub struct SfcRequest {
    pub id: SfcTypeId,
    pub vnfs: Vec<VnfTypeId>,
    /// End-to-end delay budget in seconds.
    pub e2e_limit: f64,
    /// Processing time of each VNF in the chain, seconds.
    pub vnf_proc: f64,
}

/// Probability cutpoints mapping demand likelihood to a readiness band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifecycleThresholds {
    pub theta_run: f64,
    pub theta_stage: f64,
    pub theta_fetch: f64,
}

impl LifecycleThresholds {
    pub fn new(run: f64, stage: f64, fetch: f64) -> Result<Self, PolicyError> {
        if 1.0 > run && run > stage && stage > fetch && fetch > 0.0 {
            Ok(Self {
                theta_run: run,
                theta_stage: stage,
                theta_fetch: fetch,
            })
        } else {
            Err(PolicyError::BadThresholds { run, stage, fetch })
        }
    }
}

impl Default for LifecycleThresholds {
    fn default() -> Self {
        Self {
            theta_run: 0.6,
            theta_stage: 0.3,
            theta_fetch: 0.1,
        }
    }
}

/// Readiness band for a demand probability; all bounds closed from below.
pub fn target_state(p: f64, t: &LifecycleThresholds) -> LifecycleState {
    if p >= t.theta_run {
        Running
    } else if p >= t.theta_stage {
        Stopped
    } else if p >= t.theta_fetch {
        Image
    } else {
        Descriptor
    }
}

/// Probability that at least one of the given users connects to `bs` within
/// the horizon: the complement of every one of them staying away.
pub fn vnf_demand_prob(
    bs: NodeId,
    users_requiring: &BTreeSet<UserId>,
    forecasts: &BTreeMap<UserId, Forecast>,
) -> Result<f64, PolicyError> {
    let mut all_away = 1.0;
    for &user in users_requiring {
        let f = forecasts
            .get(&user)
            .ok_or(PolicyError::MissingForecast { user, bs })?;
        let nc = f
            .no_connect
            .get(&bs)
            .ok_or(PolicyError::MissingForecast { user, bs })?;
        all_away *= nc;
    }
    Ok(1.0 - all_away)
}

/// Demand probability at a multiplexing-layer cloud: the complement of no
/// served base station seeing demand.
pub fn mux_demand_prob(per_bs_probs: &[f64]) -> f64 {
    1.0 - per_bs_probs.iter().map(|p| 1.0 - p).product::<f64>()
}

/// One planned end state with the probability that drove it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanTarget {
    pub state: LifecycleState,
    pub probability: f64,
}

/// Desired end states for every instance the plan touches, plus the chains
/// that could not meet their latency budget at any candidate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlacementPlan {
    pub targets: BTreeMap<(VnfTypeId, NodeId), PlanTarget>,
    pub infeasible: Vec<SfcTypeId>,
}

/// Everything the planner needs beyond the demand signal itself.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub net: &'a SubstrateNetwork,
    pub sfcs: &'a BTreeMap<SfcTypeId, SfcRequest>,
    /// Which chain each user runs.
    pub users: &'a BTreeMap<UserId, SfcTypeId>,
    /// Effective lifecycle state of every existing instance (the in-flight
    /// target while a transition runs).
    pub current: &'a BTreeMap<(VnfTypeId, NodeId), LifecycleState>,
    pub thresholds: &'a LifecycleThresholds,
    pub table: &'a TransitionTable,
    /// Per-VNF resource requirement.
    pub requirement: ResourceVector,
    pub delay: &'a DelayParams,
}

/// The proactive planner: demand comes from horizon forecasts.
pub fn ripple_plan(
    ctx: &PlanningContext,
    forecasts: &BTreeMap<UserId, Forecast>,
) -> Result<PlacementPlan, PolicyError> {
    dff_plan(ctx, forecasts)
}

/// Baseline decision rule: demand is a point mass at each user's realized
/// attachment. The idealized baseline applies the result with zero-duration
/// transitions; the reactive baseline applies it with the realistic table.
pub fn ideal_plan(
    ctx: &PlanningContext,
    attachments: &BTreeMap<UserId, NodeId>,
) -> Result<PlacementPlan, PolicyError> {
    dff_plan(ctx, &point_mass_forecasts(ctx.net, attachments))
}

/// Identical decision rule to [`ideal_plan`]; the difference is when the
/// engine invokes it and which transition table applies.
pub fn reactive_plan(
    ctx: &PlanningContext,
    attachments: &BTreeMap<UserId, NodeId>,
) -> Result<PlacementPlan, PolicyError> {
    ideal_plan(ctx, attachments)
}

/// Degenerate forecasts encoding certainty about the current attachment.
pub fn point_mass_forecasts(
    net: &SubstrateNetwork,
    attachments: &BTreeMap<UserId, NodeId>,
) -> BTreeMap<UserId, Forecast> {
    attachments
        .iter()
        .map(|(&user, &bs)| {
            let no_connect = net
                .base_stations()
                .iter()
                .map(|&b| (b, if b == bs { 0.0 } else { 1.0 }))
                .collect();
            (
                user,
                Forecast {
                    user,
                    horizon_h: 0.0,
                    no_connect,
                    predicted_positions: Vec::new(),
                },
            )
        })
        .collect()
}

// ── planning ledger ──────────────────────────────────────────────────────

/// End-state resource bookkeeping during planning. Every existing instance
/// starts at the footprint it would keep if the plan ignored it (its parked
/// floor); placements replace entries, evictions zero them.
struct Ledger<'a> {
    net: &'a SubstrateNetwork,
    used: BTreeMap<NodeId, ResourceVector>,
    entries: BTreeMap<(VnfTypeId, NodeId), ResourceVector>,
}

impl<'a> Ledger<'a> {
    fn new(net: &'a SubstrateNetwork) -> Self {
        Self {
            net,
            used: BTreeMap::new(),
            entries: BTreeMap::new(),
        }
    }

    fn used_at(&self, cloud: NodeId) -> ResourceVector {
        self.used.get(&cloud).copied().unwrap_or(ResourceVector::ZERO)
    }

    fn free_at(&self, cloud: NodeId) -> ResourceVector {
        self.net
            .edge_cloud(cloud)
            .capacity
            .checked_minus(self.used_at(cloud))
            .unwrap_or(ResourceVector::ZERO)
    }

    /// Whether replacing `key`'s entry with `fp` keeps the cloud within
    /// capacity.
    fn fits(&self, key: (VnfTypeId, NodeId), fp: ResourceVector) -> bool {
        let cloud = key.1;
        let old = self.entries.get(&key).copied().unwrap_or(ResourceVector::ZERO);
        let after = self
            .used_at(cloud)
            .checked_minus(old)
            .expect("ledger entry exceeds cloud usage")
            .plus(fp);
        after.fits_within(self.net.edge_cloud(cloud).capacity)
    }

    fn set(&mut self, key: (VnfTypeId, NodeId), fp: ResourceVector) {
        debug_assert!(self.fits(key, fp));
        let cloud = key.1;
        let old = self.entries.insert(key, fp).unwrap_or(ResourceVector::ZERO);
        let used = self
            .used_at(cloud)
            .checked_minus(old)
            .expect("ledger entry exceeds cloud usage")
            .plus(fp);
        self.used.insert(cloud, used);
    }

    fn remove(&mut self, key: (VnfTypeId, NodeId)) {
        if let Some(old) = self.entries.remove(&key) {
            let used = self
                .used_at(key.1)
                .checked_minus(old)
                .expect("ledger entry exceeds cloud usage");
            self.used.insert(key.1, used);
        }
    }
}

/// Footprint an unclaimed instance will keep if the plan never mentions it:
/// fetch-band instances delete down to the descriptor, a paused instance
/// stays parked, and a running one is assumed to stop (it may be upgraded
/// to paused later if memory is still free).
fn parked_floor(
    state: LifecycleState,
    table: &TransitionTable,
    req: ResourceVector,
) -> ResourceVector {
    match state {
        Descriptor | Source | Image | Stopped => ResourceVector::ZERO,
        Paused => table.footprint(Paused, req),
        Running => table.footprint(Stopped, req),
    }
}

// ── the shared distance-first-fit planner ────────────────────────────────

struct Planner<'a> {
    ctx: &'a PlanningContext<'a>,
    ledger: Ledger<'a>,
    targets: BTreeMap<(VnfTypeId, NodeId), PlanTarget>,
    /// Existing instances not yet claimed by a placement this round.
    remaining: BTreeMap<(VnfTypeId, NodeId), LifecycleState>,
    /// Keys committed per chain, for rollback when a chain turns infeasible.
    claims: BTreeMap<(VnfTypeId, NodeId), u32>,
    min_wired_mu: f64,
}

fn dff_plan(
    ctx: &PlanningContext,
    forecasts: &BTreeMap<UserId, Forecast>,
) -> Result<PlacementPlan, PolicyError> {
    let mut planner = Planner::new(ctx);
    planner.run(forecasts)
}

impl<'a> Planner<'a> {
    fn new(ctx: &'a PlanningContext<'a>) -> Self {
        let mut ledger = Ledger::new(ctx.net);
        for (&key, &state) in ctx.current {
            ledger.set(key, parked_floor(state, ctx.table, ctx.requirement));
        }
        let min_wired_mu = ctx
            .net
            .links()
            .iter()
            .filter(|l| l.kind == LinkKind::Wired)
            .map(|l| l.service_rate_mu)
            .fold(f64::INFINITY, f64::min);
        Self {
            ctx,
            ledger,
            targets: BTreeMap::new(),
            remaining: ctx.current.clone(),
            claims: BTreeMap::new(),
            min_wired_mu,
        }
    }

    fn run(
        &mut self,
        forecasts: &BTreeMap<UserId, Forecast>,
    ) -> Result<PlacementPlan, PolicyError> {
        let ctx = self.ctx;
        // Users sharing a chain type drive the same per-BS demand signal;
        // a VNF shared across chain types sees the union of their users.
        let mut users_of_vnf: BTreeMap<VnfTypeId, BTreeSet<UserId>> = BTreeMap::new();
        for (&user, &sfc_id) in ctx.users {
            let sfc = ctx.sfcs.get(&sfc_id).ok_or(PolicyError::UnknownSfc(sfc_id))?;
            for &v in &sfc.vnfs {
                users_of_vnf.entry(v).or_default().insert(user);
            }
        }
        let all_vnfs: BTreeSet<VnfTypeId> = ctx
            .sfcs
            .values()
            .flat_map(|s| s.vnfs.iter().copied())
            .collect();
        let empty = BTreeSet::new();
        let mut p_vb: BTreeMap<VnfTypeId, BTreeMap<NodeId, f64>> = BTreeMap::new();
        for &v in &all_vnfs {
            let users = users_of_vnf.get(&v).unwrap_or(&empty);
            let mut per_bs = BTreeMap::new();
            for &b in ctx.net.base_stations() {
                per_bs.insert(b, vnf_demand_prob(b, users, forecasts)?);
            }
            p_vb.insert(v, per_bs);
        }

        let mut infeasible: BTreeSet<SfcTypeId> = BTreeSet::new();
        // Chosen clouds per chain, one slot per layer (None until placed).
        let mut chosen: BTreeMap<SfcTypeId, Vec<Option<NodeId>>> = ctx
            .sfcs
            .iter()
            .map(|(&id, s)| (id, vec![None; s.vnfs.len()]))
            .collect();

        // Deep layers first, deepest layer of every chain before any
        // shallower layer of any chain. Within a layer, every chain's
        // serving anchor is committed before any chain stages hedge
        // copies, so speculation never crowds out service.
        let max_len = ctx.sfcs.values().map(|s| s.vnfs.len()).max().unwrap_or(0);
        for layer in (1..max_len).rev() {
            for (&sfc_id, sfc) in ctx.sfcs {
                if layer >= sfc.vnfs.len() || infeasible.contains(&sfc_id) {
                    continue;
                }
                let v = sfc.vnfs[layer];
                let placed = self.anchor_deep(
                    sfc,
                    layer,
                    v,
                    &p_vb[&v],
                    chosen.get_mut(&sfc_id).unwrap(),
                );
                if !placed {
                    infeasible.insert(sfc_id);
                    self.rollback_chain(sfc);
                }
            }
            for (&sfc_id, sfc) in ctx.sfcs {
                if layer >= sfc.vnfs.len() || infeasible.contains(&sfc_id) {
                    continue;
                }
                let v = sfc.vnfs[layer];
                self.stage_deep(sfc, layer, v, &p_vb[&v], &chosen[&sfc_id]);
            }
        }
        // Heads at the base-station layer.
        for (&sfc_id, sfc) in ctx.sfcs {
            if infeasible.contains(&sfc_id) {
                continue;
            }
            let head = sfc.vnfs[0];
            for (&b, &p) in &p_vb[&head] {
                self.place_head(head, b, p);
            }
        }
        self.park_leftovers();
        Ok(PlacementPlan {
            targets: std::mem::take(&mut self.targets),
            infeasible: infeasible.into_iter().collect(),
        })
    }

    /// Zero-load delay of a chain walk with the given wired hop count.
    fn walk_delay(&self, wired_hops: u32, sfc: &SfcRequest) -> f64 {
        let d = self.ctx.delay;
        mm1_sojourn(0.0, wireless_rate(d.d_ref, d))
            + wired_hops as f64 * md1_sojourn(0.0, self.min_wired_mu)
            + d.t_p * (wired_hops + 1) as f64
            + sfc.vnf_proc * sfc.vnfs.len() as f64
    }

    /// Wired hops of the nominal walk: worst served BS up to `cloud`, then
    /// along the already-chosen deeper clouds.
    fn walk_hops(&self, cloud: NodeId, deeper: &[Option<NodeId>]) -> u32 {
        let net = self.ctx.net;
        let access = net
            .attached_base_stations(cloud)
            .iter()
            .map(|&b| net.hop_distance(b, cloud))
            .max()
            .unwrap_or(0);
        let mut hops = access;
        let mut at = cloud;
        for c in deeper.iter().flatten() {
            hops += net.hop_distance(at, *c);
            at = *c;
        }
        hops
    }

    /// Place one deep-layer VNF at the furthest latency-feasible candidate
    /// with first-fit on capacity. Returns false when no candidate meets
    /// Latency-feasible deep candidates for one layer, sorted furthest
    /// first (probability-weighted expected hop distance from the stations
    /// generating demand), then most free resources, then lowest id.
    /// Candidates below the fetch threshold warrant no preparation and are
    /// dropped before the latency filter; the first bool reports whether
    /// any demand cleared that threshold at all.
    fn deep_candidates(
        &self,
        sfc: &SfcRequest,
        layer: usize,
        per_bs: &BTreeMap<NodeId, f64>,
        chain_slots: &[Option<NodeId>],
    ) -> (bool, Vec<(NodeId, f64)>) {
        let ctx = self.ctx;
        let net = ctx.net;
        let mut scored: Vec<(NodeId, f64, f64)> = net
            .mux_layer()
            .iter()
            .map(|&c| {
                let served = net.attached_base_stations(c);
                let probs: Vec<f64> = served.iter().map(|b| per_bs[b]).collect();
                let p_e = mux_demand_prob(&probs);
                let weight: f64 = per_bs.values().sum();
                let exp_hops = if weight > 0.0 {
                    per_bs
                        .iter()
                        .map(|(&b, &p)| p * net.hop_distance(b, c) as f64)
                        .sum::<f64>()
                        / weight
                } else {
                    0.0
                };
                (c, p_e, exp_hops)
            })
            .filter(|&(_, p_e, _)| p_e >= ctx.thresholds.theta_fetch)
            .collect();
        if scored.is_empty() {
            return (false, Vec::new());
        }
        scored.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| {
                    let fa = self.ledger.free_at(a.0);
                    let fb = self.ledger.free_at(b.0);
                    (fb.cpu + fb.memory + fb.disk).cmp(&(fa.cpu + fa.memory + fa.disk))
                })
                .then_with(|| a.0.cmp(&b.0))
        });
        let deeper = &chain_slots[layer + 1..];
        let feasible = scored
            .iter()
            .filter(|(c, _, _)| self.walk_delay(self.walk_hops(*c, deeper), sfc) <= sfc.e2e_limit)
            .map(|&(c, p_e, _)| (c, p_e))
            .collect();
        (true, feasible)
    }

    /// Commit the serving copy of one deep-layer VNF at the furthest
    /// latency-feasible candidate with first-fit on capacity. Returns false
    /// when no candidate meets the latency budget at all.
    fn anchor_deep(
        &mut self,
        sfc: &SfcRequest,
        layer: usize,
        v: VnfTypeId,
        per_bs: &BTreeMap<NodeId, f64>,
        chain_slots: &mut [Option<NodeId>],
    ) -> bool {
        let (any_demand, feasible) = self.deep_candidates(sfc, layer, per_bs, chain_slots);
        if !any_demand {
            // No demand anywhere worth preparing for; the layer stays
            // unplaced without making the chain infeasible.
            return true;
        }
        if feasible.is_empty() {
            return false;
        }
        // First pass at the full computed band, then allow degraded bands
        // so capacity pressure stages rather than abandons.
        for degrade in [false, true] {
            for &(c, p_e) in &feasible {
                let band = target_state(p_e, self.ctx.thresholds);
                let bands: Vec<LifecycleState> = if degrade {
                    [Running, Stopped, Image]
                        .into_iter()
                        .filter(|s| *s <= band)
                        .collect()
                } else {
                    vec![band]
                };
                for try_band in bands {
                    if self.try_fit((v, c), try_band, p_e, true) {
                        chain_slots[layer] = Some(c);
                        return true;
                    }
                }
            }
        }
        // Latency-feasible candidates exist but none has room even for a
        // staged copy; anchor the walk at the first feasible candidate and
        // leave the layer unplaced (packets will fail until room appears).
        chain_slots[layer] = Some(feasible[0].0);
        true
    }

    /// Stage hedge copies of one deep-layer VNF at every latency-feasible
    /// candidate besides the anchor, each at the band its own aggregated
    /// demand earns. Staging is opportunistic: it never evicts and never
    /// makes a chain infeasible, it just keeps likely branches prepared so
    /// a handover finds the layer part-way up the lifecycle.
    fn stage_deep(
        &mut self,
        sfc: &SfcRequest,
        layer: usize,
        v: VnfTypeId,
        per_bs: &BTreeMap<NodeId, f64>,
        chain_slots: &[Option<NodeId>],
    ) {
        let (_, feasible) = self.deep_candidates(sfc, layer, per_bs, chain_slots);
        for &(c, p_e) in &feasible {
            if chain_slots[layer] == Some(c) {
                continue;
            }
            let band = target_state(p_e, self.ctx.thresholds);
            for try_band in [Running, Stopped, Image] {
                if try_band > band {
                    continue;
                }
                if self.try_fit((v, c), try_band, p_e, false) {
                    break;
                }
            }
        }
    }

    /// Place or demote one head replica at one base station.
    fn place_head(&mut self, head: VnfTypeId, bs: NodeId, p: f64) {
        let band = target_state(p, self.ctx.thresholds);
        let key = (head, bs);
        let exists = self.ctx.current.contains_key(&key);
        if band == Descriptor {
            if exists {
                // Demand fell below the fetch threshold: delete.
                self.commit(key, Descriptor, p);
            }
            return;
        }
        // Degrade band by band under capacity pressure; the descriptor
        // fallback always fits.
        for try_band in [Running, Stopped, Image] {
            if try_band > band {
                continue;
            }
            if self.try_fit(key, try_band, p, true) {
                return;
            }
        }
        if exists {
            self.commit(key, Descriptor, p);
        }
    }

    /// Try to commit `key` at `band` (ratcheted up to any existing state),
    /// evicting unwanted holdings at the cloud if needed. Returns whether
    /// the placement fit.
    fn try_fit(&mut self, key: (VnfTypeId, NodeId), band: LifecycleState, p: f64, evict: bool) -> bool {
        let ctx = self.ctx;
        // An instance already at or beyond the band is left untouched.
        let desired = match ctx.current.get(&key) {
            Some(&existing) if existing > band => existing,
            _ => band,
        };
        let fp = ctx.table.footprint(desired, ctx.requirement);
        loop {
            if self.ledger.fits(key, fp) {
                self.commit(key, desired, p);
                return true;
            }
            if !evict {
                return false;
            }
            let Some(victim) = self.next_victim(key.1, key) else {
                return false;
            };
            // Unwanted holdings are deleted outright under pressure.
            self.commit(victim, Descriptor, 0.0);
        }
    }

    /// The next evictable instance at `cloud`: unclaimed, still holding
    /// ledger resources, highest vnf id first.
    fn next_victim(
        &self,
        cloud: NodeId,
        exclude: (VnfTypeId, NodeId),
    ) -> Option<(VnfTypeId, NodeId)> {
        self.remaining
            .keys()
            .rev()
            .find(|&&(v, c)| {
                c == cloud
                    && (v, c) != exclude
                    && self
                        .ledger
                        .entries
                        .get(&(v, c))
                        .is_some_and(|fp| *fp != ResourceVector::ZERO)
            })
            .copied()
    }

    fn commit(&mut self, key: (VnfTypeId, NodeId), state: LifecycleState, p: f64) {
        let fp = self.ctx.table.footprint(state, self.ctx.requirement);
        self.ledger.set(key, fp);
        match self.targets.entry(key) {
            // A VNF shared across chains keeps its strongest claim.
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let t = e.get_mut();
                if state > t.state || (state == t.state && p > t.probability) {
                    *t = PlanTarget {
                        state,
                        probability: p,
                    };
                }
                *self.claims.entry(key).or_insert(0) += 1;
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(PlanTarget {
                    state,
                    probability: p,
                });
                *self.claims.entry(key).or_insert(0) += 1;
            }
        }
        self.remaining.remove(&key);
    }

    /// Undo this chain's deep placements after it turned out infeasible.
    fn rollback_chain(&mut self, sfc: &SfcRequest) {
        for &v in &sfc.vnfs {
            let keys: Vec<(VnfTypeId, NodeId)> = self
                .targets
                .keys()
                .filter(|&&(tv, _)| tv == v)
                .copied()
                .collect();
            for key in keys {
                let c = self.claims.get_mut(&key).expect("target without claim");
                *c -= 1;
                if *c > 0 {
                    continue; // another chain still wants it
                }
                self.claims.remove(&key);
                self.targets.remove(&key);
                match self.ctx.current.get(&key) {
                    Some(&state) => {
                        self.ledger
                            .set(key, parked_floor(state, self.ctx.table, self.ctx.requirement));
                        self.remaining.insert(key, state);
                    }
                    None => self.ledger.remove(key),
                }
            }
        }
    }

    /// Final end states for instances nothing claimed: pause what was
    /// running if memory is still free (else stop it), keep parked paused
    /// instances, and delete fetch-band leftovers.
    fn park_leftovers(&mut self) {
        let leftovers: Vec<((VnfTypeId, NodeId), LifecycleState)> = self
            .remaining
            .iter()
            .map(|(&k, &s)| (k, s))
            .collect();
        for (key, state) in leftovers {
            let parked = match state {
                Running => {
                    let paused_fp = self.ctx.table.footprint(Paused, self.ctx.requirement);
                    if self.ledger.fits(key, paused_fp) {
                        Paused
                    } else {
                        Stopped
                    }
                }
                Paused => Paused,
                _ => Descriptor,
            };
            self.commit(key, parked, 0.0);
        }
    }
}

// ── independent plan validation ──────────────────────────────────────────

/// Re-check an emitted plan from scratch: one target per (vnf, cloud) is
/// structural; end-state footprints must fit every cloud's capacity;
/// base-station clouds may host nothing deeper than chain heads.
pub fn validate_plan(
    plan: &PlacementPlan,
    net: &SubstrateNetwork,
    sfcs: &BTreeMap<SfcTypeId, SfcRequest>,
    table: &TransitionTable,
    requirement: ResourceVector,
) -> Result<(), String> {
    let heads: BTreeSet<VnfTypeId> = sfcs.values().map(|s| s.vnfs[0]).collect();
    let bs_set: BTreeSet<NodeId> = net.base_stations().iter().copied().collect();
    let mut used: BTreeMap<NodeId, ResourceVector> = BTreeMap::new();
    for (&(v, c), t) in &plan.targets {
        if !(0.0..=1.0).contains(&t.probability) {
            return Err(format!("target ({v},{c}) probability {} out of range", t.probability));
        }
        if bs_set.contains(&c) && t.state > Descriptor && !heads.contains(&v) {
            return Err(format!("non-head vnf {v} targeted {} at base station {c}", t.state));
        }
        let u = used.entry(c).or_insert(ResourceVector::ZERO);
        *u = u.plus(table.footprint(t.state, requirement));
    }
    for (c, u) in used {
        let cap = net.edge_cloud(c).capacity;
        if !u.fits_within(cap) {
            return Err(format!("cloud {c} planned usage {u:?} exceeds capacity {cap:?}"));
        }
    }
    Ok(())
}
