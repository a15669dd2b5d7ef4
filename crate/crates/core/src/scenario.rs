//! Scenario configuration: a flat key-value text format describing the
//! substrate, users, chains, policy, forecasting, mobility, and run length,
//! plus assembly of those pieces into the structures the engine consumes.
//!
//! The format is line-oriented: `key = value` pairs, `#` comments, blank
//! lines ignored. Lifecycle overrides use `transition <from> <to> <seconds>`
//! lines. Every key has a default, so an empty file is a valid scenario
//! (the 16-station tree with four users). Unknown keys are errors so typos
//! cannot silently fall back to defaults.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::forecast::PredictorKind;
use crate::lifecycle::{default_transition_table, LifecycleState, TransitionTable};
use crate::mobility::GaussMarkovParams;
use crate::policy::{LifecycleThresholds, SfcRequest};
use crate::queueing::DelayParams;
use crate::topology::{
    build_city_grid, build_tree, grid_positions, ResourceVector, SubstrateNetwork,
    DEFAULT_WIRED_MU,
};
use crate::types::{NodeId, SfcTypeId, UserId, Vec2, VnfTypeId};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {field}: {message}")]
    Invalid { field: String, message: String },
}

/// Which decision rule drives placement and with which transition costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Forecast-driven planning at every decision epoch, realistic costs.
    Ripple,
    /// Point-mass planning at attachment changes with free transitions.
    Ideal,
    /// Point-mass planning at attachment changes with realistic costs.
    Reactive,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Ripple => "ripple",
            PolicyKind::Ideal => "ideal",
            PolicyKind::Reactive => "reactive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [PolicyKind::Ripple, PolicyKind::Ideal, PolicyKind::Reactive]
            .into_iter()
            .find(|k| k.label() == s)
    }
}

/// Substrate selection: the two builders or a topology file on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyConfig {
    Tree {
        num_bs: u32,
        num_mux: u32,
        bs_spacing: f64,
        capacity: ResourceVector,
    },
    CityGrid {
        rows: u32,
        cols: u32,
        bs_spacing: f64,
        capacity: ResourceVector,
    },
    File {
        path: String,
    },
}

/// Per-user overrides on top of the defaults derived from the counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserOverride {
    pub start: Option<Vec2>,
    pub sfc: Option<u32>,
    pub lambda: Option<f64>,
}

/// A fully-specified simulation input. All fields have defaults matching
/// the 16-station tree study; see the parser for the key names.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: TopologyConfig,
    /// Service rate applied to every wired link, packets/second.
    pub wired_mu: f64,
    pub num_users: u32,
    /// Per-user packet arrival rate, packets/second.
    pub lambda_u: f64,
    pub sfc_count: u32,
    pub sfc_length: u32,
    /// Per-VNF processing time, seconds.
    pub vnf_proc: f64,
    /// End-to-end delay budget, seconds.
    pub e2e_limit: f64,
    pub policy: PolicyKind,
    pub thresholds: LifecycleThresholds,
    pub predictor: PredictorKind,
    /// History window for the constant-velocity predictor.
    pub history_k: usize,
    /// Forecast horizon, seconds.
    pub horizon_h: f64,
    pub mobility: GaussMarkovParams,
    /// Explicit mobility bounds; derived from station positions when unset.
    pub bounds: Option<(Vec2, Vec2)>,
    /// Ground-truth attachment softness (0 = nearest station).
    pub softness: f64,
    /// Softness assumed by the planner's connection estimator.
    pub estimator_softness: f64,
    pub delay: DelayParams,
    /// Simulated time span, seconds.
    pub duration: f64,
    pub seeds: Vec<u64>,
    pub transition_overrides: Vec<(LifecycleState, LifecycleState, f64)>,
    /// Instances present before the run starts, e.g. a pre-warmed chain.
    pub deployments: Vec<(VnfTypeId, NodeId, LifecycleState)>,
    pub user_overrides: BTreeMap<u32, UserOverride>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::Tree {
                num_bs: 16,
                num_mux: 4,
                bs_spacing: 200.0,
                capacity: ResourceVector::new(5, 8, 10),
            },
            wired_mu: DEFAULT_WIRED_MU,
            num_users: 4,
            lambda_u: 100.0,
            sfc_count: 4,
            sfc_length: 4,
            vnf_proc: 1e-4,
            e2e_limit: 1e-3,
            policy: PolicyKind::Ripple,
            thresholds: LifecycleThresholds::default(),
            predictor: PredictorKind::Oracle,
            history_k: 5,
            horizon_h: 12.63,
            mobility: GaussMarkovParams::default(),
            bounds: None,
            softness: 50.0,
            estimator_softness: 50.0,
            // The conservative radio defaults of `DelayParams` saturate at
            // this study's station spacing and per-user load; the study
            // default is a band and cell size under which a staged chain
            // actually meets the 1 ms budget.
            delay: DelayParams {
                bandwidth_hz: 4.0e6,
                d_ref: 150.0,
                ..DelayParams::default()
            },
            duration: 30.0,
            seeds: vec![1],
            transition_overrides: Vec::new(),
            deployments: Vec::new(),
            user_overrides: BTreeMap::new(),
        }
    }
}

/// One user's initial condition and chain assignment after defaults and
/// overrides are resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSetup {
    pub id: UserId,
    pub sfc: SfcTypeId,
    pub lambda_u: f64,
    pub start: Vec2,
}

/// Scenario pieces assembled into engine inputs.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub net: SubstrateNetwork,
    pub sfcs: BTreeMap<SfcTypeId, SfcRequest>,
    pub users: Vec<UserSetup>,
    pub table: TransitionTable,
    pub mobility: GaussMarkovParams,
}

// ── parsing ──────────────────────────────────────────────────────────────

fn perr(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ScenarioError> {
    v.parse()
        .map_err(|_| perr(line, format!("{key}: cannot parse `{v}`")))
}

/// Parse a scenario from config text. Line numbers are 1-based in errors.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    // Topology fields accumulate separately because the kind key may come
    // in any order relative to the dimension keys.
    let mut topo_kind = String::from("tree");
    let mut topo_file = String::new();
    let (mut num_bs, mut num_mux) = (16u32, 4u32);
    let (mut rows, mut cols) = (4u32, 10u32);
    let mut bs_spacing = 200.0f64;
    let mut capacity = ResourceVector::new(5, 8, 10);
    let mut bounds_min = Vec2::new(f64::NAN, f64::NAN);
    let mut bounds_max = Vec2::new(f64::NAN, f64::NAN);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        // Lifecycle override lines have their own shape.
        if let Some(rest) = content.strip_prefix("transition ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(perr(line, "expected `transition <from> <to> <seconds>`"));
            }
            let from = LifecycleState::parse(parts[0])
                .ok_or_else(|| perr(line, format!("unknown lifecycle state `{}`", parts[0])))?;
            let to = LifecycleState::parse(parts[1])
                .ok_or_else(|| perr(line, format!("unknown lifecycle state `{}`", parts[1])))?;
            let secs: f64 = parse_num(line, "transition seconds", parts[2])?;
            sc.transition_overrides.push((from, to, secs));
            continue;
        }
        // Pre-deployed instances: `deploy <vnf> <node> <state>`.
        if let Some(rest) = content.strip_prefix("deploy ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(perr(line, "expected `deploy <vnf> <node> <state>`"));
            }
            let vnf = VnfTypeId(parse_num(line, "deploy vnf", parts[0])?);
            let node = NodeId(parse_num(line, "deploy node", parts[1])?);
            let state = LifecycleState::parse(parts[2])
                .ok_or_else(|| perr(line, format!("unknown lifecycle state `{}`", parts[2])))?;
            sc.deployments.push((vnf, node, state));
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(perr(line, format!("expected `key = value`, got `{content}`")));
        };
        let key = key.trim();
        let v = value.trim();
        match key {
            "topology.kind" => topo_kind = v.to_string(),
            "topology.file" => topo_file = v.to_string(),
            "topology.num_bs" => num_bs = parse_num(line, key, v)?,
            "topology.num_mux" => num_mux = parse_num(line, key, v)?,
            "topology.rows" => rows = parse_num(line, key, v)?,
            "topology.cols" => cols = parse_num(line, key, v)?,
            "topology.bs_spacing" => bs_spacing = parse_num(line, key, v)?,
            "topology.capacity.cpu" => capacity.cpu = parse_num(line, key, v)?,
            "topology.capacity.memory" => capacity.memory = parse_num(line, key, v)?,
            "topology.capacity.disk" => capacity.disk = parse_num(line, key, v)?,
            "topology.wired_mu" => sc.wired_mu = parse_num(line, key, v)?,
            "users.count" => sc.num_users = parse_num(line, key, v)?,
            "users.lambda" => sc.lambda_u = parse_num(line, key, v)?,
            "sfc.count" => sc.sfc_count = parse_num(line, key, v)?,
            "sfc.length" => sc.sfc_length = parse_num(line, key, v)?,
            "sfc.vnf_proc" => sc.vnf_proc = parse_num(line, key, v)?,
            "sfc.e2e_limit" => sc.e2e_limit = parse_num(line, key, v)?,
            "policy" => {
                sc.policy = PolicyKind::parse(v)
                    .ok_or_else(|| perr(line, format!("unknown policy `{v}`")))?
            }
            "policy.theta_run" => sc.thresholds.theta_run = parse_num(line, key, v)?,
            "policy.theta_stage" => sc.thresholds.theta_stage = parse_num(line, key, v)?,
            "policy.theta_fetch" => sc.thresholds.theta_fetch = parse_num(line, key, v)?,
            "forecast.kind" => {
                sc.predictor = PredictorKind::parse(v)
                    .ok_or_else(|| perr(line, format!("unknown predictor `{v}`")))?
            }
            "forecast.k" => sc.history_k = parse_num(line, key, v)?,
            "forecast.h_seconds" => sc.horizon_h = parse_num(line, key, v)?,
            "mobility.alpha" => sc.mobility.alpha = parse_num(line, key, v)?,
            "mobility.mean_speed" => sc.mobility.mean_speed = parse_num(line, key, v)?,
            "mobility.mean_direction" => sc.mobility.mean_direction = parse_num(line, key, v)?,
            "mobility.sigma_speed" => sc.mobility.sigma_speed = parse_num(line, key, v)?,
            "mobility.sigma_direction" => {
                sc.mobility.sigma_direction = parse_num(line, key, v)?
            }
            "mobility.tick" => sc.mobility.tick = parse_num(line, key, v)?,
            "mobility.min_x" => bounds_min.x = parse_num(line, key, v)?,
            "mobility.min_y" => bounds_min.y = parse_num(line, key, v)?,
            "mobility.max_x" => bounds_max.x = parse_num(line, key, v)?,
            "mobility.max_y" => bounds_max.y = parse_num(line, key, v)?,
            "connection.softness" => sc.softness = parse_num(line, key, v)?,
            "connection.estimator_softness" => sc.estimator_softness = parse_num(line, key, v)?,
            "delay.t_p" => sc.delay.t_p = parse_num(line, key, v)?,
            "delay.vnf_proc" => sc.delay.vnf_proc = parse_num(line, key, v)?,
            "delay.bandwidth_hz" => sc.delay.bandwidth_hz = parse_num(line, key, v)?,
            "delay.snr_ref" => sc.delay.snr_ref = parse_num(line, key, v)?,
            "delay.d_ref" => sc.delay.d_ref = parse_num(line, key, v)?,
            "delay.path_loss_exponent" => {
                sc.delay.path_loss_exponent = parse_num(line, key, v)?
            }
            "delay.packet_size_bits" => sc.delay.packet_size_bits = parse_num(line, key, v)?,
            "duration" => sc.duration = parse_num(line, key, v)?,
            "seeds" => {
                sc.seeds = v
                    .split(',')
                    .map(|s| parse_num(line, key, s.trim()))
                    .collect::<Result<Vec<u64>, _>>()?;
            }
            _ => {
                if let Some(rest) = key.strip_prefix("user.") {
                    let Some((i, field)) = rest.split_once('.') else {
                        return Err(perr(line, format!("unknown key `{key}`")));
                    };
                    let i: u32 = parse_num(line, key, i)?;
                    let ov = sc.user_overrides.entry(i).or_default();
                    match field {
                        "start" => {
                            let Some((x, y)) = v.split_once(',') else {
                                return Err(perr(line, format!("{key}: expected `x,y`")));
                            };
                            ov.start = Some(Vec2::new(
                                parse_num(line, key, x.trim())?,
                                parse_num(line, key, y.trim())?,
                            ));
                        }
                        "sfc" => ov.sfc = Some(parse_num(line, key, v)?),
                        "lambda" => ov.lambda = Some(parse_num(line, key, v)?),
                        _ => return Err(perr(line, format!("unknown key `{key}`"))),
                    }
                } else {
                    return Err(perr(line, format!("unknown key `{key}`")));
                }
            }
        }
    }

    sc.topology = match topo_kind.as_str() {
        "tree" => TopologyConfig::Tree {
            num_bs,
            num_mux,
            bs_spacing,
            capacity,
        },
        "city_grid" => TopologyConfig::CityGrid {
            rows,
            cols,
            bs_spacing,
            capacity,
        },
        "file" => TopologyConfig::File { path: topo_file },
        other => {
            return Err(ScenarioError::Invalid {
                field: "topology.kind".into(),
                message: format!("unknown kind `{other}`"),
            })
        }
    };
    let have_min = !bounds_min.x.is_nan() || !bounds_min.y.is_nan();
    let have_max = !bounds_max.x.is_nan() || !bounds_max.y.is_nan();
    if have_min || have_max {
        if bounds_min.x.is_nan()
            || bounds_min.y.is_nan()
            || bounds_max.x.is_nan()
            || bounds_max.y.is_nan()
        {
            return Err(ScenarioError::Invalid {
                field: "mobility.min_x".into(),
                message: "all four of min_x, min_y, max_x, max_y must be set together".into(),
            });
        }
        sc.bounds = Some((bounds_min, bounds_max));
    }
    validate(&sc)?;
    Ok(sc)
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn validate(sc: &Scenario) -> Result<(), ScenarioError> {
    if sc.duration <= 0.0 {
        return Err(invalid("duration", "must be > 0"));
    }
    if sc.horizon_h < 0.0 {
        return Err(invalid("forecast.h_seconds", "must be >= 0"));
    }
    if !(0.0..=1.0).contains(&sc.mobility.alpha) {
        return Err(invalid("mobility.alpha", "must be in [0, 1]"));
    }
    if sc.mobility.tick <= 0.0 {
        return Err(invalid("mobility.tick", "must be > 0"));
    }
    if sc.lambda_u <= 0.0 {
        return Err(invalid("users.lambda", "must be > 0"));
    }
    if sc.num_users == 0 {
        return Err(invalid("users.count", "must be >= 1"));
    }
    if sc.sfc_count == 0 || sc.sfc_length == 0 {
        return Err(invalid("sfc.count", "sfc count and length must be >= 1"));
    }
    if sc.e2e_limit <= 0.0 {
        return Err(invalid("sfc.e2e_limit", "must be > 0"));
    }
    if sc.vnf_proc < 0.0 {
        return Err(invalid("sfc.vnf_proc", "must be >= 0"));
    }
    if sc.softness < 0.0 || sc.estimator_softness < 0.0 {
        return Err(invalid("connection.softness", "must be >= 0"));
    }
    if sc.wired_mu <= 0.0 {
        return Err(invalid("topology.wired_mu", "must be > 0"));
    }
    LifecycleThresholds::new(
        sc.thresholds.theta_run,
        sc.thresholds.theta_stage,
        sc.thresholds.theta_fetch,
    )
    .map_err(|e| invalid("policy.theta_run", e.to_string()))?;
    for (from, to, secs) in &sc.transition_overrides {
        if *secs < 0.0 {
            return Err(invalid(
                "transition",
                format!("{from} -> {to}: duration must be >= 0"),
            ));
        }
    }
    for (&i, ov) in &sc.user_overrides {
        if i >= sc.num_users {
            return Err(invalid(
                "user",
                format!("override for user {i} but users.count = {}", sc.num_users),
            ));
        }
        if let Some(s) = ov.sfc {
            if s >= sc.sfc_count {
                return Err(invalid(
                    "user",
                    format!("user {i} assigned sfc {s} but sfc.count = {}", sc.sfc_count),
                ));
            }
        }
        if let Some(l) = ov.lambda {
            if l <= 0.0 {
                return Err(invalid("user", format!("user {i} lambda must be > 0")));
            }
        }
    }
    if let Some((lo, hi)) = sc.bounds {
        if lo.x >= hi.x || lo.y >= hi.y {
            return Err(invalid("mobility.min_x", "bounds must have positive area"));
        }
    }
    Ok(())
}

// ── emission ─────────────────────────────────────────────────────────────

/// Serialize a scenario back to config text. Parsing the result yields an
/// equal `Scenario`.
pub fn emit_scenario(sc: &Scenario) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    match &sc.topology {
        TopologyConfig::Tree {
            num_bs,
            num_mux,
            bs_spacing,
            capacity,
        } => {
            kv("topology.kind", "tree".into());
            kv("topology.num_bs", num_bs.to_string());
            kv("topology.num_mux", num_mux.to_string());
            kv("topology.bs_spacing", bs_spacing.to_string());
            kv("topology.capacity.cpu", capacity.cpu.to_string());
            kv("topology.capacity.memory", capacity.memory.to_string());
            kv("topology.capacity.disk", capacity.disk.to_string());
        }
        TopologyConfig::CityGrid {
            rows,
            cols,
            bs_spacing,
            capacity,
        } => {
            kv("topology.kind", "city_grid".into());
            kv("topology.rows", rows.to_string());
            kv("topology.cols", cols.to_string());
            kv("topology.bs_spacing", bs_spacing.to_string());
            kv("topology.capacity.cpu", capacity.cpu.to_string());
            kv("topology.capacity.memory", capacity.memory.to_string());
            kv("topology.capacity.disk", capacity.disk.to_string());
        }
        TopologyConfig::File { path } => {
            kv("topology.kind", "file".into());
            kv("topology.file", path.clone());
        }
    }
    kv("topology.wired_mu", sc.wired_mu.to_string());
    kv("users.count", sc.num_users.to_string());
    kv("users.lambda", sc.lambda_u.to_string());
    kv("sfc.count", sc.sfc_count.to_string());
    kv("sfc.length", sc.sfc_length.to_string());
    kv("sfc.vnf_proc", sc.vnf_proc.to_string());
    kv("sfc.e2e_limit", sc.e2e_limit.to_string());
    kv("policy", sc.policy.label().into());
    kv("policy.theta_run", sc.thresholds.theta_run.to_string());
    kv("policy.theta_stage", sc.thresholds.theta_stage.to_string());
    kv("policy.theta_fetch", sc.thresholds.theta_fetch.to_string());
    kv("forecast.kind", sc.predictor.label().into());
    kv("forecast.k", sc.history_k.to_string());
    kv("forecast.h_seconds", sc.horizon_h.to_string());
    kv("mobility.alpha", sc.mobility.alpha.to_string());
    kv("mobility.mean_speed", sc.mobility.mean_speed.to_string());
    kv("mobility.mean_direction", sc.mobility.mean_direction.to_string());
    kv("mobility.sigma_speed", sc.mobility.sigma_speed.to_string());
    kv("mobility.sigma_direction", sc.mobility.sigma_direction.to_string());
    kv("mobility.tick", sc.mobility.tick.to_string());
    if let Some((lo, hi)) = sc.bounds {
        kv("mobility.min_x", lo.x.to_string());
        kv("mobility.min_y", lo.y.to_string());
        kv("mobility.max_x", hi.x.to_string());
        kv("mobility.max_y", hi.y.to_string());
    }
    kv("connection.softness", sc.softness.to_string());
    kv("connection.estimator_softness", sc.estimator_softness.to_string());
    kv("delay.t_p", sc.delay.t_p.to_string());
    kv("delay.vnf_proc", sc.delay.vnf_proc.to_string());
    kv("delay.bandwidth_hz", sc.delay.bandwidth_hz.to_string());
    kv("delay.snr_ref", sc.delay.snr_ref.to_string());
    kv("delay.d_ref", sc.delay.d_ref.to_string());
    kv("delay.path_loss_exponent", sc.delay.path_loss_exponent.to_string());
    kv("delay.packet_size_bits", sc.delay.packet_size_bits.to_string());
    kv("duration", sc.duration.to_string());
    kv(
        "seeds",
        sc.seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    for &(from, to, secs) in &sc.transition_overrides {
        out.push_str(&format!("transition {from} {to} {secs}\n"));
    }
    for &(vnf, node, state) in &sc.deployments {
        out.push_str(&format!("deploy {vnf} {node} {state}\n"));
    }
    for (i, ov) in &sc.user_overrides {
        if let Some(p) = ov.start {
            out.push_str(&format!("user.{i}.start = {},{}\n", p.x, p.y));
        }
        if let Some(s) = ov.sfc {
            out.push_str(&format!("user.{i}.sfc = {s}\n"));
        }
        if let Some(l) = ov.lambda {
            out.push_str(&format!("user.{i}.lambda = {l}\n"));
        }
    }
    out
}

// ── materialization ──────────────────────────────────────────────────────

impl Scenario {
    /// Assemble the substrate, chain catalog, user initial conditions, and
    /// transition table this scenario describes. Reads the topology file
    /// from disk for the `file` kind.
    pub fn materialize(&self) -> Result<Materialized, ScenarioError> {
        let mut net = match &self.topology {
            TopologyConfig::Tree {
                num_bs,
                num_mux,
                bs_spacing,
                capacity,
            } => build_tree(
                *num_bs,
                *num_mux,
                &grid_positions(*num_bs, *bs_spacing),
                *capacity,
            )
            .map_err(|e| invalid("topology", e.to_string()))?,
            TopologyConfig::CityGrid {
                rows,
                cols,
                bs_spacing,
                capacity,
            } => build_city_grid(*rows, *cols, *bs_spacing, *capacity)
                .map_err(|e| invalid("topology", e.to_string()))?,
            TopologyConfig::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("topology.file", format!("{path}: {e}")))?;
                SubstrateNetwork::parse(&text)
                    .map_err(|e| invalid("topology.file", e.to_string()))?
            }
        };
        net.set_wired_service_rate(self.wired_mu);

        let mut sfcs = BTreeMap::new();
        for i in 0..self.sfc_count {
            let vnfs = (0..self.sfc_length)
                .map(|j| VnfTypeId(i * self.sfc_length + j))
                .collect();
            sfcs.insert(
                SfcTypeId(i),
                SfcRequest {
                    id: SfcTypeId(i),
                    vnfs,
                    e2e_limit: self.e2e_limit,
                    vnf_proc: self.vnf_proc,
                },
            );
        }

        // Users start at base-station positions round-robin unless placed
        // explicitly, and carry chains round-robin unless assigned.
        let bs_positions: Vec<Vec2> = net
            .base_stations()
            .iter()
            .filter_map(|&b| net.node(b).position)
            .collect();
        if bs_positions.is_empty() {
            return Err(invalid(
                "topology",
                "no positioned base stations to place users at",
            ));
        }
        let mut users = Vec::new();
        for i in 0..self.num_users {
            let ov = self.user_overrides.get(&i);
            let start = ov
                .and_then(|o| o.start)
                .unwrap_or(bs_positions[i as usize % bs_positions.len()]);
            let sfc = ov
                .and_then(|o| o.sfc)
                .unwrap_or(i % self.sfc_count);
            let lambda_u = ov.and_then(|o| o.lambda).unwrap_or(self.lambda_u);
            users.push(UserSetup {
                id: UserId(i),
                sfc: SfcTypeId(sfc),
                lambda_u,
                start,
            });
        }

        let mut table = default_transition_table();
        for &(from, to, secs) in &self.transition_overrides {
            table
                .set_duration(from, to, secs)
                .map_err(|e| invalid("transition", e.to_string()))?;
        }

        let mut mobility = self.mobility;
        mobility.bounds = match self.bounds {
            Some(b) => b,
            None => derived_bounds(&bs_positions),
        };
        Ok(Materialized {
            net,
            sfcs,
            users,
            table,
            mobility,
        })
    }
}

/// Default roaming area: the station bounding box with a 100 m margin.
fn derived_bounds(bs_positions: &[Vec2]) -> (Vec2, Vec2) {
    let margin = 100.0;
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in bs_positions {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (
        Vec2::new(lo.x - margin, lo.y - margin),
        Vec2::new(hi.x + margin, hi.y + margin),
    )
}
