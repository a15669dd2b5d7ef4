//! Deterministic simulator and policies for lifecycle-aware service
//! function chain embedding in a multi-access edge network.
//!
//! The crate is organized bottom-up: substrate [`topology`], the VNF
//! [`lifecycle`] state machine, analytic [`queueing`] delays, user
//! [`mobility`] and attachment [`forecast`]ing, chain [`linkmap`] embedding,
//! proactive placement [`policy`], [`scenario`] configuration, and the
//! event-driven [`engine`] that ties them together.

pub mod engine;
pub mod forecast;
pub mod lifecycle;
pub mod linkmap;
pub mod mobility;
pub mod policy;
pub mod queueing;
pub mod scenario;
pub mod topology;
pub mod types;

pub use engine::metrics::{
    burst_lengths, bursts_csv, metrics_csv, packets_csv, transitions_csv, MetricsReport,
    PacketOutcome, PacketRecord, RunOutput, TransitionRecord, UserMetrics,
};
pub use engine::{run, VNF_REQUIREMENT};
pub use forecast::{
    estimate_connection_prob, no_connect_over_horizon, predict_positions, Forecast, ForecastError,
    PredictorKind,
};
pub use lifecycle::{
    default_transition_table, zeroed_transition_table, InFlight, LifecycleError, LifecycleState,
    TransitionTable, VnfInstance,
};
pub use linkmap::{embed_links, Embedding, LinkmapError};
pub use mobility::{
    advance_position, generate_trace, gm_step, step_user, trace_from_csv, trace_to_csv,
    ConnectionModel, GaussMarkovParams, TracePoint, User,
};
pub use policy::{
    ideal_plan, mux_demand_prob, point_mass_forecasts, reactive_plan, ripple_plan, target_state,
    validate_plan, vnf_demand_prob, LifecycleThresholds, PlacementPlan, PlanTarget,
    PlanningContext, PolicyError, SfcRequest,
};
pub use queueing::{
    e2e_delay, md1_sojourn, mm1_sojourn, wireless_rate, zero_load_chain_delay, DelayParams,
    INFINITE_DELAY,
};
pub use scenario::{
    emit_scenario, parse_scenario, Materialized, PolicyKind, Scenario, ScenarioError,
    TopologyConfig, UserOverride, UserSetup,
};
pub use topology::{
    build_city_grid, build_tree, grid_positions, EdgeCloud, Link, LinkKind, NodeKind,
    ResourceVector, SubstrateNetwork, SubstrateNode, TopologyError, DEFAULT_WIRED_MU,
};
pub use types::{NodeId, SfcTypeId, UserId, Vec2, VnfTypeId};
