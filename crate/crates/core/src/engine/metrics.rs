//! Per-packet records, burst extraction, the aggregate run report, and the
//! CSV emitters for all of them.

use std::collections::BTreeMap;
use std::fmt;

use crate::lifecycle::LifecycleState;
use crate::types::{NodeId, UserId, VnfTypeId};

/// Why a packet counted as served or lost. Exactly one cause is recorded:
/// a missing or non-running instance wins over the delay check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketOutcome {
    Success,
    /// The chain was up but the end-to-end delay exceeded the budget.
    LateDelay,
    /// Some layer of the chain had no running instance to serve it.
    NotRunning,
}

impl PacketOutcome {
    pub fn label(self) -> &'static str {
        match self {
            PacketOutcome::Success => "success",
            PacketOutcome::LateDelay => "late_delay",
            PacketOutcome::NotRunning => "not_running",
        }
    }
}

impl fmt::Display for PacketOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One classified packet arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub user: UserId,
    pub time: f64,
    pub outcome: PacketOutcome,
    /// Expected end-to-end delay at arrival; infinite when no serving chain
    /// existed or a traversed queue was saturated.
    pub measured_delay: f64,
}

/// One completed lifecycle transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub time: f64,
    pub vnf: VnfTypeId,
    pub cloud: NodeId,
    pub from: LifecycleState,
    pub to: LifecycleState,
}

/// Service interruptions for one time-ordered per-user packet log, given as
/// `(arrival time, success)` pairs. Each maximal run of unsuccessful
/// packets yields one burst of `last - first` plus one mean inter-arrival
/// (the right-open convention: the interruption notionally extends until
/// the next packet would have arrived).
pub fn burst_lengths(log: &[(f64, bool)], mean_interarrival: f64) -> Vec<f64> {
    let mut bursts = Vec::new();
    let mut run_start: Option<f64> = None;
    let mut run_last = 0.0;
    for &(t, success) in log {
        if success {
            if let Some(start) = run_start.take() {
                bursts.push(run_last - start + mean_interarrival);
            }
        } else {
            if run_start.is_none() {
                run_start = Some(t);
            }
            run_last = t;
        }
    }
    if let Some(start) = run_start {
        bursts.push(run_last - start + mean_interarrival);
    }
    bursts
}

/// Per-user outcome summary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserMetrics {
    pub total_packets: u64,
    pub unsuccessful_packets: u64,
    /// Zero when the user saw no packets.
    pub unsuccessful_ratio: f64,
    pub bursts: Vec<f64>,
    pub mean_interarrival: f64,
}

/// Aggregate outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub duration: f64,
    pub per_user: BTreeMap<UserId, UserMetrics>,
    /// Completed transition counts per lifecycle edge.
    pub vnf_prep_counts: BTreeMap<(LifecycleState, LifecycleState), u64>,
    /// Time-averaged unsuccessful packet rate over the whole run,
    /// packets/second; zero for an empty run.
    pub objective: f64,
}

impl MetricsReport {
    pub fn total_packets(&self) -> u64 {
        self.per_user.values().map(|u| u.total_packets).sum()
    }

    pub fn unsuccessful_packets(&self) -> u64 {
        self.per_user.values().map(|u| u.unsuccessful_packets).sum()
    }

    /// Unsuccessful fraction across all users; zero for an empty run.
    pub fn overall_ratio(&self) -> f64 {
        let total = self.total_packets();
        if total == 0 {
            0.0
        } else {
            self.unsuccessful_packets() as f64 / total as f64
        }
    }
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: MetricsReport,
    /// All packets in processing order.
    pub packets: Vec<PacketRecord>,
    /// All completed transitions in completion order.
    pub transitions: Vec<TransitionRecord>,
}

// ── CSV emission ─────────────────────────────────────────────────────────
// All numbers use the default float formatting (shortest round-trip), so
// equal runs emit byte-identical files.

pub fn packets_csv(packets: &[PacketRecord]) -> String {
    let mut out = String::from("user,time,outcome,delay\n");
    for p in packets {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.user, p.time, p.outcome, p.measured_delay
        ));
    }
    out
}

pub fn bursts_csv(report: &MetricsReport) -> String {
    let mut out = String::from("user,burst_seconds\n");
    for (user, m) in &report.per_user {
        for b in &m.bursts {
            out.push_str(&format!("{user},{b}\n"));
        }
    }
    out
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("user,packets,unsuccessful,unsuccessful_ratio,objective\n");
    for (user, m) in &report.per_user {
        let obj = if report.duration > 0.0 {
            m.unsuccessful_packets as f64 / report.duration
        } else {
            0.0
        };
        out.push_str(&format!(
            "{user},{},{},{},{obj}\n",
            m.total_packets, m.unsuccessful_packets, m.unsuccessful_ratio
        ));
    }
    out.push_str(&format!(
        "all,{},{},{},{}\n",
        report.total_packets(),
        report.unsuccessful_packets(),
        report.overall_ratio(),
        report.objective
    ));
    out
}

pub fn transitions_csv(report: &MetricsReport) -> String {
    let mut out = String::from("from,to,count\n");
    for (&(from, to), count) in &report.vnf_prep_counts {
        out.push_str(&format!("{from},{to},{count}\n"));
    }
    out
}
