//! Closed-form delay models: M/M/1 and M/D/1 sojourn times, the
//! Shannon-bounded wireless service rate, and end-to-end delay over an
//! embedded chain's substrate path.
//!
//! Saturated queues (λ ≥ μ) yield `INFINITE_DELAY` rather than an error;
//! the packet classifier downstream turns that into an unsuccessful packet.

use crate::linkmap::Embedding;
use crate::topology::{LinkKind, SubstrateNetwork};

/// Sentinel for a saturated queue: any packet seeing this delay misses
/// every finite deadline.
pub const INFINITE_DELAY: f64 = f64::INFINITY;

/// Parameters of the delay model. All times in seconds, rates in hertz or
/// packets per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    /// Constant processing delay charged once per traversed node.
    pub t_p: f64,
    /// Processing time of a single VNF, charged once per chain position.
    pub vnf_proc: f64,
    /// Wireless channel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// SNR measured at the reference distance.
    pub snr_ref: f64,
    /// Reference distance in meters; closer users see the reference SNR.
    pub d_ref: f64,
    /// Path-loss exponent.
    pub path_loss_exponent: f64,
    /// Packet size in bits.
    pub packet_size_bits: f64,
}

impl Default for DelayParams {
    /// Defaults chosen so an unloaded single-hop chain meets a 1 ms budget:
    /// SNR 3 at 10 m with exponent 2 over 1 MHz and 1000-bit packets gives
    /// a 2000 packets/s wireless rate at the reference distance.
    fn default() -> Self {
        Self {
            t_p: 1e-5,
            vnf_proc: 1e-4,
            bandwidth_hz: 1e6,
            snr_ref: 3.0,
            d_ref: 10.0,
            path_loss_exponent: 2.0,
            packet_size_bits: 1000.0,
        }
    }
}

/// Mean sojourn time of an M/M/1 queue: `1/(μ−λ)`.
pub fn mm1_sojourn(lambda: f64, mu: f64) -> f64 {
    debug_assert!(lambda >= 0.0 && mu > 0.0);
    if lambda < mu {
        1.0 / (mu - lambda)
    } else {
        INFINITE_DELAY
    }
}

/// Mean sojourn time of an M/D/1 queue: `1/μ + λ/(2μ(μ−λ))`.
pub fn md1_sojourn(lambda: f64, mu: f64) -> f64 {
    debug_assert!(lambda >= 0.0 && mu > 0.0);
    if lambda < mu {
        1.0 / mu + lambda / (2.0 * mu * (mu - lambda))
    } else {
        INFINITE_DELAY
    }
}

/// Shannon-bounded service rate of the user-to-BS wireless hop, in packets
/// per second, under a log-distance SNR clamped at the reference distance.
pub fn wireless_rate(distance: f64, params: &DelayParams) -> f64 {
    debug_assert!(distance >= 0.0);
    let d = distance.max(params.d_ref);
    let snr = params.snr_ref * (params.d_ref / d).powf(params.path_loss_exponent);
    params.bandwidth_hz * (1.0 + snr).log2() / params.packet_size_bits
}

/// End-to-end delay of one user's packet over its embedded chain.
///
/// Sums the wireless M/M/1 hop (the user's own rate against the current
/// channel), an M/D/1 term per traversed wired link using that link's
/// aggregate arrival rate, `t_p` per traversed node, and the VNF processing
/// time per chain position. Saturation propagates as `INFINITE_DELAY`.
pub fn e2e_delay(
    embedding: &Embedding,
    net: &SubstrateNetwork,
    user_lambda: f64,
    user_bs_distance: f64,
    params: &DelayParams,
) -> f64 {
    let mu_wireless = wireless_rate(user_bs_distance, params);
    let mut total = mm1_sojourn(user_lambda, mu_wireless);
    let path = &embedding.total_path;
    for pair in path.windows(2) {
        let link = net
            .link_between(pair[0], pair[1])
            .expect("embedding path must follow substrate links");
        debug_assert_eq!(link.kind, LinkKind::Wired);
        total += md1_sojourn(link.current_lambda, link.service_rate_mu);
    }
    total += params.t_p * path.len() as f64;
    total += params.vnf_proc * embedding.hops.len() as f64;
    total
}

/// Planning-time delay bound for placing a chain along `path` with no
/// queueing load: zero-λ sojourns plus per-node and per-VNF processing.
/// The wireless term uses the reference-distance rate, the best the channel
/// ever offers.
pub fn zero_load_chain_delay(
    path_wired_hops: usize,
    path_nodes: usize,
    num_vnfs: usize,
    wired_mu: f64,
    params: &DelayParams,
) -> f64 {
    let mu_wireless = wireless_rate(params.d_ref, params);
    mm1_sojourn(0.0, mu_wireless)
        + path_wired_hops as f64 * md1_sojourn(0.0, wired_mu)
        + params.t_p * path_nodes as f64
        + params.vnf_proc * num_vnfs as f64
}
