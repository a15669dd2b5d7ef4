//! Virtual-link embedding: connect a user to the closest Running instance
//! of their chain's head, then each VNF to the closest Running instance of
//! its successor, greedily along substrate hop paths.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::topology::SubstrateNetwork;
use crate::types::{NodeId, UserId, VnfTypeId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkmapError {
    /// The first chain layer with no Running instance anywhere.
    #[error("no running instance of vnf {0}")]
    MissingVnf(VnfTypeId),
}

/// A user's chain mapped onto substrate nodes and paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub user: UserId,
    /// Per chain position: the VNF type, its serving edge cloud, and the
    /// substrate path walked to reach it from the previous position
    /// (excluding the node already stood on; empty when co-located).
    pub hops: Vec<(VnfTypeId, NodeId, Vec<NodeId>)>,
    /// Full node walk: attachment BS first, then every segment in order.
    pub total_path: Vec<NodeId>,
}

impl Embedding {
    /// Whether the walk crosses the link between `a` and `b` (in either
    /// direction), counted with multiplicity.
    pub fn traversals(&self, a: NodeId, b: NodeId) -> usize {
        self.total_path
            .windows(2)
            .filter(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
            .count()
    }
}

/// Greedily embed `chain` for a user attached at `bs`, chaining each layer
/// to the hop-closest member of its Running set (ties: lowest cloud id).
pub fn embed_links(
    user: UserId,
    bs: NodeId,
    chain: &[VnfTypeId],
    net: &SubstrateNetwork,
    running: &BTreeMap<VnfTypeId, BTreeSet<NodeId>>,
) -> Result<Embedding, LinkmapError> {
    let mut hops = Vec::with_capacity(chain.len());
    let mut total_path = vec![bs];
    let mut current = bs;
    for &vnf in chain {
        let candidates = running.get(&vnf).filter(|s| !s.is_empty());
        let Some(candidates) = candidates else {
            return Err(LinkmapError::MissingVnf(vnf));
        };
        // BTreeSet iterates in ascending id order, so min_by_key on the
        // distance alone lands on the lowest id among equals.
        let chosen = *candidates
            .iter()
            .min_by_key(|&&c| net.hop_distance(current, c))
            .expect("candidate set checked non-empty");
        let segment: Vec<NodeId> = if chosen == current {
            Vec::new()
        } else {
            let path = net
                .hop_path(current, chosen)
                .expect("substrate network is connected");
            path[1..].to_vec()
        };
        total_path.extend_from_slice(&segment);
        hops.push((vnf, chosen, segment));
        current = chosen;
    }
    Ok(Embedding {
        user,
        hops,
        total_path,
    })
}
