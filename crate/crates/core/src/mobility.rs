//! Gauss-Markov user mobility and ground-truth connection realization.
//!
//! Speed and direction each follow an AR(1) process around their means;
//! positions advance once per tick and reflect off the area bounds. Which
//! base station a user actually connects to is sampled from a distance
//! softmax, so proximity biases but does not determine attachment.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::topology::SubstrateNetwork;
use crate::types::{NodeId, SfcTypeId, UserId, Vec2};

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One mobile user and the demand it carries.
#[derive(Debug, Clone)]
pub struct User {
    pub id: UserId,
    pub position: Vec2,
    pub speed: f64,
    /// Heading in radians.
    pub direction: f64,
    /// Packet arrival rate in packets per second.
    pub lambda_u: f64,
    pub sfc: SfcTypeId,
    pub attached_bs: NodeId,
}

impl User {
    pub fn velocity(&self) -> Vec2 {
        Vec2::new(
            self.speed * self.direction.cos(),
            self.speed * self.direction.sin(),
        )
    }
}

/// Parameters of the Gauss-Markov process, shared across ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMarkovParams {
    /// Temporal correlation in [0,1]: 1 is pure inertia, 0 memoryless.
    pub alpha: f64,
    pub mean_speed: f64,
    pub mean_direction: f64,
    pub sigma_speed: f64,
    pub sigma_direction: f64,
    /// Seconds between successive position updates.
    pub tick: f64,
    /// Axis-aligned service area: (min corner, max corner).
    pub bounds: (Vec2, Vec2),
}

impl Default for GaussMarkovParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            mean_speed: 1.5,
            mean_direction: 0.0,
            sigma_speed: 1.0,
            sigma_direction: 0.5,
            tick: 1.0,
            bounds: (Vec2::new(0.0, 0.0), Vec2::new(1000.0, 1000.0)),
        }
    }
}

/// One AR(1) update of (speed, direction) given two unit-normal draws.
pub fn gm_step(
    speed: f64,
    direction: f64,
    p: &GaussMarkovParams,
    w_speed: f64,
    w_direction: f64,
) -> (f64, f64) {
    let carry = (1.0 - p.alpha * p.alpha).sqrt();
    let s = p.alpha * speed + (1.0 - p.alpha) * p.mean_speed + carry * p.sigma_speed * w_speed;
    let d = p.alpha * direction
        + (1.0 - p.alpha) * p.mean_direction
        + carry * p.sigma_direction * w_direction;
    (s, d)
}

/// Advance a position by one tick of motion, reflecting at the bounds.
/// Returns the new position and the (possibly mirrored) heading.
pub fn advance_position(
    position: Vec2,
    speed: f64,
    direction: f64,
    p: &GaussMarkovParams,
) -> (Vec2, f64) {
    let (min, max) = p.bounds;
    let mut x = position.x + p.tick * speed * direction.cos();
    let mut y = position.y + p.tick * speed * direction.sin();
    let mut dir = direction;
    let mut flip_x = false;
    let mut flip_y = false;
    while x < min.x || x > max.x {
        if x < min.x {
            x = 2.0 * min.x - x;
        } else {
            x = 2.0 * max.x - x;
        }
        flip_x = !flip_x;
    }
    while y < min.y || y > max.y {
        if y < min.y {
            y = 2.0 * min.y - y;
        } else {
            y = 2.0 * max.y - y;
        }
        flip_y = !flip_y;
    }
    if flip_x {
        dir = std::f64::consts::PI - dir;
    }
    if flip_y {
        dir = -dir;
    }
    (Vec2::new(x, y), dir)
}

/// Full per-tick update: AR(1) step (consuming two normal draws, speed
/// first) followed by the reflected position advance.
pub fn step_user(
    position: Vec2,
    speed: f64,
    direction: f64,
    p: &GaussMarkovParams,
    rng: &mut impl Rng,
) -> (Vec2, f64, f64) {
    let w_s: f64 = StandardNormal.sample(rng);
    let w_d: f64 = StandardNormal.sample(rng);
    let (s, d) = gm_step(speed, direction, p, w_s, w_d);
    let (pos, d) = advance_position(position, s, d, p);
    (pos, s, d)
}

/// Positions after each of `horizon_ticks` updates (the start position is
/// not included). Deterministic given the rng state.
pub fn generate_trace(
    start: Vec2,
    speed: f64,
    direction: f64,
    p: &GaussMarkovParams,
    horizon_ticks: u64,
    rng: &mut impl Rng,
) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(horizon_ticks as usize);
    let (mut pos, mut s, mut d) = (start, speed, direction);
    for _ in 0..horizon_ticks {
        (pos, s, d) = step_user(pos, s, d, p, rng);
        out.push(pos);
    }
    out
}

/// Convenience wrapper seeding a private stream.
pub fn generate_trace_seeded(
    start: Vec2,
    speed: f64,
    direction: f64,
    p: &GaussMarkovParams,
    horizon_ticks: u64,
    seed: u64,
) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_trace(start, speed, direction, p, horizon_ticks, &mut rng)
}

/// Ground-truth attachment model: a softmax over negative distance with a
/// temperature ("softness"). Zero softness degenerates to the nearest BS.
#[derive(Debug, Clone, Copy)]
pub struct ConnectionModel {
    pub softness: f64,
}

impl ConnectionModel {
    pub fn new(softness: f64) -> Self {
        debug_assert!(softness >= 0.0);
        Self { softness }
    }

    /// P(b | position) for every base station; sums to 1.
    pub fn probabilities(&self, position: Vec2, net: &SubstrateNetwork) -> BTreeMap<NodeId, f64> {
        let dists: Vec<(NodeId, f64)> = net
            .base_stations()
            .iter()
            .map(|&b| {
                let p = net.node(b).position.expect("base stations have positions");
                (b, position.distance_to(p))
            })
            .collect();
        let mut out = BTreeMap::new();
        if self.softness == 0.0 {
            // Degenerate case: all mass on the nearest BS, lowest id on ties.
            let nearest = dists
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one base station")
                .0;
            for (b, _) in &dists {
                out.insert(*b, if *b == nearest { 1.0 } else { 0.0 });
            }
            return out;
        }
        // Shift by the minimum distance before exponentiating for stability.
        let d_min = dists.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (b, d) in &dists {
            let w = (-(d - d_min) / self.softness).exp();
            total += w;
            out.insert(*b, w);
        }
        for w in out.values_mut() {
            *w /= total;
        }
        out
    }

    /// Sample an attachment from `probabilities`. The zero-softness case is
    /// deterministic and consumes no randomness.
    pub fn realize(&self, position: Vec2, net: &SubstrateNetwork, rng: &mut impl Rng) -> NodeId {
        let probs = self.probabilities(position, net);
        if self.softness == 0.0 {
            return *probs
                .iter()
                .find(|(_, &p)| p == 1.0)
                .expect("degenerate distribution has a mode")
                .0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = *probs.keys().next_back().expect("at least one base station");
        for (&b, &p) in &probs {
            acc += p;
            if u < acc {
                return b;
            }
            last = b;
        }
        last
    }
}

/// One row of an attachment trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub user: UserId,
    pub tick: u64,
    pub position: Vec2,
    pub attached_bs: NodeId,
}

/// Render trace rows as CSV with a header line.
pub fn trace_to_csv(points: &[TracePoint]) -> String {
    let mut out = String::from("user_id,tick,x,y,attached_bs\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.user, p.tick, p.position.x, p.position.y, p.attached_bs
        ));
    }
    out
}

/// Parse the CSV produced by `trace_to_csv`.
pub fn trace_from_csv(text: &str) -> Result<Vec<TracePoint>, MobilityError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("user_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(MobilityError::Parse {
                line: line_no,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse = |i: usize| -> Result<f64, MobilityError> {
            fields[i].parse().map_err(|_| MobilityError::Parse {
                line: line_no,
                message: format!("bad number {:?}", fields[i]),
            })
        };
        out.push(TracePoint {
            user: UserId(parse(0)? as u32),
            tick: parse(1)? as u64,
            position: Vec2::new(parse(2)?, parse(3)?),
            attached_bs: NodeId(parse(4)? as u32),
        });
    }
    Ok(out)
}
