//! Per-edge asynchronous sampling schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Stream tags so that the same seed drives independent random sources.
pub(crate) mod stream {
    pub const SCHEDULE: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const INITIAL: u64 = 3;
}

pub(crate) fn rng_for(seed: u64, tag: u64, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) ^ sub);
    rng
}

/// Sampling instants of edge `(i, j)`: agent `i` receives `y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSchedule {
    pub i: usize,
    pub j: usize,
    pub instants: Vec<f64>,
}

impl EdgeSchedule {
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.instants.windows(2).map(|w| w[1] - w[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    pub edges: Vec<EdgeSchedule>,
}

impl SamplingSchedule {
    pub fn edge(&self, i: usize, j: usize) -> Option<&EdgeSchedule> {
        self.edges.iter().find(|e| e.i == i && e.j == j)
    }
}

/// Draws an independent schedule for every pair with `ν_ij = 1`.
///
/// The first instant is uniform in `(0, τ_M)`, each gap uniform in
/// `(τ_m, τ_M)`; instants stop before `horizon`.
pub fn generate_schedules(
    topology: &Topology,
    tau_m: f64,
    tau_max: f64,
    horizon: f64,
    seed: u64,
) -> Result<SamplingSchedule> {
    if !(tau_m > 0.0 && tau_m < tau_max) || !tau_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 0 < tau_m < tau_M (got {tau_m}, {tau_max})"
        )));
    }
    let edges = topology
        .observed_pairs()
        .into_iter()
        .map(|(i, j)| {
            let mut rng = rng_for(seed, stream::SCHEDULE, ((i as u64) << 20) | j as u64);
            let mut instants = Vec::new();
            let mut t = open_uniform(&mut rng, 0.0, tau_max);
            while t < horizon {
                instants.push(t);
                t += open_uniform(&mut rng, tau_m, tau_max);
            }
            EdgeSchedule { i, j, instants }
        })
        .collect();
    Ok(SamplingSchedule { edges })
}

fn open_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}
