//! Per-edge continuous-discrete observers and the distributed control law.

use nalgebra::{DMatrix, DVector};

use crate::bounds::TuningParams;
use crate::error::{Error, Result};
use crate::gains::{scaling, GainSet, ScalingMatrices};
use crate::model::{build_chain_matrices, ChainMatrices, NonlinearField};
use crate::topology::Topology;

/// Last received sample on an edge: its instant and the frozen output error
/// `C x̂(t_k) − y_j(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub t: f64,
    pub error: DVector<f64>,
}

/// Observer run by agent `i` for agent `j` (0 = leader).
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub i: usize,
    pub j: usize,
    pub x_hat: DVector<f64>,
    /// `None` until the first sample arrives; the correction is zero meanwhile.
    pub anchor: Option<Anchor>,
    m: usize,
}

impl ObserverState {
    pub fn new(i: usize, j: usize, x_hat: DVector<f64>, m: usize) -> Self {
        Self {
            i,
            j,
            x_hat,
            anchor: None,
            m,
        }
    }

    /// Output-error prediction `e^{−θ q (t − t_k)} (C x̂(t_k) − y_j(t_k))`.
    pub fn z_value(&self, theta: f64, q: usize, t: f64) -> DVector<f64> {
        z_from_anchor(self.anchor.as_ref(), self.m, theta * q as f64, t)
    }

    /// Resets the anchor at a sampling instant. The estimate itself is continuous.
    pub fn on_sample(
        &mut self,
        c: &DMatrix<f64>,
        t_k: f64,
        y_received: &DVector<f64>,
    ) -> Result<()> {
        if let Some(anchor) = &self.anchor {
            if t_k < anchor.t {
                return Err(Error::OutOfOrderSample {
                    t: t_k,
                    anchor: anchor.t,
                });
            }
        }
        self.anchor = Some(Anchor {
            t: t_k,
            error: c * &self.x_hat - y_received,
        });
        Ok(())
    }
}

pub(crate) fn z_from_anchor(anchor: Option<&Anchor>, m: usize, decay: f64, t: f64) -> DVector<f64> {
    match anchor {
        Some(a) => &a.error * (-decay * (t - a.t)).exp(),
        None => DVector::zeros(m),
    }
}

/// `A x̂ + φ(t, x̂) − θ Δ_θ⁻¹ K° z(t)`. No input term: only outputs are shared.
pub fn observer_derivative(
    obs: &ObserverState,
    cm: &ChainMatrices,
    field: &dyn NonlinearField,
    theta: f64,
    delta_theta: &DMatrix<f64>,
    k_o: &DMatrix<f64>,
    t: f64,
) -> DVector<f64> {
    let q = cm.a.nrows() / cm.c.nrows();
    let z = obs.z_value(theta, q, t);
    let delta_inv = delta_theta.map(|d| if d != 0.0 { 1.0 / d } else { 0.0 });
    &cm.a * &obs.x_hat + field.eval(t, &obs.x_hat) - (delta_inv * k_o * z) * theta
}

/// Everything a follower needs to run its observers and compute its input.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub tuning: TuningParams,
    pub gains: GainSet,
    pub scaling: ScalingMatrices,
    pub topology: Topology,
    pub chain: ChainMatrices,
    /// `θ Δ_θ⁻¹ K°` (n × m).
    pub correction: DMatrix<f64>,
    /// `c̄ Kᶜ Γ_λ` (m × n).
    pub feedback: DMatrix<f64>,
}

impl ProtocolConfig {
    pub fn new(tuning: TuningParams, gains: GainSet, topology: Topology) -> Result<Self> {
        let bs = gains.bs;
        let scaling = scaling(tuning.lambda, tuning.theta, bs)?;
        let correction = scaling.delta_theta_inv() * &gains.k_o * tuning.theta;
        let feedback = &gains.k_c * &scaling.gamma_lambda * tuning.c_bar;
        Ok(Self {
            chain: build_chain_matrices(bs),
            tuning,
            gains,
            scaling,
            topology,
            correction,
            feedback,
        })
    }

    /// Decay rate `θ K°₁ = θ q` of the output-error prediction.
    pub fn z_decay(&self) -> f64 {
        self.tuning.theta * self.gains.bs.q() as f64
    }

    /// Observer right-hand side at an arbitrary estimate (used inside integrator stages).
    pub fn observer_rhs(
        &self,
        field: &dyn NonlinearField,
        x_hat: &DVector<f64>,
        anchor: Option<&Anchor>,
        t: f64,
    ) -> DVector<f64> {
        let z = z_from_anchor(anchor, self.gains.bs.m(), self.z_decay(), t);
        &self.chain.a * x_hat + field.eval(t, x_hat) - &self.correction * z
    }

    /// Control input of agent `i` given a lookup of its estimates by source agent.
    pub fn control_input_with<'a, F>(&self, i: usize, mut estimate: F) -> Result<DVector<f64>>
    where
        F: FnMut(usize) -> Option<&'a [f64]>,
    {
        let n = self.gains.bs.n();
        let missing = |j| Error::MissingEstimate {
            agent: i,
            source_agent: j,
        };
        let own = estimate(i).ok_or_else(|| missing(i))?;
        let mut sum = DVector::<f64>::zeros(n);
        let mut add = |other: &[f64]| {
            for (s, (o, me)) in sum.iter_mut().zip(other.iter().zip(own)) {
                *s += o - me;
            }
        };
        if self.topology.d(i) {
            add(estimate(0).ok_or_else(|| missing(0))?);
        }
        for j in 1..=self.topology.followers() {
            if j != i && self.topology.a(i, j) {
                add(estimate(j).ok_or_else(|| missing(j))?);
            }
        }
        Ok(&self.feedback * sum)
    }

    /// `d_i c̄ Kᶜ Γ_λ (x̂_{i,0} − x̂_{i,i}) + c̄ Kᶜ Γ_λ Σ_j a_ij (x̂_{i,j} − x̂_{i,i})`.
    pub fn control_input(&self, i: usize, estimates: &[ObserverState]) -> Result<DVector<f64>> {
        self.control_input_with(i, |j| {
            estimates
                .iter()
                .find(|o| o.i == i && o.j == j)
                .map(|o| o.x_hat.as_slice())
        })
    }
}
