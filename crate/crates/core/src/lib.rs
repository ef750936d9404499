//! Leader-following consensus for block-triangular Lipschitz agents that
//! exchange noisy outputs at asynchronous sampling instants.
//!
//! Each follower runs one continuous-discrete observer per received output
//! (its own, its in-neighbors', and the leader's when pinned) and feeds the
//! estimates into a continuous consensus control law. The crate covers gain
//! synthesis, graph certification, the sufficient tuning bounds, and an
//! event-driven simulator.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod gains;
pub mod linalg;
pub mod model;
pub mod observer;
pub mod sim;
pub mod topology;

pub use bounds::{
    check_monotonicity, lemma2_bound, synthesize_certified, theorem_bounds, BoundInputs,
    BoundReport, ConditionFlags, Envelope, InitialErrors, Lemma2Params, MonotonicityReport,
    ParameterSweep, TuningParams,
};
pub use error::{Error, Result};
pub use gains::{control_gain, observer_gain, scaling, solve_p, solve_q, GainSet, ScalingMatrices};
pub use model::{
    build_chain_matrices, estimate_lipschitz, eval_dynamics, BlockStructure, ChainMatrices,
    ChuaField, DisturbanceSpec, NoiseModel, NonlinearField, StateBox, Uncertainty,
};
pub use observer::{observer_derivative, ObserverState, ProtocolConfig};
pub use sim::{run, ScenarioConfig, SimTrace};
pub use topology::{
    certify, compute_omega, fig2_topology, h_matrix, has_directed_spanning_tree, laplacian,
    OmegaCertificate, Topology,
};
