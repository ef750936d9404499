//! Observer and controller gain synthesis for chain-of-integrator blocks.
//!
//! `P` solves `P + PA + AᵀP = CᵀC` and `Q` solves `Q + QA + AᵀQ = QBBᵀQ`.
//! The gains `K° = P⁻¹Cᵀ` and `Kᶜ = BᵀQ` have closed binomial forms that
//! are used as an independent check on both solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, binomial, max_abs, solve_symmetric_sylvester};
use crate::model::{build_chain_matrices, BlockStructure, ChainMatrices};

pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_BUDGET: usize = 200;

/// Max-norm residual of `P + PA + AᵀP − CᵀC`.
pub fn p_residual(p: &DMatrix<f64>, cm: &ChainMatrices) -> f64 {
    let r = p + p * &cm.a + cm.a.transpose() * p - cm.c.transpose() * &cm.c;
    max_abs(&r)
}

/// Max-norm residual of `Q + QA + AᵀQ − QBBᵀQ`.
pub fn q_residual(q: &DMatrix<f64>, cm: &ChainMatrices) -> f64 {
    let qb = q * &cm.b;
    let r = q + q * &cm.a + cm.a.transpose() * q - &qb * qb.transpose();
    max_abs(&r)
}

/// Solves the linear `P` equation directly in the n(n+1)/2 symmetric unknowns.
pub fn solve_p(bs: BlockStructure) -> Result<DMatrix<f64>> {
    let cm = build_chain_matrices(bs);
    let rhs = cm.c.transpose() * &cm.c;
    solve_symmetric_sylvester(1.0, &cm.a.transpose(), &rhs)
}

/// Solves the Riccati-type `Q` equation.
///
/// The `m`-block problem is `Q₁ ⊗ I_m` where `Q₁` solves the scalar-block
/// equation. `Q₁` is found by Kleinman–Newton iteration seeded with a
/// stabilizing guess: `Q₁⁻¹` satisfies the linear equation
/// `X + A X + X Aᵀ = B Bᵀ`, whose solution is inverted to start Newton.
pub fn solve_q(bs: BlockStructure) -> Result<DMatrix<f64>> {
    let scalar = BlockStructure::new(bs.q(), 1)?;
    let q1 = solve_q_scalar(scalar)?;
    Ok(linalg::kron(&q1, &DMatrix::identity(bs.m(), bs.m())))
}

fn solve_q_scalar(bs: BlockStructure) -> Result<DMatrix<f64>> {
    let cm = build_chain_matrices(bs);
    let n = bs.n();
    let s = &cm.b * cm.b.transpose();
    let x = solve_symmetric_sylvester(1.0, &cm.a, &s)?;
    let mut q = x.cholesky().ok_or(Error::SolveFailed)?.inverse();
    let shifted = &cm.a + DMatrix::identity(n, n) * 0.5;

    let mut last_update = f64::INFINITY;
    for _ in 0..NEWTON_BUDGET {
        // (A + I/2 − S Q_k)ᵀ Q + Q (A + I/2 − S Q_k) = −Q_k S Q_k
        let closed = &shifted - &s * &q;
        let rhs = -(&q * &s * &q);
        let next = solve_symmetric_sylvester(0.0, &closed.transpose(), &rhs)?;
        last_update = max_abs(&(&next - &q));
        let scale = max_abs(&next).max(1.0);
        q = next;
        if last_update <= NEWTON_TOLERANCE * scale {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_BUDGET,
        last_update,
    })
}

/// Closed-form `K°`: block `i` is `binom(q, i) I_m`, stacked (n × m).
pub fn observer_gain(bs: BlockStructure) -> DMatrix<f64> {
    let (q, m) = (bs.q(), bs.m());
    DMatrix::from_fn(bs.n(), m, |r, c| {
        if r % m == c {
            binomial(q, r / m + 1)
        } else {
            0.0
        }
    })
}

/// Closed-form `Kᶜ`: block `i` is `binom(q, q − i + 1) I_m`, concatenated (m × n).
pub fn control_gain(bs: BlockStructure) -> DMatrix<f64> {
    let (q, m) = (bs.q(), bs.m());
    DMatrix::from_fn(m, bs.n(), |r, c| {
        if c % m == r {
            binomial(q, q - c / m)
        } else {
            0.0
        }
    })
}

/// Solved gain matrices and the spectral constants used by the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub bs: BlockStructure,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// `P⁻¹Cᵀ`.
    pub k_o: DMatrix<f64>,
    /// `BᵀQ`.
    pub k_c: DMatrix<f64>,
    pub rho_min_p: f64,
    pub rho_max_p: f64,
    pub rho_min_q: f64,
    pub rho_max_q: f64,
    /// Spectral norms.
    pub k_o_norm: f64,
    pub k_c_norm: f64,
}

impl GainSet {
    pub fn synthesize(bs: BlockStructure) -> Result<Self> {
        let cm = build_chain_matrices(bs);
        let p = solve_p(bs)?;
        let q = solve_q(bs)?;
        let k_o = p
            .clone()
            .cholesky()
            .ok_or(Error::SolveFailed)?
            .solve(&cm.c.transpose());
        let k_c = cm.b.transpose() * &q;
        let (p_ev, q_ev) = (linalg::sym_eigenvalues(&p), linalg::sym_eigenvalues(&q));
        Ok(Self {
            bs,
            rho_min_p: p_ev[0],
            rho_max_p: *p_ev.last().unwrap(),
            rho_min_q: q_ev[0],
            rho_max_q: *q_ev.last().unwrap(),
            k_o_norm: linalg::spectral_norm(&k_o),
            k_c_norm: linalg::spectral_norm(&k_c),
            p,
            q,
            k_o,
            k_c,
        })
    }

    pub fn residuals(&self) -> (f64, f64) {
        let cm = build_chain_matrices(self.bs);
        (p_residual(&self.p, &cm), q_residual(&self.q, &cm))
    }

    /// Max-norm distance of the solved gains from their binomial forms.
    pub fn binomial_deviation(&self) -> (f64, f64) {
        (
            max_abs(&(&self.k_o - observer_gain(self.bs))),
            max_abs(&(&self.k_c - control_gain(self.bs))),
        )
    }
}

/// High-gain scaling matrices `Γ_λ` and `Δ_θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMatrices {
    pub lambda: f64,
    pub theta: f64,
    /// `diag(λ^q I_m, …, λ I_m)`.
    pub gamma_lambda: DMatrix<f64>,
    /// `diag(I_m, θ⁻¹ I_m, …, θ^{-(q-1)} I_m)`.
    pub delta_theta: DMatrix<f64>,
}

impl ScalingMatrices {
    /// `Δ_θ⁻¹ = diag(I_m, θ I_m, …, θ^{q-1} I_m)`.
    pub fn delta_theta_inv(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.delta_theta.diagonal().map(|d| 1.0 / d))
    }

    pub fn xi(&self) -> f64 {
        self.theta / self.lambda
    }
}

pub fn scaling(lambda: f64, theta: f64, bs: BlockStructure) -> Result<ScalingMatrices> {
    if !(lambda > 0.0 && theta > 0.0) || !lambda.is_finite() || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling needs lambda, theta > 0 (got {lambda}, {theta})"
        )));
    }
    let (q, m) = (bs.q(), bs.m());
    let gamma = DMatrix::from_fn(bs.n(), bs.n(), |r, c| {
        if r == c {
            lambda.powi((q - r / m) as i32)
        } else {
            0.0
        }
    });
    let delta = DMatrix::from_fn(bs.n(), bs.n(), |r, c| {
        if r == c {
            theta.powi(-((r / m) as i32))
        } else {
            0.0
        }
    });
    Ok(ScalingMatrices {
        lambda,
        theta,
        gamma_lambda: gamma,
        delta_theta: delta,
    })
}
