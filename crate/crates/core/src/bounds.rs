//! Sufficient tuning conditions, the consensus-error envelope, and the
//! delay-inequality decay bound.

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::model::DisturbanceSpec;
use crate::topology::OmegaCertificate;

/// Tuning parameters: coupling force, control rate, observer rate, and the
/// sampling-gap bounds `(τ_m, τ_M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningParams {
    pub c_bar: f64,
    pub lambda: f64,
    pub theta: f64,
    pub tau_m: f64,
    pub tau_max: f64,
}

impl TuningParams {
    pub fn xi(&self) -> f64 {
        self.theta / self.lambda
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.lambda, self.theta, self.tau_m, self.tau_max]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || !(self.c_bar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "non-positive tuning: {self:?}"
            )));
        }
        if self.tau_m >= self.tau_max {
            return Err(Error::InvalidParameter(format!(
                "tau_m = {} must be below tau_M = {}",
                self.tau_m, self.tau_max
            )));
        }
        Ok(())
    }
}

/// Initial-condition sums entering `χ₁`.
///
/// `observer_sum` runs only over pairs `(i, j)` with `ν_ij = 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InitialErrors {
    /// `Σ_i ‖x_i(0) − x_0(0)‖`.
    pub consensus_sum: f64,
    /// `Σ_{ν_ij = 1} ‖x̂_{i,j}(0) − x_j(0)‖`.
    pub observer_sum: f64,
}

/// Everything the bound calculator needs.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub cert: OmegaCertificate,
    pub gains: GainSet,
    pub l_phi: f64,
    pub params: TuningParams,
    pub delta_w: f64,
    /// `δ_ε^k`, `k = 1..=q`.
    pub delta_eps: Vec<f64>,
    pub initial: InitialErrors,
}

impl BoundInputs {
    pub fn new(
        cert: OmegaCertificate,
        gains: GainSet,
        l_phi: f64,
        params: TuningParams,
        disturbances: &DisturbanceSpec,
        initial: InitialErrors,
    ) -> Self {
        let bs = gains.bs;
        Self {
            delta_w: disturbances.noise_bound(bs),
            delta_eps: disturbances.epsilon_bounds(bs),
            cert,
            gains,
            l_phi,
            params,
            initial,
        }
    }
}

/// Which sufficient conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionFlags {
    /// `λ, θ, c̄ ≥ 1` and `θ ≥ λ`.
    pub params_at_least_one: bool,
    pub c_bar: bool,
    pub lambda: bool,
    pub theta: bool,
    pub tau_max: bool,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.params_at_least_one && self.c_bar && self.lambda && self.theta && self.tau_max
    }
}

/// `χ₁ θ^{q−1} e^{−λt/8} + χ₂ λ⁻¹ θ^q (δ_w + τ_M δ_ε¹) + χ₃ λ⁻¹ Σ_k θ^{q−k} δ_ε^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    pub lambda: f64,
    pub theta: f64,
    pub q: usize,
    pub delta_w: f64,
    pub tau_max: f64,
    pub delta_eps: Vec<f64>,
}

impl Envelope {
    pub fn transient(&self, t: f64) -> f64 {
        self.chi1 * self.theta.powi(self.q as i32 - 1) * (-self.lambda * t / 8.0).exp()
    }

    /// Limit as `t → ∞`.
    pub fn steady_state(&self) -> f64 {
        let q = self.q as i32;
        let first = self.delta_eps.first().copied().unwrap_or(0.0);
        let noise =
            self.chi2 / self.lambda * self.theta.powi(q) * (self.delta_w + self.tau_max * first);
        let unc: f64 = self
            .delta_eps
            .iter()
            .enumerate()
            .map(|(k, d)| self.theta.powi(q - (k as i32 + 1)) * d)
            .sum();
        noise + self.chi3 / self.lambda * unc
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.transient(t) + self.steady_state()
    }

    /// Exponential decay rate `λ / 8`.
    pub fn rate(&self) -> f64 {
        self.lambda / 8.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub c_star: f64,
    pub lambda_star: f64,
    pub xi_star: f64,
    /// `λ c̄² ξ*`.
    pub theta_min: f64,
    pub sigma_star: f64,
    /// `σ* / (c̄ (θ + L_φ))`.
    pub tau_max_bound: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    /// `ω_min ρ_min(Q)`.
    pub rho_m_q_omega: f64,
    /// `ω_max ρ_max(Q)`.
    pub rho_max_q_omega: f64,
    pub initial: InitialErrors,
    pub satisfied: ConditionFlags,
    pub envelope: Envelope,
}

/// Structural constants that do not depend on the tuning parameters.
#[derive(Debug, Clone, Copy)]
struct Structural {
    c_star: f64,
    lambda_star: f64,
    xi_star: f64,
    sigma_star: f64,
    rho_m_qw: f64,
    rho_max_qw: f64,
}

fn structural(cert: &OmegaCertificate, gains: &GainSet, l_phi: f64) -> Result<Structural> {
    if !(cert.varrho > 0.0) {
        return Err(Error::InvalidCertificate(cert.varrho));
    }
    let n_state = gains.bs.n() as f64;
    let nf = cert.followers() as f64;
    let rho_m_qw = cert.omega_min * gains.rho_min_q;
    let rho_max_qw = cert.omega_max * gains.rho_max_q;
    let (pm, pmax) = (gains.rho_min_p, gains.rho_max_p);
    let c_star = (cert.omega_max / cert.varrho).max(1.0);
    let lambda_star =
        24.0 * l_phi * n_state.sqrt() * (rho_max_qw / rho_m_qw).sqrt().max((pmax / pm).sqrt());
    let xi_star = 36.0
        * gains.k_c_norm.powi(2)
        * (nf + 1.0).powi(3)
        * cert.h_max.powi(2)
        * (pmax / pm).sqrt().max(pmax / rho_m_qw).max(rho_max_qw / pm);
    let sigma_star = (2.0_f64.sqrt() - 1.0) / 8.0 * cert.omega_min.sqrt().min(pm.sqrt())
        / (gains.k_o_norm * (nf + 1.0).powf(1.5) * cert.h_max * pmax.sqrt());
    Ok(Structural {
        c_star,
        lambda_star,
        xi_star,
        sigma_star,
        rho_m_qw,
        rho_max_qw,
    })
}

/// Evaluates every sufficient condition and the error envelope.
pub fn theorem_bounds(inputs: &BoundInputs) -> Result<BoundReport> {
    let s = structural(&inputs.cert, &inputs.gains, inputs.l_phi)?;
    let p = &inputs.params;
    let gains = &inputs.gains;
    let nf = inputs.cert.followers() as f64;
    let q = gains.bs.q();
    if inputs.delta_eps.len() != q {
        return Err(Error::DimensionMismatch {
            what: "uncertainty bounds",
            expected: q,
            got: inputs.delta_eps.len(),
        });
    }

    let theta_min = p.lambda * p.c_bar * p.c_bar * s.xi_star;
    let tau_max_bound = s.sigma_star / (p.c_bar * (p.theta + inputs.l_phi));
    let sqrt_m_qw = s.rho_m_qw.sqrt();
    let chi1 = (s.rho_max_qw / s.rho_m_qw).sqrt() * inputs.initial.consensus_sum
        + gains.rho_max_p.sqrt() / sqrt_m_qw * inputs.initial.observer_sum;
    let chi2 = 8.0 * gains.rho_max_p.sqrt() * (nf + 1.0) * gains.k_o_norm / sqrt_m_qw;
    let chi3 =
        8.0 * (2.0 * nf * s.rho_max_qw.sqrt() + (nf + 1.0) * gains.rho_max_p.sqrt()) / sqrt_m_qw;

    let satisfied = ConditionFlags {
        params_at_least_one: p.lambda >= 1.0
            && p.theta >= 1.0
            && p.c_bar >= 1.0
            && p.theta >= p.lambda,
        c_bar: p.c_bar >= s.c_star,
        lambda: p.lambda >= s.lambda_star,
        theta: p.theta >= theta_min,
        tau_max: p.tau_max < tau_max_bound,
    };

    Ok(BoundReport {
        c_star: s.c_star,
        lambda_star: s.lambda_star,
        xi_star: s.xi_star,
        theta_min,
        sigma_star: s.sigma_star,
        tau_max_bound,
        chi1,
        chi2,
        chi3,
        rho_m_q_omega: s.rho_m_qw,
        rho_max_q_omega: s.rho_max_qw,
        initial: inputs.initial,
        satisfied,
        envelope: Envelope {
            chi1,
            chi2,
            chi3,
            lambda: p.lambda,
            theta: p.theta,
            q,
            delta_w: inputs.delta_w,
            tau_max: p.tau_max,
            delta_eps: inputs.delta_eps.clone(),
        },
    })
}

/// Smallest tuning satisfying every condition, with `τ_M` at `margin` of its
/// bound and `τ_m = τ_M / 2`.
pub fn synthesize_certified(
    cert: &OmegaCertificate,
    gains: &GainSet,
    l_phi: f64,
    margin: f64,
) -> Result<TuningParams> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} outside (0, 1)"
        )));
    }
    let s = structural(cert, gains, l_phi)?;
    let c_bar = s.c_star;
    let lambda = s.lambda_star.max(1.0);
    let theta = (lambda * c_bar * c_bar * s.xi_star).max(lambda);
    let tau_max = margin * s.sigma_star / (c_bar * (theta + l_phi));
    Ok(TuningParams {
        c_bar,
        lambda,
        theta,
        tau_m: 0.5 * tau_max,
        tau_max,
    })
}

/// Parameter values to sweep in [`check_monotonicity`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSweep {
    pub thetas: Vec<f64>,
    pub c_bars: Vec<f64>,
    pub l_phis: Vec<f64>,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub tau_decreasing_in_theta: bool,
    pub tau_decreasing_in_c_bar: bool,
    pub tau_decreasing_in_l_phi: bool,
    /// Steady-state envelope nonincreasing in `λ` at fixed `θ` (strict when positive).
    pub steady_decreasing_in_lambda: bool,
}

impl MonotonicityReport {
    pub fn all(&self) -> bool {
        self.tau_decreasing_in_theta
            && self.tau_decreasing_in_c_bar
            && self.tau_decreasing_in_l_phi
            && self.steady_decreasing_in_lambda
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Sweeps one parameter at a time from `base` and checks the expected trends.
pub fn check_monotonicity(
    base: &BoundInputs,
    sweep: &ParameterSweep,
) -> Result<MonotonicityReport> {
    let eval = |f: &dyn Fn(&mut BoundInputs, f64), values: &[f64]| -> Result<Vec<BoundReport>> {
        sorted(values)
            .into_iter()
            .map(|v| {
                let mut inputs = base.clone();
                f(&mut inputs, v);
                theorem_bounds(&inputs)
            })
            .collect()
    };
    let taus = |r: &[BoundReport]| r.iter().map(|b| b.tau_max_bound).collect::<Vec<_>>();

    let by_theta = eval(&|i, v| i.params.theta = v, &sweep.thetas)?;
    let by_c = eval(&|i, v| i.params.c_bar = v, &sweep.c_bars)?;
    let by_l = eval(&|i, v| i.l_phi = v, &sweep.l_phis)?;
    let by_lambda = eval(&|i, v| i.params.lambda = v, &sweep.lambdas)?;

    let steady: Vec<f64> = by_lambda
        .iter()
        .map(|r| r.envelope.steady_state())
        .collect();
    let steady_ok = steady.windows(2).all(|w| {
        if w[0] > 0.0 {
            w[1] < w[0]
        } else {
            w[1] <= w[0]
        }
    });

    Ok(MonotonicityReport {
        tau_decreasing_in_theta: strictly_decreasing(&taus(&by_theta)),
        tau_decreasing_in_c_bar: strictly_decreasing(&taus(&by_c)),
        tau_decreasing_in_l_phi: strictly_decreasing(&taus(&by_l)),
        steady_decreasing_in_lambda: steady_ok,
    })
}

/// Parameters of the delay differential inequality
/// `d/dt Σ γ_i v_i² ≤ Σ (−a_i v_i² + b_i ∫_{t−δ}^t v_i²) + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Params {
    pub gamma: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub delta: f64,
    pub k: f64,
    pub v0: Vec<f64>,
}

impl Lemma2Params {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Admissible delay limit; terms with `b_i = 0` are dropped from the first minimum.
    pub fn delta_limit(&self) -> f64 {
        let ab = self
            .a
            .iter()
            .zip(&self.b)
            .filter(|(_, &b)| b > 0.0)
            .map(|(&a, &b)| a / b)
            .fold(f64::INFINITY, f64::min);
        let ga = self
            .gamma
            .iter()
            .zip(&self.a)
            .map(|(&g, &a)| g / a)
            .fold(f64::INFINITY, f64::min);
        ((2.0_f64.sqrt() - 1.0) / 2.0 * ab).min(ga / 2.0_f64.sqrt())
    }

    /// `ϑ = ½ min_i a_i / γ_i`.
    pub fn rate(&self) -> f64 {
        0.5 * self
            .a
            .iter()
            .zip(&self.gamma)
            .map(|(&a, &g)| a / g)
            .fold(f64::INFINITY, f64::min)
    }

    /// `ς = Σ γ_i v_i(0)²`.
    pub fn initial_energy(&self) -> f64 {
        self.gamma
            .iter()
            .zip(&self.v0)
            .map(|(g, v)| g * v * v)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gamma.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty parameter set".into()));
        }
        for (what, len) in [
            ("lemma a_i", self.a.len()),
            ("lemma b_i", self.b.len()),
            ("lemma v_i(0)", self.v0.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        let ok = self.gamma.iter().all(|&g| g > 0.0)
            && self.a.iter().all(|&a| a > 0.0)
            && self.b.iter().all(|&b| b >= 0.0)
            && self.k >= 0.0
            && self.delta > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(
                "need gamma_i, a_i, delta > 0 and b_i, k >= 0".into(),
            ));
        }
        let limit = self.delta_limit();
        if !(self.delta < limit) {
            return Err(Error::DeltaTooLarge {
                delta: self.delta,
                limit,
            });
        }
        Ok(())
    }
}

/// `ς e^{−ϑ t} + k / ϑ`.
pub fn lemma2_bound(p: &Lemma2Params, t: f64) -> Result<f64> {
    p.validate()?;
    let rate = p.rate();
    Ok(p.initial_energy() * (-rate * t).exp() + p.k / rate)
}
