//! Block-triangular agent dynamics, disturbances, and the Chua instance.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Shape of a chain-of-integrators system: `q` blocks of size `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockStructure {
    q: usize,
    m: usize,
}

impl BlockStructure {
    pub fn new(q: usize, m: usize) -> Result<Self> {
        if q == 0 || m == 0 {
            return Err(Error::InvalidBlockStructure { q, m });
        }
        Ok(Self { q, m })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// State dimension `q * m`.
    pub fn n(&self) -> usize {
        self.q * self.m
    }

    /// Row range of block `k` (1-based, as in the block notation).
    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        assert!(
            k >= 1 && k <= self.q,
            "block index {k} out of 1..={}",
            self.q
        );
        (k - 1) * self.m..k * self.m
    }
}

/// `A` (block shift), `B` (input into the last block), `C` (first block output).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

pub fn build_chain_matrices(bs: BlockStructure) -> ChainMatrices {
    let (q, m, n) = (bs.q(), bs.m(), bs.n());
    let mut a = DMatrix::zeros(n, n);
    for k in 0..q.saturating_sub(1) {
        for c in 0..m {
            a[(k * m + c, (k + 1) * m + c)] = 1.0;
        }
    }
    let mut b = DMatrix::zeros(n, m);
    let mut c_mat = DMatrix::zeros(m, n);
    for c in 0..m {
        b[((q - 1) * m + c, c)] = 1.0;
        c_mat[(c, c)] = 1.0;
    }
    ChainMatrices { a, b, c: c_mat }
}

/// Triangular nonlinearity `φ(t, x)`.
///
/// Block `k` of the output may only depend on blocks `1..=k` of `x`.
pub trait NonlinearField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// Declared global Lipschitz constant.
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct ZeroField {
    pub n: usize,
}

impl NonlinearField for ZeroField {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.n)
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// `φ(x) = M x`; the caller is responsible for `M` being block lower triangular.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub matrix: DMatrix<f64>,
}

impl NonlinearField for LinearField {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    fn lipschitz(&self) -> f64 {
        crate::linalg::spectral_norm(&self.matrix)
    }
}

/// Componentwise `gain * sin(x)`; Lipschitz with constant `|gain|`.
#[derive(Debug, Clone)]
pub struct SineField {
    pub n: usize,
    pub gain: f64,
}

impl NonlinearField for SineField {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.gain * v.sin())
    }

    fn lipschitz(&self) -> f64 {
        self.gain.abs()
    }
}

pub type FieldFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Closure-backed field for user plug-ins.
#[derive(Clone)]
pub struct FnField {
    pub n: usize,
    pub lipschitz: f64,
    pub f: FieldFn,
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("n", &self.n)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl NonlinearField for FnField {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Constants of the Chua-type velocity dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChuaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for ChuaParams {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 19.53,
            gamma: 0.1636,
            epsilon: 0.2,
            omega: 0.5,
            a: -1.4325,
            b: -0.7831,
        }
    }
}

impl ChuaParams {
    /// Piecewise-linear diode characteristic.
    pub fn h(&self, v: f64) -> f64 {
        0.5 * (self.a - self.b) * ((v + 1.0).abs() - (v - 1.0).abs())
    }
}

/// Chua oscillator in position/velocity form (q = 2, m = 3).
///
/// The position block has no nonlinearity; the velocity block carries `f`.
#[derive(Debug, Clone)]
pub struct ChuaField {
    pub params: ChuaParams,
    /// Declared Lipschitz constant used by the bound calculator.
    pub lipschitz: f64,
}

/// Lipschitz constant certified for [`ChuaField`] over the whole space.
///
/// The Jacobian is piecewise constant up to the `cos` term; this is the
/// spectral norm of the worst piece with `|cos| = 1` (22.588), rounded up.
pub const CHUA_CERTIFIED_LIPSCHITZ: f64 = 22.6;

impl Default for ChuaField {
    fn default() -> Self {
        Self {
            params: ChuaParams::default(),
            lipschitz: CHUA_CERTIFIED_LIPSCHITZ,
        }
    }
}

impl ChuaField {
    pub fn f(&self, x1: &[f64], x2: &[f64]) -> [f64; 3] {
        let p = &self.params;
        [
            p.alpha * (x2[1] - x2[0] - p.h(x2[0])),
            x2[0] - x2[1] + x2[2],
            -p.beta * x2[1] - p.gamma * x2[2] - p.beta * p.epsilon * (p.omega * x1[0]).sin(),
        ]
    }
}

impl NonlinearField for ChuaField {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        let s = x.as_slice();
        let f = self.f(&s[0..3], &s[3..6]);
        DVector::from_vec(vec![0.0, 0.0, 0.0, f[0], f[1], f[2]])
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Right-hand side `A x + φ(t, x) + B u + ε`. Pass `u = None` for the leader.
pub fn eval_dynamics(
    cm: &ChainMatrices,
    field: &dyn NonlinearField,
    t: f64,
    x: &DVector<f64>,
    u: Option<&DVector<f64>>,
    eps: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = cm.a.nrows();
    check_len("state", n, x.len())?;
    check_len("field dimension", n, field.dim())?;
    let mut dx = &cm.a * x + field.eval(t, x);
    if let Some(u) = u {
        check_len("input", cm.b.ncols(), u.len())?;
        dx += &cm.b * u;
    }
    if let Some(eps) = eps {
        check_len("uncertainty", n, eps.len())?;
        dx += eps;
    }
    Ok(dx)
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Axis-aligned box in state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl StateBox {
    /// `‖x‖∞ ≤ radius`.
    pub fn symmetric(n: usize, radius: f64) -> Self {
        Self {
            lower: DVector::from_element(n, -radius),
            upper: DVector::from_element(n, radius),
        }
    }

    pub fn diameter(&self) -> f64 {
        (&self.upper - &self.lower).norm()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_iterator(
            self.lower.len(),
            self.lower.iter().zip(self.upper.iter()).map(|(&lo, &hi)| {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }),
        )
    }
}

/// Empirical Lipschitz constant of `field` over `bx`.
///
/// Takes the maximum ratio over `samples` random pairs plus, at each sampled
/// point, a short finite-difference pair along every coordinate axis.
pub fn estimate_lipschitz(
    field: &dyn NonlinearField,
    bx: &StateBox,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let diam = bx.diameter();
    if !(diam > 0.0) {
        return Err(Error::DegenerateBox);
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let n = bx.lower.len();
    check_len("field dimension", n, field.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-6 * diam;
    let mut best = 0.0_f64;
    let mut ratio = |x1: &DVector<f64>, x2: &DVector<f64>| {
        let dx = (x1 - x2).norm();
        if dx > 0.0 {
            let df = (field.eval(0.0, x1) - field.eval(0.0, x2)).norm();
            best = best.max(df / dx);
        }
    };
    for _ in 0..samples {
        let x1 = bx.sample(&mut rng);
        let x2 = bx.sample(&mut rng);
        ratio(&x1, &x2);
        for k in 0..n {
            let mut xk = x1.clone();
            xk[k] += step;
            ratio(&x1, &xk);
        }
    }
    Ok(best)
}

/// Output noise applied to transmitted samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// Uniform in the `∞`-ball scaled so that `‖w‖₂ ≤ bound`.
    Bounded {
        bound: f64,
    },
    /// Independent zero-mean Gaussian per component.
    Gaussian {
        std: f64,
    },
}

impl NoiseModel {
    /// Norm bound fed to the error envelope. Gaussian noise is unbounded; a
    /// nominal `3σ√m` is reported instead.
    pub fn bound(&self, m: usize) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Bounded { bound } => bound,
            NoiseModel::Gaussian { std } => 3.0 * std * (m as f64).sqrt(),
        }
    }

    pub fn sample(&self, m: usize, rng: &mut impl Rng) -> DVector<f64> {
        match *self {
            NoiseModel::None => DVector::zeros(m),
            NoiseModel::Bounded { bound } => {
                let half = bound / (m as f64).sqrt();
                if half > 0.0 {
                    DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-half..=half)))
                } else {
                    DVector::zeros(m)
                }
            }
            NoiseModel::Gaussian { std } => {
                let normal = Normal::new(0.0, std).expect("finite non-negative std");
                DVector::from_iterator(m, (0..m).map(|_| normal.sample(rng)))
            }
        }
    }
}

/// Continuous dynamics uncertainty `ε_i(t)` of one agent.
#[derive(Clone)]
pub enum Uncertainty {
    /// `amplitude_c * cos(frequency_c * t)` on block `block`.
    Cosine {
        block: usize,
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
    },
    Custom {
        /// Per-block sup-norm bounds.
        bounds: Vec<f64>,
        f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl fmt::Debug for Uncertainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Uncertainty::Cosine {
                block,
                amplitude,
                frequency,
            } => f
                .debug_struct("Cosine")
                .field("block", block)
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .finish(),
            Uncertainty::Custom { bounds, .. } => f
                .debug_struct("Custom")
                .field("bounds", bounds)
                .finish_non_exhaustive(),
        }
    }
}

impl Uncertainty {
    pub fn eval(&self, bs: BlockStructure, t: f64) -> DVector<f64> {
        match self {
            Uncertainty::Cosine {
                block,
                amplitude,
                frequency,
            } => {
                let mut e = DVector::zeros(bs.n());
                for (off, row) in bs.block_range(*block).enumerate() {
                    e[row] = amplitude[off] * (frequency[off] * t).cos();
                }
                e
            }
            Uncertainty::Custom { f, .. } => f(t),
        }
    }

    pub fn block_bounds(&self, bs: BlockStructure) -> Vec<f64> {
        match self {
            Uncertainty::Cosine {
                block, amplitude, ..
            } => {
                let mut b = vec![0.0; bs.q()];
                b[block - 1] = amplitude.iter().map(|a| a * a).sum::<f64>().sqrt();
                b
            }
            Uncertainty::Custom { bounds, .. } => bounds.clone(),
        }
    }

    fn validate(&self, bs: BlockStructure) -> Result<()> {
        match self {
            Uncertainty::Cosine {
                block,
                amplitude,
                frequency,
            } => {
                if *block == 0 || *block > bs.q() {
                    return Err(Error::InvalidParameter(format!(
                        "uncertainty block {block} outside 1..={}",
                        bs.q()
                    )));
                }
                check_len("uncertainty amplitude", bs.m(), amplitude.len())?;
                check_len("uncertainty frequency", bs.m(), frequency.len())
            }
            Uncertainty::Custom { bounds, .. } => {
                check_len("uncertainty bounds", bs.q(), bounds.len())
            }
        }
    }
}

/// Uncertainties per agent (0 = leader) plus the output noise model.
#[derive(Debug, Clone)]
pub struct DisturbanceSpec {
    pub uncertainties: BTreeMap<usize, Uncertainty>,
    pub noise: NoiseModel,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self {
            uncertainties: BTreeMap::new(),
            noise: NoiseModel::None,
        }
    }

    pub fn validate(&self, bs: BlockStructure) -> Result<()> {
        self.uncertainties.values().try_for_each(|u| u.validate(bs))
    }

    pub fn epsilon(&self, bs: BlockStructure, agent: usize, t: f64) -> Option<DVector<f64>> {
        self.uncertainties.get(&agent).map(|u| u.eval(bs, t))
    }

    /// `δ_ε^k` for `k = 1..=q`: the worst block bound across agents.
    pub fn epsilon_bounds(&self, bs: BlockStructure) -> Vec<f64> {
        let mut out = vec![0.0_f64; bs.q()];
        for u in self.uncertainties.values() {
            for (o, b) in out.iter_mut().zip(u.block_bounds(bs)) {
                *o = o.max(b);
            }
        }
        out
    }

    pub fn noise_bound(&self, bs: BlockStructure) -> f64 {
        self.noise.bound(bs.m())
    }
}

/// True state of one agent at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: DVector<f64>,
    pub t: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dmat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn chain_matrices_q2_m1() {
        let cm = build_chain_matrices(BlockStructure::new(2, 1).unwrap());
        assert_eq!(cm.a, dmat(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(cm.b, dmat(2, 1, &[0.0, 1.0]));
        assert_eq!(cm.c, dmat(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn chain_matrices_single_block_is_identity_io() {
        let cm = build_chain_matrices(BlockStructure::new(1, 3).unwrap());
        assert_eq!(cm.a, DMatrix::zeros(3, 3));
        assert_eq!(cm.b, DMatrix::identity(3, 3));
        assert_eq!(cm.c, DMatrix::identity(3, 3));
    }

    #[test]
    fn chain_matrices_q3_m2_shift() {
        let cm = build_chain_matrices(BlockStructure::new(3, 2).unwrap());
        let mut expected = DMatrix::zeros(6, 6);
        for c in 0..2 {
            expected[(c, 2 + c)] = 1.0;
            expected[(2 + c, 4 + c)] = 1.0;
        }
        assert_eq!(cm.a, expected);
        // C A^{q-1} B = I_m
        let reach = &cm.c * &cm.a * &cm.a * &cm.b;
        assert_eq!(reach, DMatrix::identity(2, 2));
        assert!((crate::linalg::spectral_norm(&cm.b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_block_structure() {
        assert!(BlockStructure::new(0, 2).is_err());
        assert!(BlockStructure::new(2, 0).is_err());
    }

    #[test]
    fn linear_dynamics_last_basis_vector() {
        let bs = BlockStructure::new(3, 1).unwrap();
        let cm = build_chain_matrices(bs);
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let dx = eval_dynamics(
            &cm,
            &ZeroField { n: 3 },
            0.0,
            &x,
            Some(&DVector::zeros(1)),
            None,
        )
        .unwrap();
        assert_eq!(dx, &cm.a * &x);
    }

    #[test]
    fn chua_origin_is_equilibrium() {
        let bs = BlockStructure::new(2, 3).unwrap();
        let cm = build_chain_matrices(bs);
        let chua = ChuaField::default();
        let dx = eval_dynamics(
            &cm,
            &chua,
            0.0,
            &DVector::zeros(6),
            Some(&DVector::zeros(3)),
            None,
        )
        .unwrap();
        assert_eq!(dx, DVector::zeros(6));
        assert_eq!(chua.params.h(0.0), 0.0);
        assert!((chua.params.h(1.0) - (-0.6494)).abs() < 1e-12);
    }

    #[test]
    fn leader_uncertainty_at_zero() {
        let bs = BlockStructure::new(2, 3).unwrap();
        let cm = build_chain_matrices(bs);
        let mut spec = DisturbanceSpec::none();
        spec.uncertainties.insert(
            0,
            Uncertainty::Cosine {
                block: 2,
                amplitude: vec![1.0; 3],
                frequency: vec![1.0, 2.0, 3.0],
            },
        );
        let eps = spec.epsilon(bs, 0, 0.0).unwrap();
        let dx = eval_dynamics(
            &cm,
            &ChuaField::default(),
            0.0,
            &DVector::zeros(6),
            None,
            Some(&eps),
        )
        .unwrap();
        assert_eq!(dx.as_slice(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(spec.epsilon_bounds(bs), vec![0.0, 3.0_f64.sqrt()]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cm = build_chain_matrices(BlockStructure::new(2, 1).unwrap());
        let err = eval_dynamics(
            &cm,
            &ZeroField { n: 2 },
            0.0,
            &DVector::zeros(3),
            None,
            None,
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lipschitz_of_zero_and_linear() {
        let bx = StateBox::symmetric(1, 3.0);
        assert_eq!(
            estimate_lipschitz(&ZeroField { n: 1 }, &bx, 50, 1).unwrap(),
            0.0
        );
        let lin = LinearField {
            matrix: DMatrix::from_element(1, 1, 2.0),
        };
        for seed in [1, 7, 99] {
            let l = estimate_lipschitz(&lin, &bx, 50, seed).unwrap();
            assert!((l - 2.0).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn lipschitz_rejects_degenerate_box() {
        let bx = StateBox::symmetric(2, 0.0);
        assert!(matches!(
            estimate_lipschitz(&ZeroField { n: 2 }, &bx, 10, 0),
            Err(Error::DegenerateBox)
        ));
    }

    #[test]
    fn bounded_noise_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = NoiseModel::Bounded { bound: 0.5 };
        for _ in 0..1000 {
            assert!(noise.sample(3, &mut rng).norm() <= 0.5 + 1e-12);
        }
    }
}
