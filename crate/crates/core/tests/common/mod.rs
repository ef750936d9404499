//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use consensus_core::{Lemma2Params, Topology};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Chain matrices written out entry by entry.
pub fn chain(q: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = q * m;
    let mut a = DMatrix::zeros(n, n);
    for r in 0..n - m {
        a[(r, r + m)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, m);
    let mut c = DMatrix::zeros(m, n);
    for k in 0..m {
        b[(n - m + k, k)] = 1.0;
        c[(k, k)] = 1.0;
    }
    (a, b, c)
}

pub fn pascal_row(q: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..q {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// `K°` stacked as `C(q,1)·I, …, C(q,q)·I`.
pub fn binomial_observer_gain(q: usize, m: usize) -> DMatrix<f64> {
    let row = pascal_row(q);
    DMatrix::from_fn(
        q * m,
        m,
        |r, c| if r % m == c { row[r / m + 1] } else { 0.0 },
    )
}

/// `Kᶜ` concatenated as `C(q,q)·I, …, C(q,1)·I`.
pub fn binomial_control_gain(q: usize, m: usize) -> DMatrix<f64> {
    let row = pascal_row(q);
    DMatrix::from_fn(
        m,
        q * m,
        |r, c| if c % m == r { row[q - c / m] } else { 0.0 },
    )
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric 2×2 matrix in closed form.
pub fn min_eig_2x2(m: &DMatrix<f64>) -> f64 {
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    0.5 * (a + d) - (0.25 * (a - d).powi(2) + b * b).sqrt()
}

/// Positive definiteness via Cholesky, without any eigen solver.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}

/// Random pinned digraph on `n` followers that contains a leader-rooted
/// spanning tree: a random tree plus extra random edges.
pub fn random_rooted_topology(rng: &mut impl Rng, n: usize) -> Topology {
    let mut order: Vec<usize> = (1..=n).collect();
    for k in (1..order.len()).rev() {
        let j = rng.random_range(0..=k);
        order.swap(k, j);
    }
    let mut edges = Vec::new();
    let mut pinned = vec![order[0]];
    for k in 1..n {
        let parent = rng.random_range(0..=k);
        if parent == k {
            pinned.push(order[k]);
        } else {
            edges.push((order[parent], order[k]));
        }
    }
    for _ in 0..rng.random_range(0..=n) {
        let (f, t) = (rng.random_range(1..=n), rng.random_range(1..=n));
        if f != t && !edges.contains(&(f, t)) {
            edges.push((f, t));
        }
    }
    pinned.sort_unstable();
    pinned.dedup();
    Topology::from_edges(n, &edges, &pinned).expect("valid random graph")
}

/// `H = L + D` assembled straight from the edge list.
pub fn h_from_edges(t: &Topology) -> DMatrix<f64> {
    let n = t.followers();
    let mut h = DMatrix::zeros(n, n);
    for (from, to) in t.edges() {
        h[(to - 1, from - 1)] -= 1.0;
        h[(to - 1, to - 1)] += 1.0;
    }
    for p in t.pinned() {
        h[(p - 1, p - 1)] += 1.0;
    }
    h
}

/// Admissible random delay-inequality parameters.
pub fn random_lemma2(rng: &mut impl Rng, n: usize) -> Lemma2Params {
    let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
    let b: Vec<f64> = a
        .iter()
        .map(|&ai| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..2.0 * ai)
            }
        })
        .collect();
    let k = if rng.random_bool(0.25) {
        0.0
    } else {
        rng.random_range(0.0..2.0)
    };
    let v0 = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut p = Lemma2Params {
        gamma,
        a,
        b,
        delta: 1.0,
        k,
        v0,
    };
    p.delta = rng.random_range(0.3..0.95) * p.delta_limit();
    p
}

/// Integrates the equality case of the delay inequality with `s_i = v_i²`:
/// `γ_i s_i' = −a_i s_i + b_i ∫_{t−δ}^t s_i + k/n`, `s_i = 0` before 0.
///
/// Heun steps of `δ/100` with a trapezoid window sum over a history buffer.
/// Returns `(t, Σ γ_i s_i(t))` at every grid point up to `horizon`.
pub fn delay_oracle(p: &Lemma2Params, horizon: f64) -> Vec<(f64, f64)> {
    const D: usize = 100;
    let n = p.len();
    let h = p.delta / D as f64;
    let steps = (horizon / h).ceil() as usize;
    let kn = p.k / n as f64;
    // hist[i] holds s_i at grid points, with D zeros standing for t < 0
    let mut hist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = vec![0.0; D];
            v.reserve(steps + 1);
            v.push(p.v0[i] * p.v0[i]);
            v
        })
        .collect();
    // window sums Σ_{k=idx−D}^{idx} s_k for the current index
    let mut sums: Vec<f64> = hist.iter().map(|v| v.iter().sum()).collect();
    let energy = |hist: &Vec<Vec<f64>>, idx: usize| -> f64 {
        (0..n).map(|i| p.gamma[i] * hist[i][idx]).sum()
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, energy(&hist, D)));
    for step in 0..steps {
        let idx = D + step;
        for i in 0..n {
            let s = &hist[i];
            let cur = s[idx];
            let integral = h * (sums[i] - 0.5 * (s[idx - D] + cur));
            let f0 = (-p.a[i] * cur + p.b[i] * integral + kn) / p.gamma[i];
            let pred = cur + h * f0;
            let next_sum = sums[i] - s[idx - D] + pred;
            let next_integral = h * (next_sum - 0.5 * (s[idx + 1 - D] + pred));
            let f1 = (-p.a[i] * pred + p.b[i] * next_integral + kn) / p.gamma[i];
            let next = cur + 0.5 * h * (f0 + f1);
            sums[i] += next - s[idx - D];
            hist[i].push(next);
        }
        out.push(((step + 1) as f64 * h, energy(&hist, idx + 1)));
    }
    out
}

/// `d_i c̄ Kᶜ Γ_λ (x̂_{i,0} − x̂_{i,i}) + c̄ Kᶜ Γ_λ Σ_j a_ij (x̂_{i,j} − x̂_{i,i})`
/// evaluated with dense matrices.
pub fn dense_control(
    topology: &Topology,
    q: usize,
    m: usize,
    c_bar: f64,
    lambda: f64,
    i: usize,
    estimates: &dyn Fn(usize) -> DVector<f64>,
) -> DVector<f64> {
    let gamma = DMatrix::from_fn(q * m, q * m, |r, c| {
        if r == c {
            lambda.powi((q - r / m) as i32)
        } else {
            0.0
        }
    });
    let kg = c_bar * binomial_control_gain(q, m) * gamma;
    let own = estimates(i);
    let mut u = DVector::zeros(m);
    if topology.d(i) {
        u += &kg * (estimates(0) - &own);
    }
    for j in 1..=topology.followers() {
        if j != i && topology.a(i, j) {
            u += &kg * (estimates(j) - &own);
        }
    }
    u
}
