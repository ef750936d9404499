//! Directed follower graph with leader pinning and the Ω certificate.
//!
//! Agents are numbered `1..=N`; the leader is agent `0`. An edge `(from, to)`
//! means `to` receives the output of `from`, i.e. `a[to][from] = 1`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<Vec<bool>>,
    leader_access: Vec<bool>,
    self_observe: Vec<bool>,
}

impl Topology {
    /// Builds a topology from 1-based `(from, to)` edges and the pinned set.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], pinned: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "topology needs at least one follower".into(),
            ));
        }
        let in_range = |id: usize| id >= 1 && id <= n;
        let mut adjacency = vec![vec![false; n]; n];
        for &(from, to) in edges {
            if !in_range(from) || !in_range(to) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({from} -> {to}) references an agent outside 1..={n}"
                )));
            }
            if from == to {
                return Err(Error::InvalidParameter(format!(
                    "self-loop on agent {from}"
                )));
            }
            adjacency[to - 1][from - 1] = true;
        }
        let mut leader_access = vec![false; n];
        for &p in pinned {
            if !in_range(p) {
                return Err(Error::InvalidParameter(format!(
                    "pinned agent {p} outside 1..={n}"
                )));
            }
            leader_access[p - 1] = true;
        }
        Ok(Self {
            n,
            adjacency,
            leader_access,
            self_observe: vec![true; n],
        })
    }

    pub fn with_self_observe(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "self-observe flags",
                expected: self.n,
                got: flags.len(),
            });
        }
        self.self_observe = flags;
        Ok(self)
    }

    /// Number of followers `N`.
    pub fn followers(&self) -> usize {
        self.n
    }

    /// `a_ij` with 1-based follower ids.
    pub fn a(&self, i: usize, j: usize) -> bool {
        self.adjacency[i - 1][j - 1]
    }

    /// `d_i`.
    pub fn d(&self, i: usize) -> bool {
        self.leader_access[i - 1]
    }

    pub fn self_observes(&self, i: usize) -> bool {
        self.self_observe[i - 1]
    }

    pub fn pinned(&self) -> Vec<usize> {
        (1..=self.n).filter(|&i| self.d(i)).collect()
    }

    /// Directed `(from, to)` follower edges in row-major order of `to`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 1..=self.n {
            for j in 1..=self.n {
                if self.a(i, j) {
                    out.push((j, i));
                }
            }
        }
        out
    }

    /// `ν_ij`: agent `i` receives the output of `j` (0 = leader).
    pub fn receives(&self, i: usize, j: usize) -> bool {
        match j {
            0 => self.d(i),
            j if j == i => self.self_observes(i),
            j => self.a(i, j),
        }
    }

    /// All `(i, j)` with `ν_ij = 1`, ordered by `i` then `j`.
    pub fn observed_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 1..=self.n {
            for j in 0..=self.n {
                if self.receives(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| {
            f64::from(u8::from(self.adjacency[r][c]))
        })
    }

    /// Graphviz rendering, leader included.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph consensus {\n  0 [shape=doublecircle];\n");
        for i in self.pinned() {
            let _ = writeln!(s, "  0 -> {i};");
        }
        for (from, to) in self.edges() {
            let _ = writeln!(s, "  {from} -> {to};");
        }
        s.push_str("}\n");
        s
    }
}

pub fn laplacian(topology: &Topology) -> DMatrix<f64> {
    let a = topology.adjacency_matrix();
    let mut l = -&a;
    for i in 0..topology.n {
        l[(i, i)] = a.row(i).sum();
    }
    l
}

/// `H = L + D`.
pub fn h_matrix(topology: &Topology) -> DMatrix<f64> {
    let mut h = laplacian(topology);
    for i in 0..topology.n {
        if topology.leader_access[i] {
            h[(i, i)] += 1.0;
        }
    }
    h
}

/// True iff every follower is reachable from the leader.
pub fn has_directed_spanning_tree(topology: &Topology) -> bool {
    let n = topology.n;
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| topology.leader_access[i]).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(j) = queue.pop_front() {
        for (i, s) in seen.iter_mut().enumerate() {
            if topology.adjacency[i][j] && !*s {
                *s = true;
                queue.push_back(i);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// How the diagonal weights were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMethod {
    /// `Hᵀ ω = 1`.
    UnitRhs,
    /// `ω_i = p_i / q_i` with `H q = 1`, `Hᵀ p = 1`, then refined.
    Fallback,
}

/// Positive diagonal `Ω` with `ΩH + HᵀΩ ≻ 0` and its derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaCertificate {
    pub omega: DVector<f64>,
    /// Smallest eigenvalue of `ΩH + HᵀΩ`.
    pub varrho: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// `max_ij |H_ij|`.
    pub h_max: f64,
    pub method: OmegaMethod,
}

impl OmegaCertificate {
    pub fn followers(&self) -> usize {
        self.omega.len()
    }
}

fn symmetrized(h: &DMatrix<f64>, omega: &DVector<f64>) -> DMatrix<f64> {
    let om = DMatrix::from_diagonal(omega);
    &om * h + h.transpose() * &om
}

fn certificate(h: &DMatrix<f64>, omega: DVector<f64>, method: OmegaMethod) -> OmegaCertificate {
    let varrho = linalg::rho_min(&symmetrized(h, &omega));
    OmegaCertificate {
        omega_min: omega.min(),
        omega_max: omega.max(),
        h_max: linalg::max_abs(h),
        varrho,
        omega,
        method,
    }
}

/// Certifies that `H` is a nonsingular M-matrix and returns an Ω certificate.
pub fn compute_omega(h: &DMatrix<f64>) -> Result<OmegaCertificate> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::NotMMatrix("H must be square and non-empty".into()));
    }
    for r in 0..n {
        if h[(r, r)] <= 0.0 {
            return Err(Error::NotMMatrix(format!(
                "non-positive diagonal at row {}",
                r + 1
            )));
        }
        for c in 0..n {
            if r != c && h[(r, c)] > 0.0 {
                return Err(Error::NotMMatrix(format!(
                    "positive off-diagonal entry at ({}, {})",
                    r + 1,
                    c + 1
                )));
            }
        }
    }
    // a Z-matrix is a nonsingular M-matrix iff its inverse is entrywise nonnegative
    let inv = h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotMMatrix("H is singular".into()))?;
    let scale = linalg::max_abs(&inv);
    if inv.iter().any(|&v| v < -1e-12 * scale) || !scale.is_finite() {
        return Err(Error::NotMMatrix("inverse has negative entries".into()));
    }
    // spectral cross-check; the Schur sweep may stall on defective matrices
    if let Some(ev) =
        linalg::eigenvalues(h, 10_000).and_then(|ev| ev.into_iter().find(|e| e.re <= 1e-12))
    {
        return Err(Error::NotMMatrix(format!(
            "eigenvalue {:.3e}{:+.3e}i has non-positive real part",
            ev.re, ev.im
        )));
    }

    let ones = DVector::from_element(n, 1.0);
    let lu_t = h.transpose().lu();
    let omega = lu_t
        .solve(&ones)
        .ok_or_else(|| Error::NotMMatrix("H is singular".into()))?;
    if omega.iter().all(|&w| w > 0.0) {
        let cert = certificate(h, omega, OmegaMethod::UnitRhs);
        if cert.varrho > 0.0 {
            return Ok(cert);
        }
    }

    let q = h
        .clone()
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::NotMMatrix("H is singular".into()))?;
    let p = lu_t
        .solve(&ones)
        .ok_or_else(|| Error::NotMMatrix("H is singular".into()))?;
    if q.iter().chain(p.iter()).any(|&v| v <= 0.0) {
        return Err(Error::NotMMatrix(
            "inverse is not entrywise positive".into(),
        ));
    }
    let omega = p.component_div(&q);
    let omega = refine_omega(h, omega);
    let cert = certificate(h, omega, OmegaMethod::Fallback);
    if cert.varrho > 0.0 {
        Ok(cert)
    } else {
        Err(Error::NotMMatrix(format!(
            "no diagonal certificate found (varrho = {:.3e})",
            cert.varrho
        )))
    }
}

/// Multiplicative coordinate search maximizing `ρ_min(ΩH + HᵀΩ) / ω_max`.
fn refine_omega(h: &DMatrix<f64>, mut omega: DVector<f64>) -> DVector<f64> {
    let score = |w: &DVector<f64>| linalg::rho_min(&symmetrized(h, w)) / w.max();
    let mut best = score(&omega);
    let mut factor = 2.0_f64;
    for _ in 0..40 {
        let mut improved = false;
        for k in 0..omega.len() {
            for f in [factor, 1.0 / factor] {
                let mut cand = omega.clone();
                cand[k] *= f;
                let s = score(&cand);
                if s > best {
                    best = s;
                    omega = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            factor = factor.sqrt();
            if factor < 1.0 + 1e-6 {
                break;
            }
        }
    }
    omega
}

/// Checks the spanning-tree condition, then certifies `H`.
pub fn certify(topology: &Topology) -> Result<OmegaCertificate> {
    if !has_directed_spanning_tree(topology) {
        return Err(Error::NotMMatrix(
            "leader does not root a directed spanning tree".into(),
        ));
    }
    compute_omega(&h_matrix(topology))
}

/// Ten-follower communication graph of the Chua experiment.
///
/// The ten-follower benchmark graph; agents 3 and 5 are pinned.
pub fn fig2_topology() -> Topology {
    const EDGES: [(usize, usize); 13] = [
        (2, 1),
        (3, 2),
        (1, 3),
        (3, 4),
        (5, 4),
        (10, 4),
        (5, 6),
        (8, 6),
        (6, 7),
        (7, 8),
        (9, 8),
        (5, 9),
        (9, 10),
    ];
    Topology::from_edges(10, &EDGES, &[3, 5]).expect("static topology is valid")
}
