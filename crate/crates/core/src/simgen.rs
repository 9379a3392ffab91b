//! Synthetic multi-task ground truths and Gaussian samples.
//!
//! Every generator builds `Ω⁽ⁱ⁾ = B_I⁽ⁱ⁾ + B_S + δI` with 0.5-valued edges,
//! and stores it as a [`PrecisionDecomposition`] with `Ω_I⁽ⁱ⁾ = B_I⁽ⁱ⁾` and
//! `Ω_S = B_S + δI`. The individual and shared off-diagonal supports are kept
//! disjoint: when a pair is drawn in both, the individual edge is dropped.
//! `δ = max(0, −min_i λ_min(B_I⁽ⁱ⁾ + B_S)) + 0.2`.
//!
//! # Reproducibility
//!
//! All randomness comes from one `ChaCha8Rng` (rand_chacha 0.9) created with
//! `seed_from_u64(seed)`, consumed in this order:
//!
//! 1. `B_S`: one `random::<f64>()` per pair `j < k` in row-major order, edge
//!    when the draw is below the edge probability;
//! 2. `B_I⁽¹⁾ … B_I⁽ᴷ⁾`, same scheme;
//! 3. hub protocols only: `rand::seq::index::sample(p, ⌈fraction·p⌉)` for the
//!    hub set (then sorted), followed by one `index::sample(p − 1, m)` per hub
//!    in ascending order selecting its partners (`m = round(0.9(p − 1))`, or
//!    `round(0.1(p − 1))` for the sparse class). The perturbed protocol draws
//!    all hubs for the odd-indexed class first, then for the even class.
//!
//! Hub rows and columns are cleared in every part before the hub edges are
//! written, so a hub's neighbourhood is exactly its drawn partners (plus
//! edges from other hubs).
//!
//! [`sample_gaussian`] uses a separate `ChaCha8Rng::seed_from_u64(seed)` and
//! draws `StandardNormal` values task by task, row by row.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{JeekError, Result};
use crate::estimator::TaskDataset;
use crate::kw_norm::PrecisionDecomposition;
use crate::Matrix;

pub const EDGE_VALUE: f64 = 0.5;
pub const DELTA_MARGIN: f64 = 0.2;
pub const DEFAULT_HUB_FRACTION: f64 = 0.05;
const MIN_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMetadata {
    pub protocol: String,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub delta: f64,
    /// 0-based hub node indices (hub protocols only).
    #[serde(default)]
    pub hubs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hub_fraction: Option<f64>,
    /// Which part of the decomposition holds the hub edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hub_placement: Option<String>,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub decomp: PrecisionDecomposition,
    pub delta: f64,
    pub metadata: TruthMetadata,
}

impl GroundTruth {
    /// Validates positive definiteness of every `Ω⁽ⁱ⁾` and support disjointness.
    pub fn new(decomp: PrecisionDecomposition, delta: f64, metadata: TruthMetadata) -> Result<Self> {
        let p = decomp.p();
        for j in 0..p {
            for c in 0..p {
                if j != c && decomp.omega_shared[(j, c)] != 0.0 {
                    if let Some(i) = decomp.omega_individual.iter().position(|m| m[(j, c)] != 0.0) {
                        return Err(JeekError::InvalidInput(format!(
                            "individual part {} and shared part overlap at ({}, {})",
                            i, j, c
                        )));
                    }
                }
            }
        }
        for (i, total) in decomp.totals().into_iter().enumerate() {
            if total != total.transpose() {
                return Err(JeekError::InvalidInput(format!("Ω[{}] is not symmetric", i)));
            }
            let lo = total.symmetric_eigen().eigenvalues.min();
            if !(lo > MIN_EIGENVALUE) {
                return Err(JeekError::NotPositiveDefinite(format!("Ω[{}] has minimum eigenvalue {}", i, lo)));
            }
        }
        Ok(Self { decomp, delta, metadata })
    }

    pub fn p(&self) -> usize {
        self.decomp.p()
    }

    pub fn k(&self) -> usize {
        self.decomp.k()
    }

    pub fn omega(&self, task: usize) -> Matrix {
        self.decomp.total(task)
    }

    /// Off-diagonal support `j < k` of `Ω_I⁽ⁱ⁾`.
    pub fn support_individual(&self, task: usize) -> BTreeSet<(usize, usize)> {
        upper_support(&self.decomp.omega_individual[task])
    }

    /// Off-diagonal support `j < k` of `Ω_S`.
    pub fn support_shared(&self) -> BTreeSet<(usize, usize)> {
        upper_support(&self.decomp.omega_shared)
    }

    pub fn hubs(&self) -> BTreeSet<usize> {
        self.metadata.hubs.iter().copied().collect()
    }
}

fn upper_support(m: &Matrix) -> BTreeSet<(usize, usize)> {
    let p = m.nrows();
    (0..p)
        .flat_map(|j| (j + 1..p).map(move |k| (j, k)))
        .filter(|&(j, k)| m[(j, k)] != 0.0)
        .collect()
}

fn rng_description() -> String {
    "ChaCha8Rng (rand_chacha 0.9) via seed_from_u64".to_string()
}

/// Symmetric 0/EDGE_VALUE matrix with independent upper-triangle draws.
fn draw_graph<F: Fn(usize, usize) -> f64>(rng: &mut ChaCha8Rng, p: usize, prob: F) -> Matrix {
    let mut m = Matrix::zeros(p, p);
    for j in 0..p {
        for k in j + 1..p {
            let u: f64 = rng.random();
            if u < prob(j, k) {
                m[(j, k)] = EDGE_VALUE;
                m[(k, j)] = EDGE_VALUE;
            }
        }
    }
    m
}

struct Parts {
    individual: Vec<Matrix>,
    shared: Matrix,
}

impl Parts {
    fn draw<F: Fn(usize, usize, Option<usize>) -> f64>(rng: &mut ChaCha8Rng, p: usize, k: usize, prob: F) -> Self {
        let shared = draw_graph(rng, p, |a, b| prob(a, b, None));
        let mut individual: Vec<Matrix> = (0..k).map(|i| draw_graph(rng, p, |a, b| prob(a, b, Some(i)))).collect();
        for m in individual.iter_mut() {
            m.zip_apply(&shared, |x, s| {
                if s != 0.0 {
                    *x = 0.0;
                }
            });
        }
        Self { individual, shared }
    }

    fn clear_rows(&mut self, nodes: &[usize]) {
        let p = self.shared.nrows();
        for m in self.individual.iter_mut().chain(std::iter::once(&mut self.shared)) {
            for &j in nodes {
                for c in 0..p {
                    m[(j, c)] = 0.0;
                    m[(c, j)] = 0.0;
                }
            }
        }
    }

    fn finish(self, metadata: TruthMetadata) -> Result<GroundTruth> {
        let p = self.shared.nrows();
        let lo = self
            .individual
            .iter()
            .map(|m| (m + &self.shared).symmetric_eigen().eigenvalues.min())
            .fold(f64::INFINITY, f64::min);
        let delta = (-lo).max(0.0) + DELTA_MARGIN;
        let mut shared = self.shared;
        for j in 0..p {
            shared[(j, j)] += delta;
        }
        let decomp = PrecisionDecomposition::new(self.individual, shared)?;
        GroundTruth::new(decomp, delta, TruthMetadata { delta, ..metadata })
    }
}

fn base_metadata(protocol: &str, p: usize, k: usize, seed: u64) -> TruthMetadata {
    TruthMetadata {
        protocol: protocol.to_string(),
        p,
        k,
        seed,
        delta: 0.0,
        hubs: Vec::new(),
        hub_fraction: None,
        hub_placement: None,
        rng: rng_description(),
    }
}

fn check_random_graph_args(p: usize, k: usize) -> Result<()> {
    if p < 2 {
        return Err(JeekError::InvalidInput(format!("p must be at least 2, got {}", p)));
    }
    if k == 0 {
        return Err(JeekError::InvalidInput("K must be at least 1".into()));
    }
    if k > 9 {
        return Err(JeekError::InvalidInput(format!(
            "random graph model needs K <= 9 (task edge probability 0.1*i), got {}",
            k
        )));
    }
    Ok(())
}

fn random_graph_parts(rng: &mut ChaCha8Rng, p: usize, k: usize) -> Parts {
    Parts::draw(rng, p, k, |_, _, task| match task {
        None => 0.1,
        Some(i) => 0.1 * (i + 1) as f64,
    })
}

/// Random graph model: task `i` (1-based) draws individual edges with
/// probability `0.1·i`, the shared part with probability 0.1.
pub fn gen_random_graphs(p: usize, k: usize, seed: u64) -> Result<GroundTruth> {
    check_random_graph_args(p, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_graph_parts(&mut rng, p, k).finish(base_metadata("random", p, k, seed))
}

fn hub_count(p: usize, fraction: f64) -> usize {
    ((fraction * p as f64) - 1e-9).ceil().max(1.0) as usize
}

fn draw_hubs(rng: &mut ChaCha8Rng, p: usize, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(JeekError::InvalidInput(format!("hub fraction must be in (0, 1], got {}", fraction)));
    }
    let mut hubs = index::sample(rng, p, hub_count(p, fraction)).into_vec();
    hubs.sort_unstable();
    Ok(hubs)
}

/// Partners of `hub`: `round(share·(p − 1))` distinct nodes other than `hub`.
fn draw_partners(rng: &mut ChaCha8Rng, p: usize, hub: usize, share: f64) -> Vec<usize> {
    let m = (share * (p - 1) as f64).round() as usize;
    index::sample(rng, p - 1, m)
        .into_iter()
        .map(|x| if x >= hub { x + 1 } else { x })
        .collect()
}

/// Random graphs plus co-hub nodes: each hub is joined to a random 90% of the
/// other nodes in every task. Hub edges live in the shared part.
pub fn gen_cohub(p: usize, k: usize, hub_fraction: f64, seed: u64) -> Result<GroundTruth> {
    check_random_graph_args(p, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = random_graph_parts(&mut rng, p, k);
    let hubs = draw_hubs(&mut rng, p, hub_fraction)?;
    parts.clear_rows(&hubs);
    for &j in &hubs {
        for c in draw_partners(&mut rng, p, j, 0.9) {
            parts.shared[(j, c)] = EDGE_VALUE;
            parts.shared[(c, j)] = EDGE_VALUE;
        }
    }
    let meta = TruthMetadata {
        hubs,
        hub_fraction: Some(hub_fraction),
        hub_placement: Some("shared".into()),
        ..base_metadata("cohub", p, k, seed)
    };
    parts.finish(meta)
}

/// Random graphs plus perturbed hubs: hub rows are 90% dense in tasks with an
/// odd 1-based index and 10% dense in the others. Hub edges live in the
/// individual parts.
pub fn gen_perturbed(p: usize, k: usize, hub_fraction: f64, seed: u64) -> Result<GroundTruth> {
    check_random_graph_args(p, k)?;
    if k < 2 {
        return Err(JeekError::InvalidInput("perturbed-hub protocol needs K >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = random_graph_parts(&mut rng, p, k);
    let hubs = draw_hubs(&mut rng, p, hub_fraction)?;
    let dense: Vec<Vec<usize>> = hubs.iter().map(|&j| draw_partners(&mut rng, p, j, 0.9)).collect();
    let sparse: Vec<Vec<usize>> = hubs.iter().map(|&j| draw_partners(&mut rng, p, j, 0.1)).collect();
    parts.clear_rows(&hubs);
    for (i, m) in parts.individual.iter_mut().enumerate() {
        let chosen = if i % 2 == 0 { &dense } else { &sparse };
        for (&j, partners) in hubs.iter().zip(chosen) {
            for &c in partners {
                m[(j, c)] = EDGE_VALUE;
                m[(c, j)] = EDGE_VALUE;
            }
        }
    }
    let meta = TruthMetadata {
        hubs,
        hub_fraction: Some(hub_fraction),
        hub_placement: Some("individual".into()),
        ..base_metadata("perturbed", p, k, seed)
    };
    parts.finish(meta)
}

/// `1 / (1 + exp(−(10 − d/3)))`.
pub fn brain_edge_probability(distance: f64) -> f64 {
    1.0 / (1.0 + (-(10.0 - distance / 3.0)).exp())
}

/// Distance-driven model: every individual and the shared part draw edge
/// `(j, k)` with probability [`brain_edge_probability`]`(d_jk)`.
pub fn gen_brain(distance: &Matrix, k: usize, seed: u64) -> Result<GroundTruth> {
    let p = distance.nrows();
    if distance.ncols() != p {
        return Err(JeekError::Shape(format!("distance matrix is {}x{}", p, distance.ncols())));
    }
    if p < 2 {
        return Err(JeekError::InvalidInput("distance matrix needs p >= 2".into()));
    }
    if k == 0 {
        return Err(JeekError::InvalidInput("K must be at least 1".into()));
    }
    for j in 0..p {
        if distance[(j, j)] != 0.0 {
            return Err(JeekError::InvalidInput(format!("distance diagonal must be zero at {}", j)));
        }
        for c in 0..p {
            let d = distance[(j, c)];
            if !(d >= 0.0) || !d.is_finite() {
                return Err(JeekError::InvalidInput(format!("distance ({}, {}) = {} is not a finite nonnegative value", j, c, d)));
            }
            if (d - distance[(c, j)]).abs() > 1e-12 * (1.0 + d.abs()) {
                return Err(JeekError::InvalidInput(format!("distance matrix is asymmetric at ({}, {})", j, c)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = Parts::draw(&mut rng, p, k, |a, b, _| brain_edge_probability(distance[(a, b)]));
    parts.finish(base_metadata("brain", p, k, seed))
}

/// `n_per_task` draws from `N(0, (Ω⁽ⁱ⁾)⁻¹)` for each task.
pub fn sample_gaussian(truth: &GroundTruth, n_per_task: usize, seed: u64) -> Result<TaskDataset> {
    let omegas = truth.decomp.totals();
    let tasks = sample_from_precisions(&omegas, n_per_task, seed)?;
    TaskDataset::new(tasks)
}

/// Zero-mean Gaussian rows with covariance `Ω⁻¹` for each precision in `omegas`.
pub fn sample_from_precisions(omegas: &[Matrix], n: usize, seed: u64) -> Result<Vec<Matrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    omegas
        .iter()
        .enumerate()
        .map(|(i, omega)| {
            let sigma = omega
                .clone()
                .cholesky()
                .ok_or_else(|| JeekError::NotPositiveDefinite(format!("Ω[{}]", i)))?
                .inverse();
            let sigma = (&sigma + sigma.transpose()) * 0.5;
            let l = sigma
                .cholesky()
                .ok_or_else(|| JeekError::NotPositiveDefinite(format!("Ω[{}]⁻¹", i)))?
                .unpack();
            let p = omega.nrows();
            let mut z = Matrix::zeros(p, n);
            for col in 0..n {
                for r in 0..p {
                    z[(r, col)] = rng.sample(StandardNormal);
                }
            }
            Ok((l * z).transpose())
        })
        .collect()
}
