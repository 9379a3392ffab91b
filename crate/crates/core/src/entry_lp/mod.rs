//! Entry-wise solution of the joint estimator.
//!
//! The joint program separates over matrix positions. At position `(j, k)`,
//! with `c_i` the backward-map entry of task `i`, `w_i`/`w_s` the individual
//! and shared weights, the group `(a_1..a_K, b)` solves
//!
//! ```text
//! min  Σ_i w_i |a_i| + K w_s |b|
//! s.t. |a_i + b − c_i| ≤ λ · min(w_i, w_s),   i = 1..K
//! ```
//!
//! which is solved as an LP over the nonnegative split `a_i = a_i⁺ − a_i⁻`,
//! `b = b⁺ − b⁻` (2K + 2 variables, 2K rows). Positions are independent, so
//! [`estimate`] farms them out to a rayon pool and assembles the results by
//! index; the output does not depend on the schedule.

pub mod simplex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{JeekError, Result};
use crate::estimator::BackwardMap;
use crate::kw_norm::{KnowledgeWeights, PrecisionDecomposition};
use simplex::Sense;

/// Relative weight of the secondary objective that prefers larger `|b|`
/// among equally good solutions.
pub const SHARED_TIE_BREAK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EntryProblem {
    pub c: Vec<f64>,
    pub w_ind: Vec<f64>,
    pub w_shared: f64,
    pub lambda: f64,
}

impl EntryProblem {
    pub fn new(c: Vec<f64>, w_ind: Vec<f64>, w_shared: f64, lambda: f64) -> Result<Self> {
        let prob = Self { c, w_ind, w_shared, lambda };
        prob.validate()?;
        Ok(prob)
    }

    fn validate(&self) -> Result<()> {
        if self.c.is_empty() || self.c.len() != self.w_ind.len() {
            return Err(JeekError::Shape(format!(
                "entry problem has {} targets and {} weights",
                self.c.len(),
                self.w_ind.len()
            )));
        }
        if self.c.iter().any(|x| !x.is_finite()) {
            return Err(JeekError::InvalidInput("entry targets must be finite".into()));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !self.w_ind.iter().all(|&w| positive(w)) || !positive(self.w_shared) {
            return Err(JeekError::InvalidInput("entry weights must be strictly positive".into()));
        }
        if !positive(self.lambda) {
            return Err(JeekError::InvalidInput(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.c.len()
    }

    /// Half-width `λ·min(w_i, w_s)` of task `i`'s constraint band.
    pub fn radius(&self, i: usize) -> f64 {
        self.lambda * self.w_ind[i].min(self.w_shared)
    }

    /// `Σ_i |w_i a_i| + K |w_s b|`.
    pub fn objective(&self, a: &[f64], b: f64) -> f64 {
        let ind: f64 = a.iter().zip(&self.w_ind).map(|(x, w)| (w * x).abs()).sum();
        ind + self.k() as f64 * (self.w_shared * b).abs()
    }

    /// Largest constraint violation `max_i (|a_i + b − c_i| − radius_i)`.
    pub fn violation(&self, a: &[f64], b: f64) -> f64 {
        (0..self.k())
            .map(|i| (a[i] + b - self.c[i]).abs() - self.radius(i))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySolution {
    pub a: Vec<f64>,
    pub b: f64,
    pub objective: f64,
    pub feasible: bool,
}

/// Solves one entry problem with the dense simplex.
pub fn solve_entry(prob: &EntryProblem) -> Result<EntrySolution> {
    prob.validate()?;
    solve_unchecked(prob)
}

fn solve_unchecked(prob: &EntryProblem) -> std::result::Result<EntrySolution, JeekError> {
    let k = prob.k();
    let n = 2 * k + 2;
    let shared_cost = k as f64 * prob.w_shared;

    // [a_1⁺, a_1⁻, …, a_K⁺, a_K⁻, b⁺, b⁻]
    let mut cost = Vec::with_capacity(n);
    for &w in &prob.w_ind {
        cost.push(w);
        cost.push(w);
    }
    let b_cost = shared_cost * (1.0 - SHARED_TIE_BREAK);
    cost.push(b_cost);
    cost.push(b_cost);

    let mut a = vec![0.0; 2 * k * n];
    let mut sense = Vec::with_capacity(2 * k);
    let mut rhs = Vec::with_capacity(2 * k);
    for i in 0..k {
        let r = prob.radius(i);
        for (row, s, bound) in [(2 * i, Sense::Le, prob.c[i] + r), (2 * i + 1, Sense::Ge, prob.c[i] - r)] {
            let base = row * n;
            a[base + 2 * i] = 1.0;
            a[base + 2 * i + 1] = -1.0;
            a[base + 2 * k] = 1.0;
            a[base + 2 * k + 1] = -1.0;
            sense.push(s);
            rhs.push(bound);
        }
    }

    let x = simplex::minimize(&cost, &a, &sense, &rhs).map_err(|e| JeekError::Lp(e.to_string()))?;
    let sol_a: Vec<f64> = (0..k).map(|i| x[2 * i] - x[2 * i + 1]).collect();
    let b = x[2 * k] - x[2 * k + 1];
    Ok(EntrySolution { objective: prob.objective(&sol_a, b), a: sol_a, b, feasible: true })
}

fn check_estimate_shapes(bmap: &BackwardMap, w: &KnowledgeWeights) -> Result<()> {
    if bmap.maps.is_empty() {
        return Err(JeekError::InvalidInput("backward map is empty".into()));
    }
    if bmap.k() != w.k() || bmap.p() != w.p() {
        return Err(JeekError::Shape(format!(
            "backward map has K={}, p={}; weights have K={}, p={}",
            bmap.k(),
            bmap.p(),
            w.k(),
            w.p()
        )));
    }
    Ok(())
}

/// Positions `(j, k)` with `k ≤ j`, in row order.
fn lower_triangle(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| (0..=j).map(move |k| (j, k))).collect()
}

/// Runs the full entry-wise estimator on the current rayon pool.
pub fn estimate(bmap: &BackwardMap, w: &KnowledgeWeights, lambda: f64) -> Result<PrecisionDecomposition> {
    check_estimate_shapes(bmap, w)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(JeekError::InvalidInput(format!("lambda must be positive, got {}", lambda)));
    }
    let k = bmap.k();
    let positions = lower_triangle(bmap.p());
    let solutions = positions
        .par_iter()
        .with_min_len(64)
        .map(|&(j, c)| {
            let prob = EntryProblem {
                c: bmap.maps.iter().map(|m| m[(j, c)]).collect(),
                w_ind: w.individual().iter().map(|m| m[(j, c)]).collect(),
                w_shared: w.shared()[(j, c)],
                lambda,
            };
            solve_unchecked(&prob)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let p = bmap.p();
    let mut out = PrecisionDecomposition::zeros(p, k);
    for (&(j, c), sol) in positions.iter().zip(&solutions) {
        for (i, &ai) in sol.a.iter().enumerate() {
            out.omega_individual[i][(j, c)] = ai;
            out.omega_individual[i][(c, j)] = ai;
        }
        out.omega_shared[(j, c)] = sol.b;
        out.omega_shared[(c, j)] = sol.b;
    }
    Ok(out)
}

/// [`estimate`] on a dedicated pool with `threads` workers.
pub fn estimate_with_threads(
    bmap: &BackwardMap,
    w: &KnowledgeWeights,
    lambda: f64,
    threads: usize,
) -> Result<PrecisionDecomposition> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| JeekError::InvalidInput(format!("cannot build thread pool: {}", e)))?;
    pool.install(|| estimate(bmap, w, lambda))
}

/// `{0.01 · sqrt(ln(Kp) / n_tot) · i : i = 1..steps}`.
pub fn lambda_grid(p: usize, k: usize, n_tot: usize, steps: usize) -> Vec<f64> {
    let base = 0.01 * (((k * p) as f64).ln() / n_tot as f64).sqrt();
    (1..=steps).map(|i| base * i as f64).collect()
}
