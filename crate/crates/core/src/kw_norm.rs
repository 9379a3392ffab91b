//! Knowledge weights, the knowledge-weighted ℓ1 norm and its dual, and the
//! weight builders for distance-, hub-, perturbed-hub- and group-type prior
//! knowledge.
//!
//! Node indices in this module are 0-based.

use std::collections::BTreeSet;

use crate::error::{JeekError, Result};
use crate::Matrix;

const SYMMETRY_TOL: f64 = 1e-12;

fn check_square(m: &Matrix, p: usize, what: &str) -> Result<()> {
    if m.nrows() != p || m.ncols() != p {
        return Err(JeekError::Shape(format!(
            "{} is {}x{}, expected {}x{}",
            what,
            m.nrows(),
            m.ncols(),
            p,
            p
        )));
    }
    Ok(())
}

fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    let p = m.nrows();
    for j in 0..p {
        for k in 0..j {
            let (a, b) = (m[(j, k)], m[(k, j)]);
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(JeekError::InvalidInput(format!("{} is not symmetric at ({}, {})", what, j, k)));
            }
        }
    }
    Ok(())
}

fn check_positive(m: &Matrix, what: &str) -> Result<()> {
    if let Some(bad) = m.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(JeekError::InvalidInput(format!(
            "{} must be strictly positive and finite, found {}",
            what, bad
        )));
    }
    Ok(())
}

/// Strictly positive, symmetric weights `W_I⁽¹⁾..W_I⁽ᴷ⁾` and `W_S`.
///
/// Small weights mark entries that prior knowledge expects to be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeWeights {
    w_individual: Vec<Matrix>,
    w_shared: Matrix,
}

impl KnowledgeWeights {
    pub fn new(w_individual: Vec<Matrix>, w_shared: Matrix) -> Result<Self> {
        if w_individual.is_empty() {
            return Err(JeekError::InvalidInput("need at least one individual weight matrix".into()));
        }
        let p = w_shared.nrows();
        check_square(&w_shared, p, "W_S")?;
        check_positive(&w_shared, "W_S")?;
        check_symmetric(&w_shared, "W_S")?;
        for (i, w) in w_individual.iter().enumerate() {
            let name = format!("W_I[{}]", i);
            check_square(w, p, &name)?;
            check_positive(w, &name)?;
            check_symmetric(w, &name)?;
        }
        Ok(Self { w_individual, w_shared })
    }

    /// All-ones weights: no prior knowledge.
    pub fn ones(p: usize, k: usize) -> Self {
        Self {
            w_individual: vec![Matrix::from_element(p, p, 1.0); k],
            w_shared: Matrix::from_element(p, p, 1.0),
        }
    }

    pub fn individual(&self) -> &[Matrix] {
        &self.w_individual
    }

    pub fn shared(&self) -> &Matrix {
        &self.w_shared
    }

    pub fn k(&self) -> usize {
        self.w_individual.len()
    }

    pub fn p(&self) -> usize {
        self.w_shared.nrows()
    }
}

/// `Ω⁽ⁱ⁾ = Ω_I⁽ⁱ⁾ + Ω_S` for every task.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionDecomposition {
    pub omega_individual: Vec<Matrix>,
    pub omega_shared: Matrix,
}

impl PrecisionDecomposition {
    pub fn new(omega_individual: Vec<Matrix>, omega_shared: Matrix) -> Result<Self> {
        if omega_individual.is_empty() {
            return Err(JeekError::InvalidInput("need at least one task".into()));
        }
        let p = omega_shared.nrows();
        check_square(&omega_shared, p, "Ω_S")?;
        for (i, m) in omega_individual.iter().enumerate() {
            check_square(m, p, &format!("Ω_I[{}]", i))?;
        }
        Ok(Self { omega_individual, omega_shared })
    }

    pub fn zeros(p: usize, k: usize) -> Self {
        Self { omega_individual: vec![Matrix::zeros(p, p); k], omega_shared: Matrix::zeros(p, p) }
    }

    pub fn k(&self) -> usize {
        self.omega_individual.len()
    }

    pub fn p(&self) -> usize {
        self.omega_shared.nrows()
    }

    pub fn total(&self, task: usize) -> Matrix {
        &self.omega_individual[task] + &self.omega_shared
    }

    pub fn totals(&self) -> Vec<Matrix> {
        (0..self.k()).map(|i| self.total(i)).collect()
    }

    /// Nonzero off-diagonal entries of `Ω_I⁽ⁱ⁾` summed over tasks, and of `Ω_S`.
    pub fn sparsity_counts(&self) -> (usize, usize) {
        let off = |m: &Matrix| {
            let p = m.nrows();
            (0..p).flat_map(|j| (0..p).map(move |k| (j, k))).filter(|&(j, k)| j != k && m[(j, k)] != 0.0).count()
        };
        (self.omega_individual.iter().map(off).sum(), off(&self.omega_shared))
    }
}

fn check_shapes(decomp: &PrecisionDecomposition, w: &KnowledgeWeights) -> Result<()> {
    if decomp.k() != w.k() || decomp.p() != w.p() {
        return Err(JeekError::Shape(format!(
            "decomposition has K={}, p={}; weights have K={}, p={}",
            decomp.k(),
            decomp.p(),
            w.k(),
            w.p()
        )));
    }
    Ok(())
}

/// `Σᵢ ‖W_I⁽ⁱ⁾ ∘ Ω_I⁽ⁱ⁾‖₁ + K·‖W_S ∘ Ω_S‖₁`.
///
/// The shared block counts K times, once per task it appears in.
pub fn kw_norm_value(decomp: &PrecisionDecomposition, w: &KnowledgeWeights) -> Result<f64> {
    check_shapes(decomp, w)?;
    let weighted = |m: &Matrix, wm: &Matrix| m.zip_fold(wm, 0.0, |acc, x, y| acc + (x * y).abs());
    let individual: f64 = decomp
        .omega_individual
        .iter()
        .zip(&w.w_individual)
        .map(|(m, wm)| weighted(m, wm))
        .sum();
    Ok(individual + decomp.k() as f64 * weighted(&decomp.omega_shared, &w.w_shared))
}

/// Dual kw-norm of a `p × Kp` block `u = (u⁽¹⁾, …, u⁽ᴷ⁾)`:
/// `max(‖u / W_I^tot‖∞, ‖u / W_S^tot‖∞)` with entrywise division.
pub fn kw_dual_norm(u: &Matrix, w: &KnowledgeWeights) -> Result<f64> {
    let (p, k) = (w.p(), w.k());
    if u.nrows() != p || u.ncols() != k * p {
        return Err(JeekError::Shape(format!(
            "dual argument is {}x{}, expected {}x{}",
            u.nrows(),
            u.ncols(),
            p,
            k * p
        )));
    }
    let mut best = 0.0_f64;
    for (i, wi) in w.w_individual.iter().enumerate() {
        let block = u.columns(i * p, p);
        for j in 0..p {
            for c in 0..p {
                let x = block[(j, c)].abs();
                best = best.max(x / wi[(j, c)]).max(x / w.w_shared[(j, c)]);
            }
        }
    }
    Ok(best)
}

/// Case of an explicit knowledge matrix (e.g. a distance matrix): every
/// individual and the shared weight equal `w`.
pub fn build_matrix_weights(w: &Matrix, k: usize) -> Result<KnowledgeWeights> {
    if k == 0 {
        return Err(JeekError::InvalidInput("K must be at least 1".into()));
    }
    KnowledgeWeights::new(vec![w.clone(); k], w.clone())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(JeekError::InvalidInput(format!("gamma must be a finite value > 1, got {}", gamma)));
    }
    Ok(())
}

fn check_nodes(p: usize, nodes: &BTreeSet<usize>) -> Result<()> {
    if let Some(&bad) = nodes.iter().find(|&&j| j >= p) {
        return Err(JeekError::InvalidInput(format!("node index {} out of range for p = {}", bad, p)));
    }
    Ok(())
}

fn set_row_col_off_diagonal(m: &mut Matrix, j: usize, value: f64) {
    for k in 0..m.nrows() {
        if k != j {
            m[(j, k)] = value;
            m[(k, j)] = value;
        }
    }
}

/// Co-hub knowledge: `W_S` is `1/γ` on every off-diagonal entry touching a
/// hub node, 1 elsewhere; individual weights stay at 1.
pub fn build_cohub_weights(p: usize, k: usize, hubs: &BTreeSet<usize>, gamma: f64) -> Result<KnowledgeWeights> {
    check_gamma(gamma)?;
    check_nodes(p, hubs)?;
    if k == 0 {
        return Err(JeekError::InvalidInput("K must be at least 1".into()));
    }
    let mut shared = Matrix::from_element(p, p, 1.0);
    for &j in hubs {
        set_row_col_off_diagonal(&mut shared, j, 1.0 / gamma);
    }
    Ok(KnowledgeWeights { w_individual: vec![Matrix::from_element(p, p, 1.0); k], w_shared: shared })
}

/// Perturbed-hub knowledge with the default class convention: tasks with an
/// odd 1-based index (0, 2, 4, … here) have the hubs present.
pub fn build_perturbed_weights(p: usize, k: usize, hubs: &BTreeSet<usize>, gamma: f64) -> Result<KnowledgeWeights> {
    let present: Vec<bool> = (0..k).map(|i| i % 2 == 0).collect();
    build_perturbed_weights_with_classes(p, hubs, gamma, &present)
}

/// Perturbed-hub knowledge: hub rows of `W_I⁽ⁱ⁾` are `1/γ` for tasks where
/// `present[i]`, `γ` otherwise. `W_S` stays at 1.
pub fn build_perturbed_weights_with_classes(
    p: usize,
    hubs: &BTreeSet<usize>,
    gamma: f64,
    present: &[bool],
) -> Result<KnowledgeWeights> {
    check_gamma(gamma)?;
    check_nodes(p, hubs)?;
    if present.len() < 2 {
        return Err(JeekError::InvalidInput("perturbed-hub knowledge needs K >= 2".into()));
    }
    let individual = present
        .iter()
        .map(|&on| {
            let mut m = Matrix::from_element(p, p, 1.0);
            let value = if on { 1.0 / gamma } else { gamma };
            for &j in hubs {
                set_row_col_off_diagonal(&mut m, j, value);
            }
            m
        })
        .collect();
    Ok(KnowledgeWeights { w_individual: individual, w_shared: Matrix::from_element(p, p, 1.0) })
}

/// Group or known-edge knowledge: `W_S` is `1/γ` on each listed pair (both
/// orientations), 1 elsewhere.
pub fn build_group_weights(p: usize, k: usize, edges: &[(usize, usize)], gamma: f64) -> Result<KnowledgeWeights> {
    check_gamma(gamma)?;
    if k == 0 {
        return Err(JeekError::InvalidInput("K must be at least 1".into()));
    }
    let mut shared = Matrix::from_element(p, p, 1.0);
    for &(j, c) in edges {
        if j >= p || c >= p {
            return Err(JeekError::InvalidInput(format!("pair ({}, {}) out of range for p = {}", j, c, p)));
        }
        if j == c {
            return Err(JeekError::InvalidInput(format!("self-pair ({}, {}) is not an edge", j, c)));
        }
        shared[(j, c)] = 1.0 / gamma;
        shared[(c, j)] = 1.0 / gamma;
    }
    Ok(KnowledgeWeights { w_individual: vec![Matrix::from_element(p, p, 1.0); k], w_shared: shared })
}

/// All unordered pairs within a node group.
pub fn group_edges(nodes: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let v: Vec<usize> = nodes.iter().copied().collect();
    let mut out = Vec::new();
    for (a, &j) in v.iter().enumerate() {
        for &c in &v[a + 1..] {
            out.push((j, c));
        }
    }
    out
}
