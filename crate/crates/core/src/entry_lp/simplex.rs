//! Dense two-phase tableau simplex for tiny LPs of the form
//! `min cᵀx  s.t.  Ax (≤|≥) b,  x ≥ 0`.
//!
//! Bland's rule is used for both entering and leaving variables, so the
//! pivot sequence (and therefore the result) is a deterministic function of
//! the input and cycling cannot occur.

use std::fmt;

const MAX_PIVOTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "infeasible"),
            LpError::Unbounded => write!(f, "unbounded"),
            LpError::IterationLimit => write!(f, "pivot limit reached"),
        }
    }
}

struct Tableau {
    rows: usize,
    width: usize, // number of variable columns; rhs lives at index `width`
    data: Vec<f64>,
    basis: Vec<usize>,
    pivot_tol: f64,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.width + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.width + 1;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..stride {
            self.data[pr * stride + c] *= inv;
        }
        self.data[pr * stride + pc] = 1.0;
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * stride + pc];
            if f != 0.0 {
                for c in 0..stride {
                    self.data[r * stride + c] -= f * self.data[pr * stride + c];
                }
                self.data[r * stride + pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Reduced costs `d_j = c_j − c_Bᵀ B⁻¹ A_j` and the current objective.
    fn reduced_costs(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let mut d = cost.to_vec();
        let mut z = 0.0;
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc -= cb * self.at(r, c);
                }
                z += cb * self.rhs(r);
            }
        }
        (d, z)
    }

    /// Runs simplex iterations on `cost`, never entering a column in `banned`.
    fn optimize(&mut self, cost: &[f64], banned: &[bool], cost_tol: f64) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let (d, _) = self.reduced_costs(cost);
            let entering = (0..self.width).find(|&c| !banned[c] && d[c] < -cost_tol);
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > self.pivot_tol {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio || (ratio == lratio && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return Err(LpError::Unbounded),
            }
        }
        Err(LpError::IterationLimit)
    }
}

/// Minimizes `cost · x` over `x ≥ 0` subject to one constraint per row of
/// `a` (row-major, `rhs.len()` rows of `cost.len()` coefficients).
pub fn minimize(cost: &[f64], a: &[f64], sense: &[Sense], rhs: &[f64]) -> Result<Vec<f64>, LpError> {
    let n = cost.len();
    let m = rhs.len();
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(sense.len(), m);

    let scale = a
        .iter()
        .chain(rhs)
        .chain(cost)
        .fold(1.0_f64, |s, x| s.max(x.abs()));
    let cost_scale = cost.iter().fold(1.0_f64, |s, x| s.max(x.abs()));

    // normalize to nonnegative right-hand sides
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = (0..m)
        .map(|r| {
            let coeffs = a[r * n..(r + 1) * n].to_vec();
            if rhs[r] < 0.0 {
                let flipped = match sense[r] {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                };
                (coeffs.iter().map(|x| -x).collect(), flipped, -rhs[r])
            } else {
                (coeffs, sense[r], rhs[r])
            }
        })
        .collect();

    let n_art = rows.iter().filter(|(_, s, _)| *s == Sense::Ge).count();
    let width = n + m + n_art;
    let stride = width + 1;
    let mut data = vec![0.0; m * stride];
    let mut basis = vec![0; m];
    let mut next_art = n + m;
    for (r, (coeffs, s, b)) in rows.drain(..).enumerate() {
        data[r * stride..r * stride + n].copy_from_slice(&coeffs);
        data[r * stride + width] = b;
        match s {
            Sense::Le => {
                data[r * stride + n + r] = 1.0;
                basis[r] = n + r;
            }
            Sense::Ge => {
                data[r * stride + n + r] = -1.0;
                data[r * stride + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
    }

    let mut t = Tableau { rows: m, width, data, basis, pivot_tol: 1e-12 };
    let is_art: Vec<bool> = (0..width).map(|c| c >= n + m).collect();

    if n_art > 0 {
        let phase1: Vec<f64> = (0..width).map(|c| if is_art[c] { 1.0 } else { 0.0 }).collect();
        t.optimize(&phase1, &vec![false; width], 1e-12)?;
        let (_, infeas) = t.reduced_costs(&phase1);
        if infeas > 1e-9 * scale {
            return Err(LpError::Infeasible);
        }
        // drive zero-valued artificials out of the basis where possible
        for r in 0..m {
            if is_art[t.basis[r]] {
                if let Some(pc) = (0..n + m).find(|&c| t.at(r, c).abs() > t.pivot_tol) {
                    t.pivot(r, pc);
                }
            }
        }
    }

    let mut phase2 = vec![0.0; width];
    phase2[..n].copy_from_slice(cost);
    t.optimize(&phase2, &is_art, 1e-12 * cost_scale)?;

    let snap = 1e-13 * scale;
    let mut x = vec![0.0; n];
    for r in 0..m {
        let var = t.basis[r];
        if var < n {
            let v = t.rhs(r);
            x[var] = if v.abs() <= snap { 0.0 } else { v.max(0.0) };
        }
    }
    Ok(x)
}
