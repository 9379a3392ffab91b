//! Sample covariances, the soft-thresholding operator `T_v`, and the proxy
//! backward map `[T_v(Σ̂⁽ⁱ⁾)]⁻¹` that every entry problem reads from.

use rayon::prelude::*;

use crate::error::{JeekError, Result};
use crate::Matrix;

/// Smallest reciprocal 1-norm condition number accepted by [`select_v`].
pub const MIN_RCOND: f64 = 1e-10;

/// Per-entry tolerance on `c · T_v(Σ̂) − I`.
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-6;

/// K sample matrices over a shared set of `p` variables. Task `i` is `n_i × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    tasks: Vec<Matrix>,
    variable_names: Option<Vec<String>>,
}

impl TaskDataset {
    pub fn new(tasks: Vec<Matrix>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(JeekError::InvalidInput("dataset needs at least one task".into()));
        }
        let p = tasks[0].ncols();
        if p == 0 {
            return Err(JeekError::InvalidInput("dataset needs at least one variable".into()));
        }
        for (i, x) in tasks.iter().enumerate() {
            if x.ncols() != p {
                return Err(JeekError::Shape(format!(
                    "task {} has {} variables, task 0 has {}",
                    i,
                    x.ncols(),
                    p
                )));
            }
            if x.nrows() < 2 {
                return Err(JeekError::InvalidInput(format!(
                    "task {} has {} samples; at least 2 are required",
                    i,
                    x.nrows()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(JeekError::InvalidInput(format!("task {} contains non-finite values", i)));
            }
        }
        Ok(Self { tasks, variable_names: None })
    }

    pub fn with_variable_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(JeekError::Shape(format!(
                "{} variable names for {} variables",
                names.len(),
                self.p()
            )));
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    pub fn tasks(&self) -> &[Matrix] {
        &self.tasks
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    pub fn k(&self) -> usize {
        self.tasks.len()
    }

    pub fn p(&self) -> usize {
        self.tasks[0].ncols()
    }

    pub fn n(&self, task: usize) -> usize {
        self.tasks[task].nrows()
    }

    /// Total sample count over all tasks.
    pub fn n_tot(&self) -> usize {
        self.tasks.iter().map(|x| x.nrows()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub sigmas: Vec<Matrix>,
}

impl CovarianceSet {
    pub fn new(sigmas: Vec<Matrix>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(JeekError::InvalidInput("covariance set is empty".into()));
        }
        let p = sigmas[0].nrows();
        for (i, s) in sigmas.iter().enumerate() {
            if s.nrows() != p || s.ncols() != p {
                return Err(JeekError::Shape(format!("covariance {} is not {}x{}", i, p, p)));
            }
        }
        Ok(Self { sigmas })
    }

    pub fn k(&self) -> usize {
        self.sigmas.len()
    }

    pub fn p(&self) -> usize {
        self.sigmas[0].nrows()
    }
}

/// Proxy backward maps `c⁽ⁱ⁾ = [T_v(Σ̂⁽ⁱ⁾)]⁻¹` and the `v` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardMap {
    pub maps: Vec<Matrix>,
    pub v_used: f64,
}

impl BackwardMap {
    pub fn k(&self) -> usize {
        self.maps.len()
    }

    pub fn p(&self) -> usize {
        self.maps[0].nrows()
    }
}

/// Unbiased (`n_i − 1` divisor) sample covariance of every task.
pub fn sample_covariance(data: &TaskDataset) -> Result<CovarianceSet> {
    let sigmas = data
        .tasks()
        .par_iter()
        .map(covariance_of)
        .collect::<Result<Vec<_>>>()?;
    Ok(CovarianceSet { sigmas })
}

fn covariance_of(x: &Matrix) -> Result<Matrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(JeekError::InvalidInput(format!("{} samples; at least 2 are required", n)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(JeekError::InvalidInput("non-finite sample value".into()));
    }
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut sigma = centered.tr_mul(&centered) / (n as f64 - 1.0);
    // tr_mul is symmetric up to rounding; make it exact
    let p = sigma.nrows();
    for j in 0..p {
        for k in 0..j {
            let s = sigma[(j, k)];
            sigma[(k, j)] = s;
        }
    }
    Ok(sigma)
}

/// `T_v`: adds `v` to the diagonal and soft-thresholds off-diagonals at `v`.
pub fn soft_threshold_matrix(a: &Matrix, v: f64) -> Result<Matrix> {
    if !(v >= 0.0) {
        return Err(JeekError::InvalidInput(format!("threshold v must be nonnegative, got {}", v)));
    }
    if a.nrows() != a.ncols() {
        return Err(JeekError::Shape(format!("T_v needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let p = a.nrows();
    let mut out = Matrix::zeros(p, p);
    for j in 0..p {
        out[(j, j)] = a[(j, j)] + v;
        for k in 0..j {
            let t = soft_threshold(a[(j, k)], v);
            out[(j, k)] = t;
            out[(k, j)] = t;
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn soft_threshold(x: f64, v: f64) -> f64 {
    let m = x.abs() - v;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// The default threshold grid `{0.001·i : i = 1..1000}`.
pub fn default_v_grid() -> Vec<f64> {
    (1..=1000).map(|i| 0.001 * i as f64).collect()
}

/// Smallest `v` in `grid` for which every task's `T_v(Σ̂⁽ⁱ⁾)` is invertible.
///
/// A candidate is accepted when LU with partial pivoting succeeds, the
/// reciprocal 1-norm condition number exceeds [`MIN_RCOND`], and the computed
/// inverse satisfies the [`INVERSE_RESIDUAL_TOL`] identity check.
pub fn select_v(cov: &CovarianceSet, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(JeekError::InvalidInput("threshold grid is empty".into()));
    }
    if grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(JeekError::InvalidInput("threshold grid must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(JeekError::InvalidInput("threshold grid must be ascending".into()));
    }
    for &v in grid {
        let ok = cov
            .sigmas
            .par_iter()
            .all(|s| soft_threshold_matrix(s, v).ok().and_then(|t| checked_inverse(&t)).is_some());
        if ok {
            return Ok(v);
        }
    }
    Err(JeekError::NoInvertibleThreshold)
}

/// Inverts `T_v(Σ̂⁽ⁱ⁾)` for every task.
pub fn backward_map(cov: &CovarianceSet, v: f64) -> Result<BackwardMap> {
    let maps = cov
        .sigmas
        .par_iter()
        .enumerate()
        .map(|(task, s)| {
            let t = soft_threshold_matrix(s, v)?;
            checked_inverse(&t).ok_or(JeekError::Singular { task, v })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BackwardMap { maps, v_used: v })
}

/// Convenience: covariance, threshold selection over `v_grid`, and inversion.
pub fn backward_map_from_data(data: &TaskDataset, v_grid: &[f64]) -> Result<BackwardMap> {
    let cov = sample_covariance(data)?;
    let v = select_v(&cov, v_grid)?;
    backward_map(&cov, v)
}

fn one_norm(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reciprocal 1-norm condition number `1 / (‖A‖₁‖A⁻¹‖₁)`.
pub fn reciprocal_condition(a: &Matrix, inverse: &Matrix) -> f64 {
    let d = one_norm(a) * one_norm(inverse);
    if d.is_finite() && d > 0.0 {
        1.0 / d
    } else {
        0.0
    }
}

/// LU inverse, or `None` if the matrix fails any acceptance check.
pub(crate) fn checked_inverse(a: &Matrix) -> Option<Matrix> {
    let inv = a.clone().lu().try_inverse()?;
    if inv.iter().any(|x| !x.is_finite()) {
        return None;
    }
    if reciprocal_condition(a, &inv) <= MIN_RCOND {
        return None;
    }
    let residual = &inv * a - Matrix::identity(a.nrows(), a.ncols());
    if residual.amax() > INVERSE_RESIDUAL_TOL {
        return None;
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: explicit double loop over variable pairs.
    fn brute_force_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = rows.len();
        let p = rows[0].len();
        let mut mean = vec![0.0; p];
        for r in rows {
            for j in 0..p {
                mean[j] += r[j] / n as f64;
            }
        }
        let mut out = vec![vec![0.0; p]; p];
        for j in 0..p {
            for k in 0..p {
                let mut s = 0.0;
                for r in rows {
                    s += (r[j] - mean[j]) * (r[k] - mean[k]);
                }
                out[j][k] = s / (n as f64 - 1.0);
            }
        }
        out
    }

    /// Independent oracle: Gauss-Jordan elimination with full row scan pivoting.
    fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut aug: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| aug[x][col].abs().partial_cmp(&aug[y][col].abs()).unwrap()).unwrap();
            aug.swap(col, piv);
            let d = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[r][col];
                    for c in 0..2 * n {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
        aug.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn two_point_variance() {
        let data = TaskDataset::new(vec![Matrix::from_row_slice(2, 1, &[0.0, 2.0])]).unwrap();
        let cov = sample_covariance(&data).unwrap();
        assert_eq!(cov.sigmas[0][(0, 0)], 2.0);
    }

    #[test]
    fn identical_rows_have_zero_covariance() {
        let x = Matrix::from_row_slice(4, 3, &[1.0, -2.0, 3.5, 1.0, -2.0, 3.5, 1.0, -2.0, 3.5, 1.0, -2.0, 3.5]);
        let cov = sample_covariance(&TaskDataset::new(vec![x]).unwrap()).unwrap();
        assert!(cov.sigmas[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn covariance_matches_double_loop() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 4.0]];
        let expected = brute_force_covariance(&rows);
        let x = Matrix::from_row_slice(3, 2, &rows.concat());
        let cov = sample_covariance(&TaskDataset::new(vec![x]).unwrap()).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_abs_diff_eq!(cov.sigmas[0][(j, k)], expected[j][k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn covariance_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(9, 7, |_, _| rng.random::<f64>() - 0.5);
        let s = &sample_covariance(&TaskDataset::new(vec![x]).unwrap()).unwrap().sigmas[0];
        assert_eq!(s, &s.transpose());
        assert!(s.diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn rejects_bad_datasets() {
        assert!(TaskDataset::new(vec![]).is_err());
        assert!(TaskDataset::new(vec![Matrix::zeros(1, 3)]).is_err());
        assert!(TaskDataset::new(vec![Matrix::zeros(3, 3), Matrix::zeros(3, 2)]).is_err());
        let mut x = Matrix::zeros(3, 2);
        x[(1, 1)] = f64::NAN;
        assert!(TaskDataset::new(vec![x]).is_err());
        assert!(covariance_of(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn soft_threshold_examples() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let t = soft_threshold_matrix(&a, 0.2).unwrap();
        assert_abs_diff_eq!(t[(0, 0)], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(1, 1)], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(0, 1)], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(1, 0)], 0.3, epsilon = 1e-15);

        assert_eq!(soft_threshold_matrix(&a, 0.0).unwrap(), a);

        let b = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]);
        assert_eq!(soft_threshold_matrix(&b, 0.2).unwrap()[(0, 1)], 0.0);
        assert_abs_diff_eq!(soft_threshold(-0.7, 0.2), -0.5, epsilon = 1e-15);

        assert!(soft_threshold_matrix(&a, -0.1).is_err());
        assert!(soft_threshold_matrix(&a, f64::NAN).is_err());
    }

    #[test]
    fn select_v_examples() {
        let cov = CovarianceSet::new(vec![Matrix::identity(4, 4)]).unwrap();
        assert_eq!(select_v(&cov, &[0.001]).unwrap(), 0.001);

        let singular = CovarianceSet::new(vec![Matrix::from_element(2, 2, 1.0)]).unwrap();
        assert_eq!(select_v(&singular, &[0.1]).unwrap(), 0.1);
        // v = 0 leaves [[1,1],[1,1]] singular, so the next candidate is taken
        assert_eq!(select_v(&singular, &[0.0, 0.1, 0.2]).unwrap(), 0.1);
        assert!(matches!(select_v(&singular, &[0.0]), Err(JeekError::NoInvertibleThreshold)));

        assert!(select_v(&cov, &[]).is_err());
        assert!(select_v(&cov, &[0.2, 0.1]).is_err());
        assert!(select_v(&cov, &[-0.1]).is_err());
    }

    #[test]
    fn select_v_on_rank_deficient_covariance() {
        // n = 6 < p = 12, so Σ̂ has rank ≤ 5
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Matrix::from_fn(6, 12, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let cov = sample_covariance(&TaskDataset::new(vec![x]).unwrap()).unwrap();
        assert!(cov.sigmas[0].clone().lu().determinant().abs() < 1e-12);

        let v = select_v(&cov, &default_v_grid()).unwrap();
        let t = soft_threshold_matrix(&cov.sigmas[0], v).unwrap();
        // independent check: condition number from the symmetric eigen-decomposition
        let eig = t.clone().symmetric_eigen();
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), e| (lo.min(e.abs()), hi.max(e.abs())));
        assert!(lo > 0.0);
        assert!(hi / lo < 1e10);
    }

    #[test]
    fn backward_map_examples() {
        let cov = CovarianceSet::new(vec![Matrix::identity(3, 3)]).unwrap();
        let b = backward_map(&cov, 0.5).unwrap();
        assert_eq!(b.v_used, 0.5);
        for j in 0..3 {
            for k in 0..3 {
                let want = if j == k { 1.0 / 1.5 } else { 0.0 };
                assert_abs_diff_eq!(b.maps[0][(j, k)], want, epsilon = 1e-15);
            }
        }

        let cov = CovarianceSet::new(vec![Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0])]).unwrap();
        let b = backward_map(&cov, 0.0).unwrap();
        assert_eq!(b.maps[0], Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]));
    }

    #[test]
    fn backward_map_names_singular_task() {
        let cov = CovarianceSet::new(vec![Matrix::identity(2, 2), Matrix::from_element(2, 2, 1.0)]).unwrap();
        match backward_map(&cov, 0.0) {
            Err(JeekError::Singular { task, .. }) => assert_eq!(task, 1),
            other => panic!("expected singular error, got {:?}", other),
        }
    }

    #[test]
    fn backward_map_matches_gauss_jordan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Matrix::from_fn(5, 5, |_, _| rng.random::<f64>() - 0.5);
        let sigma = &g * g.transpose() + Matrix::identity(5, 5);
        let v = 0.05;
        let t = soft_threshold_matrix(&sigma, v).unwrap();
        let rows: Vec<Vec<f64>> = (0..5).map(|j| (0..5).map(|k| t[(j, k)]).collect()).collect();
        let oracle = gauss_jordan_inverse(&rows);

        let b = backward_map(&CovarianceSet::new(vec![sigma]).unwrap(), v).unwrap();
        for j in 0..5 {
            for k in 0..5 {
                assert_abs_diff_eq!(b.maps[0][(j, k)], oracle[j][k], epsilon = 1e-8);
            }
        }
        let resid = &b.maps[0] * &t - Matrix::identity(5, 5);
        assert!(resid.amax() <= INVERSE_RESIDUAL_TOL);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn symmetric(p: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(-2.0f64..2.0, p * p).prop_map(move |v| {
                let m = Matrix::from_vec(p, p, v);
                (&m + m.transpose()) * 0.5
            })
        }

        proptest! {
            #[test]
            fn threshold_preserves_symmetry(a in symmetric(6), v in 0.0f64..1.0) {
                let t = soft_threshold_matrix(&a, v).unwrap();
                prop_assert_eq!(&t, &t.transpose());
            }

            #[test]
            fn off_diagonal_magnitudes_shrink_as_v_grows(a in symmetric(5), v1 in 0.0f64..1.0, dv in 0.0f64..1.0) {
                let t1 = soft_threshold_matrix(&a, v1).unwrap();
                let t2 = soft_threshold_matrix(&a, v1 + dv).unwrap();
                for j in 0..5 {
                    for k in 0..5 {
                        if j != k {
                            prop_assert!(t2[(j, k)].abs() <= t1[(j, k)].abs());
                            prop_assert!(t1[(j, k)].abs() <= a[(j, k)].abs());
                        }
                    }
                }
                // repeated application with the same v is a pure function of (A, v)
                prop_assert_eq!(t1, soft_threshold_matrix(&a, v1).unwrap());
            }
        }
    }
}
