//! Edge-recovery scoring: confusion counts over off-diagonal pairs, F1,
//! FPR/TPR curves traced by a λ sweep, and trapezoidal AUC.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::entry_lp::estimate;
use crate::error::{JeekError, Result};
use crate::estimator::{backward_map, default_v_grid, sample_covariance, select_v, TaskDataset};
use crate::kw_norm::{KnowledgeWeights, PrecisionDecomposition};
use crate::simgen::GroundTruth;
use crate::Matrix;

/// Default magnitude above which an estimated entry counts as an edge.
pub const DEFAULT_EDGE_TOL: f64 = 1e-8;

pub const AUC_METHOD: &str = "trapezoid over FPR-sorted points with (0,0) and (1,1) anchors; duplicate FPRs averaged";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Compares off-diagonal supports of estimated and true `Ω⁽ⁱ⁾`, summed over tasks.
pub fn confusion(est: &PrecisionDecomposition, truth: &GroundTruth, tol: f64) -> Result<ConfusionCounts> {
    if est.k() != truth.k() || est.p() != truth.p() {
        return Err(JeekError::Shape(format!(
            "estimate has K={}, p={}; truth has K={}, p={}",
            est.k(),
            est.p(),
            truth.k(),
            truth.p()
        )));
    }
    let truths = truth.decomp.totals();
    let mut counts = ConfusionCounts::default();
    for (i, t) in truths.iter().enumerate() {
        let e = est.total(i);
        tally(&e, t, tol, &mut counts);
    }
    Ok(counts)
}

fn tally(est: &Matrix, truth: &Matrix, tol: f64, counts: &mut ConfusionCounts) {
    let p = est.nrows();
    for j in 0..p {
        for k in j + 1..p {
            match (est[(j, k)].abs() > tol, truth[(j, k)].abs() > tol) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, false) => counts.tn += 1,
                (false, true) => counts.fn_ += 1,
            }
        }
    }
}

/// Harmonic mean of precision and recall; 0 when there are no true positives.
pub fn f1(counts: &ConfusionCounts) -> f64 {
    if counts.tp == 0 {
        return 0.0;
    }
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    2.0 * precision * recall / (precision + recall)
}

/// Area under the FPR–TPR curve. See [`AUC_METHOD`].
pub fn roc_auc(points: &[(f64, f64)]) -> Result<f64> {
    for &(x, y) in points {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(JeekError::InvalidInput(format!("ROC point ({}, {}) outside [0,1]^2", x, y)));
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut curve: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut idx = 0;
    while idx < sorted.len() {
        let x = sorted[idx].0;
        let group: Vec<f64> = sorted[idx..].iter().take_while(|q| q.0 == x).map(|q| q.1).collect();
        idx += group.len();
        curve.push((x, group.iter().sum::<f64>() / group.len() as f64));
    }
    curve.push((1.0, 1.0));
    Ok(curve.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5).sum())
}

/// `sqrt(Σ_i ‖Ω̂⁽ⁱ⁾ − Ω⁽ⁱ⁾‖²_F)` over the stacked totals.
pub fn frobenius_error(est: &PrecisionDecomposition, truth: &GroundTruth) -> Result<f64> {
    if est.k() != truth.k() || est.p() != truth.p() {
        return Err(JeekError::Shape("estimate and truth disagree on K or p".into()));
    }
    Ok((0..est.k())
        .map(|i| (est.total(i) - truth.omega(i)).norm_squared())
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub f1: f64,
    pub seconds: f64,
    pub counts: ConfusionCounts,
    pub frobenius_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSeconds {
    pub per_lambda: Vec<f64>,
    /// Sum of the per-λ estimation times.
    pub total: f64,
    /// Covariance, threshold selection and inversion, done once per sweep.
    pub backward_map: f64,
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Best F1 over the sweep.
    pub f1: f64,
    pub best_lambda: f64,
    pub auc: f64,
    pub auc_method: String,
    pub roc: Vec<(f64, f64)>,
    pub runtime_seconds: RuntimeSeconds,
    pub v_used: f64,
    pub rows: Vec<SweepRow>,
}

impl MetricsReport {
    /// Plot-ready CSV: `lambda,fpr,tpr,f1,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,fpr,tpr,f1,seconds\n");
        for r in &self.rows {
            out.push_str(&format!("{:?},{:?},{:?},{:?},{:?}\n", r.lambda, r.fpr, r.tpr, r.f1, r.seconds));
        }
        out
    }

    pub fn best_frobenius_error(&self) -> f64 {
        self.rows.iter().map(|r| r.frobenius_error).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub v_grid: Vec<f64>,
    pub edge_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { v_grid: default_v_grid(), edge_tol: DEFAULT_EDGE_TOL }
    }
}

pub fn sweep(data: &TaskDataset, truth: &GroundTruth, w: &KnowledgeWeights, lambdas: &[f64]) -> Result<MetricsReport> {
    sweep_with(data, truth, w, lambdas, &SweepConfig::default())
}

/// One backward map, then one estimate per λ, scored against `truth`.
pub fn sweep_with(
    data: &TaskDataset,
    truth: &GroundTruth,
    w: &KnowledgeWeights,
    lambdas: &[f64],
    config: &SweepConfig,
) -> Result<MetricsReport> {
    if lambdas.is_empty() {
        return Err(JeekError::InvalidInput("empty lambda list".into()));
    }
    if data.k() != truth.k() || data.p() != truth.p() {
        return Err(JeekError::Shape(format!(
            "data has K={}, p={}; truth has K={}, p={}",
            data.k(),
            data.p(),
            truth.k(),
            truth.p()
        )));
    }
    let wall = Instant::now();
    let cov = sample_covariance(data)?;
    let v = select_v(&cov, &config.v_grid)?;
    let bmap = backward_map(&cov, v)?;
    let bmap_seconds = wall.elapsed().as_secs_f64();

    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let start = Instant::now();
        let est = estimate(&bmap, w, lambda)?;
        let seconds = start.elapsed().as_secs_f64();
        let counts = confusion(&est, truth, config.edge_tol)?;
        rows.push(SweepRow {
            lambda,
            fpr: counts.fpr(),
            tpr: counts.tpr(),
            f1: f1(&counts),
            seconds,
            counts,
            frobenius_error: frobenius_error(&est, truth)?,
        });
    }

    let roc: Vec<(f64, f64)> = rows.iter().map(|r| (r.fpr, r.tpr)).collect();
    let best = rows
        .iter()
        .max_by(|a, b| a.f1.total_cmp(&b.f1))
        .expect("nonempty");
    let per_lambda: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    Ok(MetricsReport {
        f1: best.f1,
        best_lambda: best.lambda,
        auc: roc_auc(&roc)?,
        auc_method: AUC_METHOD.to_string(),
        roc,
        runtime_seconds: RuntimeSeconds {
            total: per_lambda.iter().sum(),
            per_lambda,
            backward_map: bmap_seconds,
            wall_clock: wall.elapsed().as_secs_f64(),
        },
        v_used: v,
        rows,
    })
}
