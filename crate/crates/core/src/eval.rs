//! Quantitative evaluation: grid-based binary classification against a
//! ground-truth density, boundary-precision scores, ranking metrics, and
//! the mode-collapse dispersion diagnostic.
//!
//! All thresholds are peak-relative fractions, so "epsilon = 1%" means the
//! same thing for any density scale; each model's peak is estimated over
//! the evaluation grid plus the model's own mode hints.

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::density::{peak_density, probability_or_zero, DensityModel};
use crate::error::{Error, Result};
use crate::linalg::{dist2, CompensatedSum};

/// Equidistant evaluation grid, endpoints inclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

pub const DEFAULT_GRID_CELL_CAP: usize = 1_000_000;

impl GridSpec {
    pub fn square(lo: f64, hi: f64, resolution: usize) -> GridSpec {
        GridSpec {
            lower: vec![lo, lo],
            upper: vec![hi, hi],
            resolution: vec![resolution, resolution],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.lower.len();
        if d == 0 || self.upper.len() != d || self.resolution.len() != d {
            return Err(Error::config("grid vectors must share one dimension"));
        }
        for i in 0..d {
            if self.upper[i] <= self.lower[i] {
                return Err(Error::config(format!(
                    "grid upper corner must exceed lower corner on axis {i}"
                )));
            }
            if self.resolution[i] < 2 {
                return Err(Error::config("grid resolution must be at least 2 per axis"));
            }
        }
        if self.point_count() > DEFAULT_GRID_CELL_CAP {
            return Err(Error::config(format!(
                "grid has {} points, cap is {DEFAULT_GRID_CELL_CAP}",
                self.point_count()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn point_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.resolution[axis] - 1) as f64
    }

    /// Grid point for a flat index (row-major over axes).
    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let d = self.dim();
        let mut coords = vec![0.0; d];
        for axis in (0..d).rev() {
            let r = self.resolution[axis];
            let idx = flat % r;
            flat /= r;
            coords[axis] = self.lower[axis] + idx as f64 * self.step(axis);
        }
        coords
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.point_count()).map(|i| self.point(i))
    }

    /// Flat index of the nearest grid point, or None when x falls outside
    /// the grid box (beyond half a step from the boundary points).
    pub fn snap(&self, x: &[f64]) -> Option<usize> {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut flat = 0usize;
        for axis in 0..d {
            let rel = (x[axis] - self.lower[axis]) / self.step(axis);
            let idx = rel.round();
            if idx < -0.5 || idx > (self.resolution[axis] - 1) as f64 + 0.5 {
                return None;
            }
            let idx = idx.clamp(0.0, (self.resolution[axis] - 1) as f64) as usize;
            flat = flat * self.resolution[axis] + idx;
        }
        Some(flat)
    }
}

/// Densities of a model at every grid point plus the peak-relative scale.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub peak: f64,
}

/// Evaluates the model at every grid point once; failed flow inversions
/// count as zero density. The peak includes the model's mode hints.
pub fn density_field(model: &dyn DensityModel, grid: &GridSpec) -> Result<DensityField> {
    grid.validate()?;
    if model.dim() != grid.dim() {
        return Err(Error::Shape {
            context: "density field grid",
            expected: model.dim(),
            got: grid.dim(),
        });
    }
    let mut values = Vec::with_capacity(grid.point_count());
    for p in grid.points() {
        values.push(probability_or_zero(model, &p)?);
    }
    let mut peak = values.iter().cloned().fold(0.0f64, f64::max);
    for hint in model.mode_hints() {
        peak = peak.max(probability_or_zero(model, &hint)?);
    }
    if peak <= 0.0 {
        return Err(Error::config("density is zero everywhere on the grid"));
    }
    Ok(DensityField { values, peak })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// Binary classification of "normal" (positive) grid points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Set when a zero-denominator metric was reported by convention.
    pub degenerate: bool,
    pub epsilon_frac: f64,
    pub truth_threshold: f64,
    pub model_threshold: f64,
}

fn safe_ratio(num: usize, den: usize, perfect_otherwise: bool, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        if perfect_otherwise {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

/// Grid metrics from precomputed density fields.
pub fn grid_metrics_from_fields(
    truth: &DensityField,
    model: &DensityField,
    epsilon_frac: f64,
) -> Result<GridMetrics> {
    if truth.values.len() != model.values.len() {
        return Err(Error::Shape {
            context: "grid metric fields",
            expected: truth.values.len(),
            got: model.values.len(),
        });
    }
    if truth.values.is_empty() {
        return Err(Error::config("empty grid"));
    }
    if epsilon_frac <= 0.0 || epsilon_frac >= 1.0 {
        return Err(Error::config("epsilon fraction must lie in (0, 1)"));
    }
    let t_thresh = epsilon_frac * truth.peak;
    let m_thresh = epsilon_frac * model.peak;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (t, m) in truth.values.iter().zip(&model.values) {
        let truth_normal = *t >= t_thresh;
        let model_normal = *m >= m_thresh;
        match (model_normal, truth_normal) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let counts = ConfusionCounts {
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
    };
    let mut degenerate = false;
    let precision = safe_ratio(tp, tp + fp, fn_ == 0, &mut degenerate);
    let recall = safe_ratio(tp, tp + fn_, fp == 0, &mut degenerate);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let accuracy = (tp + tn) as f64 / counts.total() as f64;
    Ok(GridMetrics {
        counts,
        precision,
        recall,
        f1,
        accuracy,
        degenerate,
        epsilon_frac,
        truth_threshold: t_thresh,
        model_threshold: m_thresh,
    })
}

/// Ground-truth label: truth density >= eps x truth peak; prediction: model
/// density >= eps x model peak. "Normal" is the positive class.
pub fn grid_metrics(
    truth: &dyn DensityModel,
    model: &dyn DensityModel,
    grid: &GridSpec,
    epsilon_frac: f64,
) -> Result<GridMetrics> {
    let tf = density_field(truth, grid)?;
    let mf = density_field(model, grid)?;
    grid_metrics_from_fields(&tf, &mf, epsilon_frac)
}

/// Fraction of samples whose truth density lies in the closed band
/// [gamma, epsilon] x truth peak. The peak is estimated from the model's
/// mode hints plus the samples themselves.
pub fn bp1(
    samples: &Batch,
    truth: &dyn DensityModel,
    gamma_frac: f64,
    epsilon_frac: f64,
) -> Result<f64> {
    check_band(gamma_frac, epsilon_frac)?;
    if samples.is_empty() {
        return Err(Error::config("boundary precision needs samples"));
    }
    let peak = peak_density(truth, samples.rows())?;
    let lo = gamma_frac * peak;
    let hi = epsilon_frac * peak;
    let mut hits = 0usize;
    for s in samples.rows() {
        let p = probability_or_zero(truth, s)?;
        if p >= lo && p <= hi {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

fn check_band(gamma_frac: f64, epsilon_frac: f64) -> Result<()> {
    if !(0.0 < gamma_frac && gamma_frac < epsilon_frac && epsilon_frac < 1.0) {
        return Err(Error::config(format!(
            "band fractions must satisfy 0 < gamma ({gamma_frac}) < epsilon ({epsilon_frac}) < 1"
        )));
    }
    Ok(())
}

/// BP2 from precomputed grid fields: the fraction of samples whose nearest
/// grid point carries BOTH the learned-flow density and the truth density
/// inside their respective [gamma, epsilon] peak-relative bands. Stricter
/// than BP1 by construction: the sample must sit where the two boundary
/// bands intersect on the grid.
pub fn bp2_from_fields(
    samples: &Batch,
    grid: &GridSpec,
    flow_field: &DensityField,
    truth_field: &DensityField,
    gamma_frac: f64,
    epsilon_frac: f64,
) -> Result<f64> {
    check_band(gamma_frac, epsilon_frac)?;
    if samples.is_empty() {
        return Err(Error::config("boundary precision needs samples"));
    }
    let f_lo = gamma_frac * flow_field.peak;
    let f_hi = epsilon_frac * flow_field.peak;
    let t_lo = gamma_frac * truth_field.peak;
    let t_hi = epsilon_frac * truth_field.peak;
    let mut hits = 0usize;
    for s in samples.rows() {
        if let Some(idx) = grid.snap(s) {
            let f = flow_field.values[idx];
            let t = truth_field.values[idx];
            if f >= f_lo && f <= f_hi && t >= t_lo && t <= t_hi {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Self-contained BP2 (evaluates both densities over the grid).
pub fn bp2(
    samples: &Batch,
    flow: &dyn DensityModel,
    truth: &dyn DensityModel,
    grid: &GridSpec,
    gamma_frac: f64,
    epsilon_frac: f64,
) -> Result<f64> {
    let ff = density_field(flow, grid)?;
    let tf = density_field(truth, grid)?;
    bp2_from_fields(samples, grid, &ff, &tf, gamma_frac, epsilon_frac)
}

/// Exact AUROC by the rank statistic, ties counted half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            context: "auroc labels",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs both classes present".into(),
        ));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::config("labels must be 0 or 1"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // average ranks within tie groups (1-based)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    let n = neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: step-interpolated sum of precision x recall increment
/// over descending score thresholds, tie groups processed as one threshold.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            context: "auprc labels",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one positive".into(),
        ));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::config("labels must be 0 or 1"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut recall_prev = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            seen += 1;
            if labels[idx] == 1 {
                tp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += precision * (recall - recall_prev);
        recall_prev = recall;
        i = j + 1;
    }
    Ok(ap)
}

/// Mean pairwise Euclidean distance; the mode-collapse diagnostic.
pub fn dispersion(samples: &Batch) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::config("dispersion needs at least 2 samples"));
    }
    let mut sum = CompensatedSum::default();
    for i in 0..n {
        for j in (i + 1)..n {
            sum.add(dist2(samples.row(i), samples.row(j)));
        }
    }
    Ok(sum.value() / (n as f64 * (n - 1) as f64 / 2.0))
}

/// Everything one experiment reports, serialized as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub epsilon_frac: f64,
    pub gamma_frac: f64,
    pub grid: Vec<GridMetrics>,
    pub bp1: f64,
    pub bp2: Option<f64>,
    pub auroc: f64,
    pub auprc: f64,
    pub dispersion: f64,
    /// Fraction of boundary samples assigned to each mode cluster.
    pub cluster_shares: Vec<f64>,
    /// Final training loss record of the boundary run.
    pub final_loss: Option<crate::boundary::LossBreakdown>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GaussianMixture;

    #[test]
    fn grid_point_layout() {
        let g = GridSpec::square(-1.0, 1.0, 3);
        g.validate().unwrap();
        assert_eq!(g.point_count(), 9);
        assert_eq!(g.point(0), vec![-1.0, -1.0]);
        assert_eq!(g.point(1), vec![-1.0, 0.0]);
        assert_eq!(g.point(8), vec![1.0, 1.0]);
        assert_eq!(g.snap(&[0.9, -0.1]), Some(6 + 1));
        assert_eq!(g.snap(&[5.0, 0.0]), None);
    }

    #[test]
    fn grid_validation_errors() {
        assert!(GridSpec::square(1.0, -1.0, 5).validate().is_err());
        assert!(GridSpec::square(-1.0, 1.0, 1).validate().is_err());
        let huge = GridSpec::square(-1.0, 1.0, 1500);
        assert!(huge.validate().is_err());
    }

    #[test]
    fn self_agreement_gives_perfect_metrics() {
        let m = GaussianMixture::standard_normal(2);
        let g = GridSpec::square(-6.0, 6.0, 41);
        let r = grid_metrics(&m, &m, &g, 0.01).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
        assert!(!r.degenerate);
        assert_eq!(r.counts.total(), g.point_count());
    }

    #[test]
    fn hand_computed_confusion_matrix() {
        // 1D-style check on a hand grid: truth standard normal, model a
        // much wider normal. With eps = 50% of peak the truth-normal region
        // is |x| < 1.177, the model-normal region is wider, so recall = 1
        // and precision < 1.
        let truth = GaussianMixture::standard_normal(2);
        let wide = GaussianMixture::isotropic(&[vec![0.0, 0.0]], 9.0).unwrap();
        let g = GridSpec::square(-5.0, 5.0, 21);
        let r = grid_metrics(&truth, &wide, &g, 0.5).unwrap();
        assert_eq!(r.recall, 1.0);
        assert!(r.precision < 1.0);
        // oracle by explicit loop
        let tf = density_field(&truth, &g).unwrap();
        let mf = density_field(&wide, &g).unwrap();
        let mut tp = 0;
        let mut fp = 0;
        for (t, m) in tf.values.iter().zip(&mf.values) {
            let tn = *t >= 0.5 * tf.peak;
            let mn = *m >= 0.5 * mf.peak;
            if mn && tn {
                tp += 1;
            }
            if mn && !tn {
                fp += 1;
            }
        }
        assert_eq!(r.counts.true_positive, tp);
        assert_eq!(r.counts.false_positive, fp);
    }

    #[test]
    fn metric_asymmetry_under_model_truth_swap() {
        let truth = GaussianMixture::standard_normal(2);
        let wide = GaussianMixture::isotropic(&[vec![0.0, 0.0]], 9.0).unwrap();
        let g = GridSpec::square(-5.0, 5.0, 21);
        let a = grid_metrics(&truth, &wide, &g, 0.5).unwrap();
        let b = grid_metrics(&wide, &truth, &g, 0.5).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_ne!(a.precision, b.precision);
        assert_ne!(a.recall, b.recall);
    }

    #[test]
    fn bp1_mode_samples_score_zero() {
        let truth = GaussianMixture::standard_normal(2);
        let samples = Batch::from_rows(&[vec![0.0, 0.0], vec![0.1, 0.0]]).unwrap();
        let v = bp1(&samples, &truth, 0.001, 0.01).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn bp1_band_edges_inclusive() {
        let truth = GaussianMixture::standard_normal(2);
        // radius where density = eps * peak: r = sqrt(-2 ln eps); nudge a hair
        // into the band so the closed-edge check is not ulp-sensitive
        let r_eps = (-2.0 * 0.01f64.ln()).sqrt() + 1e-9;
        let r_gamma = (-2.0 * 0.001f64.ln()).sqrt() - 1e-9;
        let samples = Batch::from_rows(&[
            vec![r_eps, 0.0],
            vec![0.0, r_gamma],
            vec![(r_eps + r_gamma) / 2.0, 0.0],
        ])
        .unwrap();
        let v = bp1(&samples, &truth, 0.001, 0.01).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bp2_equals_bp1_at_grid_granularity_when_flow_is_truth() {
        let truth = GaussianMixture::standard_normal(2);
        let g = GridSpec::square(-5.0, 5.0, 201);
        let mut samples = Batch::empty(2);
        // ring of radius between the band radii
        let r = 3.2;
        for k in 0..64 {
            let a = k as f64 / 64.0 * std::f64::consts::TAU;
            samples.push_row(&[r * a.cos(), r * a.sin()]);
        }
        let b1_grid = {
            // bp1 evaluated at snapped grid points for comparison
            let tf = density_field(&truth, &g).unwrap();
            let lo = 0.001 * tf.peak;
            let hi = 0.01 * tf.peak;
            let mut hits = 0;
            for s in samples.rows() {
                let idx = g.snap(s).unwrap();
                let p = tf.values[idx];
                if p >= lo && p <= hi {
                    hits += 1;
                }
            }
            hits as f64 / samples.len() as f64
        };
        let b2 = bp2(&samples, &truth, &truth, &g, 0.001, 0.01).unwrap();
        assert!((b2 - b1_grid).abs() < 1e-12);
    }

    #[test]
    fn bp2_uniformish_flow_scores_zero() {
        let truth = GaussianMixture::standard_normal(2);
        // extremely wide "flow": almost flat over the grid, its band region
        // (0.1%..1% of its own peak) lies far outside the grid
        let flat = GaussianMixture::isotropic(&[vec![0.0, 0.0]], 10_000.0).unwrap();
        let g = GridSpec::square(-5.0, 5.0, 101);
        let r = 3.2;
        let mut samples = Batch::empty(2);
        for k in 0..32 {
            let a = k as f64 / 32.0 * std::f64::consts::TAU;
            samples.push_row(&[r * a.cos(), r * a.sin()]);
        }
        let b2 = bp2(&samples, &flat, &truth, &g, 0.001, 0.01).unwrap();
        assert_eq!(b2, 0.0);
    }

    #[test]
    fn auroc_perfect_and_flipped() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [1u8, 1, 0, 0];
        assert_eq!(auroc(&scores, &labels).unwrap(), 1.0);
        let flipped = [0u8, 0, 1, 1];
        assert_eq!(auroc(&scores, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn auroc_pairwise_hand_count() {
        // pairs: (0.5 vs 0.9) wrong, (0.5 vs 0.1) correct -> 0.5
        let scores = [0.5, 0.9, 0.1];
        let labels = [1u8, 0, 0];
        assert_eq!(auroc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auroc_symmetry_under_label_flip() {
        let scores = [0.3, 0.7, 0.1, 0.9, 0.5, 0.5];
        let labels = [0u8, 1, 0, 1, 1, 0];
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let a = auroc(&scores, &labels).unwrap();
        let b = auroc(&scores, &flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_rejects_single_class() {
        assert!(matches!(
            auroc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn auprc_hand_value() {
        let scores = [0.9, 0.8, 0.7];
        let labels = [1u8, 0, 1];
        let ap = auprc(&scores, &labels).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn auprc_all_tied_scores() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [1u8, 0, 0, 1];
        let ap = auprc(&scores, &labels).unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auprc_perfect() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [1u8, 1, 0, 0];
        assert_eq!(auprc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn dispersion_examples() {
        let same = Batch::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(dispersion(&same).unwrap(), 0.0);
        let two = Batch::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(dispersion(&two).unwrap(), 2.0);
        let corners = Batch::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let expected = (4.0 + 2.0 * 2f64.sqrt()) / 6.0;
        assert!((dispersion(&corners).unwrap() - expected).abs() < 1e-12);
        let single = Batch::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(dispersion(&single).is_err());
    }
}
