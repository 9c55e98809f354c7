//! Inference-time services over frozen models: threshold classification,
//! strong-anomaly generation, boundary clustering, and loss-based
//! out-of-distribution scoring.

use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::boundary::{
    loss_l0, loss_l1, loss_l2, BdsgHyperparams, BoundaryModel, LossBreakdown,
};
use crate::density::{probability_or_zero, DensityModel};
use crate::error::{Error, Result};
use crate::linalg::dist2;
use crate::rng::derive_seed;

/// One classified point. `is_anomalous` holds exactly when
/// exp(log_density) < threshold_epsilon; a failed flow inversion maps to
/// log-density -inf (zero probability) with the diagnostic flag set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub point: Vec<f64>,
    /// Serialized as null when the inversion failed (-inf is not JSON).
    pub log_density: f64,
    pub threshold_epsilon: f64,
    pub is_anomalous: bool,
    pub inversion_failed: bool,
}

/// Threshold rule: anomalous when the model probability falls below epsilon.
pub fn classify(density: &dyn DensityModel, x: &[f64], epsilon: f64) -> Result<AnomalyVerdict> {
    if epsilon <= 0.0 {
        return Err(Error::config("threshold epsilon must be positive"));
    }
    match density.log_density(x) {
        Ok(log_density) => Ok(AnomalyVerdict {
            point: x.to_vec(),
            log_density,
            threshold_epsilon: epsilon,
            is_anomalous: log_density.exp() < epsilon,
            inversion_failed: false,
        }),
        // A point the flow cannot invert is outside the reachable support:
        // maximal evidence of abnormality, flagged rather than failed.
        Err(Error::Inversion { .. }) => Ok(AnomalyVerdict {
            point: x.to_vec(),
            log_density: f64::NEG_INFINITY,
            threshold_epsilon: epsilon,
            is_anomalous: true,
            inversion_failed: true,
        }),
        Err(e) => Err(e),
    }
}

/// One verdict per line, JSON-encoded.
pub fn verdicts_to_jsonl(verdicts: &[AnomalyVerdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v).expect("verdict serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Boundary samples kept as strong anomalies, with generation bookkeeping.
#[derive(Debug, Clone)]
pub struct StrongAnomalies {
    /// Number of boundary samples drawn (Q).
    pub generated: usize,
    /// The subset with model probability strictly below epsilon.
    pub samples: Batch,
}

/// Draws Q boundary samples and keeps those with p(B(z)) < epsilon.
pub fn generate_strong_anomalies(
    boundary: &BoundaryModel,
    density: &dyn DensityModel,
    q: usize,
    n_ref: usize,
    epsilon: f64,
    seed: u64,
) -> Result<StrongAnomalies> {
    if n_ref < 1 || q < n_ref {
        return Err(Error::config(format!(
            "strong-anomaly generation needs Q ({q}) >= N ({n_ref}) >= 1"
        )));
    }
    if epsilon < 0.0 {
        return Err(Error::config("epsilon must be non-negative"));
    }
    let candidates = boundary.sample(q, seed)?;
    let mut kept = Batch::empty(candidates.dim());
    for row in candidates.rows() {
        if probability_or_zero(density, row)? < epsilon {
            kept.push_row(row);
        }
    }
    Ok(StrongAnomalies {
        generated: q,
        samples: kept,
    })
}

/// K reference clusters, one per mode of the normal data.
#[derive(Debug, Clone)]
pub struct ModeSet {
    clusters: Vec<Batch>,
}

impl ModeSet {
    pub fn new(clusters: Vec<Batch>) -> Result<ModeSet> {
        if clusters.is_empty() {
            return Err(Error::config("mode set needs at least one cluster"));
        }
        if clusters.iter().any(|c| c.is_empty()) {
            return Err(Error::config("every mode cluster must be non-empty"));
        }
        let dim = clusters[0].dim();
        if clusters.iter().any(|c| c.dim() != dim) {
            return Err(Error::config("mode clusters must share one dimension"));
        }
        Ok(ModeSet { clusters })
    }

    /// Builds clusters by assigning every data row to its nearest center.
    /// Centers that capture no points (duplicates, concentric components)
    /// are dropped rather than reported as empty modes.
    pub fn partition_by_nearest(data: &Batch, centers: &[Vec<f64>]) -> Result<ModeSet> {
        if centers.is_empty() {
            return Err(Error::config("mode partition needs at least one center"));
        }
        let mut clusters: Vec<Batch> = centers.iter().map(|_| Batch::empty(data.dim())).collect();
        for row in data.rows() {
            let mut best = (0usize, f64::INFINITY);
            for (k, c) in centers.iter().enumerate() {
                let d = dist2(row, c);
                if d < best.1 {
                    best = (k, d);
                }
            }
            clusters[best.0].push_row(row);
        }
        ModeSet::new(clusters.into_iter().filter(|c| !c.is_empty()).collect())
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Batch] {
        &self.clusters
    }
}

/// Nearest cluster by min-over-references distance; ties break to the
/// lowest cluster index.
pub fn assign_boundary_cluster(point: &[f64], modes: &ModeSet) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (k, cluster) in modes.clusters.iter().enumerate() {
        for r in cluster.rows() {
            let d = dist2(point, r);
            if d < best.1 {
                best = (k, d);
            }
        }
    }
    best
}

/// Evaluates the compound loss with the candidate set substituted for the
/// normal data in the distance term. Low total loss and low L1 mean the
/// candidate set is compatible with the training distribution; both jump
/// by orders of magnitude on shifted or out-of-distribution data.
pub fn ood_score(
    boundary: &BoundaryModel,
    density: &dyn DensityModel,
    data: &Batch,
    hp: &BdsgHyperparams,
) -> Result<LossBreakdown> {
    if data.is_empty() {
        return Err(Error::config("ood scoring needs a non-empty candidate set"));
    }
    if hp.batch_size < 2 {
        return Err(Error::config("ood scoring needs a latent batch of >= 2"));
    }
    let z = crate::boundary::draw_latent_batch(
        boundary.latent_dim(),
        hp.batch_size,
        derive_seed(hp.seed, "ood-z"),
    );
    let l0 = loss_l0(density, boundary, &z)?;
    let l1 = loss_l1(boundary, &z, data)?;
    let l2 = loss_l2(boundary, &z, hp.eps_div)?;
    Ok(LossBreakdown {
        epoch: 0,
        total: l0 + hp.lambda1 * l1 + hp.lambda2 * l2,
        l0,
        l1,
        l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::mlp::{Activation, MlpModel};
    use crate::density::GaussianMixture;

    fn constant_boundary(target: &[f64]) -> BoundaryModel {
        let net = MlpModel::from_parts(
            vec![2, 2],
            Activation::Tanh,
            vec![vec![0.0; 4]],
            vec![target.to_vec()],
        )
        .unwrap();
        BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap()
    }

    #[test]
    fn classify_normal_at_mode() {
        let m = GaussianMixture::standard_normal(2);
        let v = classify(&m, &[0.0, 0.0], 0.01).unwrap();
        assert!(!v.is_anomalous);
        assert!(!v.inversion_failed);
        assert!((v.log_density.exp() - 0.159155).abs() < 1e-5);
    }

    #[test]
    fn classify_anomalous_in_tail() {
        let m = GaussianMixture::standard_normal(2);
        let v = classify(&m, &[6.0, 0.0], 0.01).unwrap();
        assert!(v.is_anomalous);
        // p = exp(-18)/2pi
        let p = (-18.0f64).exp() / (2.0 * std::f64::consts::PI);
        assert!((v.log_density.exp() - p).abs() / p < 1e-10);
    }

    #[test]
    fn classify_epsilon_above_peak_flags_everything() {
        let m = GaussianMixture::standard_normal(2);
        let peak = 1.0 / (2.0 * std::f64::consts::PI);
        for x in [[0.0, 0.0], [1.0, 1.0], [-2.0, 0.5]] {
            assert!(classify(&m, &x, peak * 1.01).unwrap().is_anomalous);
        }
    }

    #[test]
    fn classify_threshold_monotonicity() {
        let m = GaussianMixture::standard_normal(2);
        let x = [2.0, 1.0];
        let mut was_anomalous = false;
        for eps in [1e-6, 1e-4, 1e-2, 0.1, 0.2] {
            let v = classify(&m, &x, eps).unwrap();
            // once anomalous at some eps, anomalous at every larger eps
            assert!(!was_anomalous || v.is_anomalous);
            was_anomalous = v.is_anomalous;
        }
        assert!(was_anomalous);
    }

    #[test]
    fn classify_rejects_bad_epsilon() {
        let m = GaussianMixture::standard_normal(2);
        assert!(classify(&m, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn strong_anomalies_from_far_tail_boundary() {
        let m = GaussianMixture::standard_normal(2);
        let b = constant_boundary(&[30.0, 0.0]);
        let out = generate_strong_anomalies(&b, &m, 64, 8, 1e-30, 5).unwrap();
        assert_eq!(out.generated, 64);
        assert_eq!(out.samples.len(), 64);
    }

    #[test]
    fn strong_anomalies_epsilon_zero_is_empty() {
        let m = GaussianMixture::standard_normal(2);
        let b = constant_boundary(&[30.0, 0.0]);
        let out = generate_strong_anomalies(&b, &m, 32, 8, 0.0, 5).unwrap();
        assert!(out.samples.is_empty());
    }

    #[test]
    fn strong_anomalies_subset_property() {
        let m = GaussianMixture::standard_normal(2);
        let net = MlpModel::build(&[2, 8, 2], Activation::Tanh, 3).unwrap();
        let b = BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap();
        let eps = 0.05;
        let out = generate_strong_anomalies(&b, &m, 128, 8, eps, 9).unwrap();
        let full = b.sample(128, 9).unwrap();
        // every retained point is a generated point and re-passes the test
        for row in out.samples.rows() {
            assert!(full.rows().any(|r| r == row));
            assert!(m.log_density(row).unwrap().exp() < eps);
        }
        assert!(out.samples.len() <= full.len());
    }

    #[test]
    fn strong_anomalies_preconditions() {
        let m = GaussianMixture::standard_normal(2);
        let b = constant_boundary(&[0.0, 0.0]);
        assert!(generate_strong_anomalies(&b, &m, 4, 8, 0.1, 1).is_err());
        assert!(generate_strong_anomalies(&b, &m, 4, 0, 0.1, 1).is_err());
    }

    #[test]
    fn cluster_assignment_exact_reference_point() {
        let c0 = Batch::from_rows(&[vec![-5.0, 0.0], vec![-4.5, 0.2]]).unwrap();
        let c1 = Batch::from_rows(&[vec![5.0, 0.0], vec![4.8, -0.1]]).unwrap();
        let modes = ModeSet::new(vec![c0, c1]).unwrap();
        let (k, d) = assign_boundary_cluster(&[5.0, 0.0], &modes);
        assert_eq!(k, 1);
        assert_eq!(d, 0.0);
        let (k2, _) = assign_boundary_cluster(&[4.9, 0.1], &modes);
        assert_eq!(k2, 1);
    }

    #[test]
    fn cluster_assignment_single_cluster() {
        let c0 = Batch::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let modes = ModeSet::new(vec![c0]).unwrap();
        let (k, d) = assign_boundary_cluster(&[100.0, 0.0], &modes);
        assert_eq!(k, 0);
        assert!((d - 100.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_assignment_matches_brute_force() {
        let mut rng = crate::rng::SplitMix64::seed_from_u64(11);
        let mut clusters = Vec::new();
        for _ in 0..3 {
            let mut b = Batch::empty(2);
            for _ in 0..20 {
                b.push_row(&[rng.next_normal() * 3.0, rng.next_normal() * 3.0]);
            }
            clusters.push(b);
        }
        let modes = ModeSet::new(clusters.clone()).unwrap();
        for _ in 0..100 {
            let p = [rng.next_normal() * 4.0, rng.next_normal() * 4.0];
            let (k, d) = assign_boundary_cluster(&p, &modes);
            // oracle: exhaustive double loop
            let mut best = (0usize, f64::INFINITY);
            for (i, c) in clusters.iter().enumerate() {
                for r in c.rows() {
                    let dd = dist2(&p, r);
                    if dd < best.1 {
                        best = (i, dd);
                    }
                }
            }
            assert_eq!(k, best.0);
            assert_eq!(d, best.1);
        }
    }

    #[test]
    fn mode_partition_by_nearest_center() {
        let data = Batch::from_rows(&[
            vec![4.0, 0.1],
            vec![-4.2, 0.0],
            vec![3.9, -0.3],
            vec![-4.0, 0.4],
        ])
        .unwrap();
        let modes =
            ModeSet::partition_by_nearest(&data, &[vec![-4.0, 0.0], vec![4.0, 0.0]]).unwrap();
        assert_eq!(modes.clusters()[0].len(), 2);
        assert_eq!(modes.clusters()[1].len(), 2);
    }

    #[test]
    fn ood_score_shifted_data_scores_much_higher() {
        let m = GaussianMixture::standard_normal(2);
        let data = m.sample(256, 3);
        let net = MlpModel::build(&[2, 8, 2], Activation::Tanh, 7).unwrap();
        let b = BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap();
        let hp = BdsgHyperparams {
            batch_size: 64,
            sample_size: 256,
            seed: 13,
            ..Default::default()
        };
        let in_dist = ood_score(&b, &m, &data, &hp).unwrap();
        let shifted = data.translated(&[50.0, 50.0]);
        let out_dist = ood_score(&b, &m, &shifted, &hp).unwrap();
        assert!(out_dist.l1 > 10.0 * in_dist.l1);
        assert!(out_dist.total > 10.0 * in_dist.total);
        // deterministic in the seed
        let again = ood_score(&b, &m, &data, &hp).unwrap();
        assert_eq!(again.total.to_bits(), in_dist.total.to_bits());
    }

    #[test]
    fn ood_score_guards_empty_inputs() {
        let m = GaussianMixture::standard_normal(2);
        let b = constant_boundary(&[0.0, 0.0]);
        let hp = BdsgHyperparams {
            batch_size: 1,
            ..Default::default()
        };
        let data = m.sample(8, 1);
        assert!(ood_score(&b, &m, &data, &hp).is_err());
        let empty = Batch::empty(2);
        let hp_ok = BdsgHyperparams::default();
        assert!(ood_score(&b, &m, &empty, &hp_ok).is_err());
    }

    #[test]
    fn jsonl_serialization_one_line_per_verdict() {
        let m = GaussianMixture::standard_normal(2);
        let verdicts = vec![
            classify(&m, &[0.0, 0.0], 0.01).unwrap(),
            classify(&m, &[9.0, 0.0], 0.01).unwrap(),
        ];
        let jsonl = verdicts_to_jsonl(&verdicts);
        let lines: Vec<&str> = jsonl.trim_end().split('\n').collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("point").is_some());
            assert!(v.get("log_density").is_some());
            assert!(v.get("threshold_epsilon").is_some());
            assert!(v.get("is_anomalous").is_some());
            assert!(v.get("inversion_failed").is_some());
        }
    }
}
