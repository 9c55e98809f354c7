//! Cross-module invariants: gradient oracles, flow consistency checks, and
//! substitutability of the two density backends.

use bdsg_core::anomaly::{classify, generate_strong_anomalies, ood_score};
use bdsg_core::autodiff::mlp::{Activation, MlpModel};
use bdsg_core::autodiff::spectral::{power_iteration, spectral_normalize};
use bdsg_core::autodiff::tape::{Tape, Var};
use bdsg_core::batch::Batch;
use bdsg_core::boundary::{
    bdsg_loss, draw_latent_batch, train_boundary, BdsgHyperparams, BoundaryModel,
};
use bdsg_core::checkpoint::{FlowCheckpoint, MlpCheckpoint};
use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture};
use bdsg_core::eval::{auprc, auroc, bp1, dispersion};
use bdsg_core::linalg::CompensatedSum;
use bdsg_core::rng::SplitMix64;

/// Analytic gradients vs central finite differences (h = 1e-5) within
/// relative 1e-4, over 100 random small networks and loss shapes.
#[test]
fn gradient_check_hundred_random_instances() {
    let mut rng = SplitMix64::seed_from_u64(12345);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let acts = [Activation::Tanh, Activation::Softplus, Activation::Elu];
        let act = acts[(trial % 3) as usize];
        let hidden = 2 + (trial % 4) as usize;
        let model = MlpModel::build(&[2, hidden, 2], act, 1000 + trial).unwrap();
        let x = [rng.next_normal() * 0.8, rng.next_normal() * 0.8];

        let mut tape = Tape::new();
        let params = model.register_leaves(&mut tape);
        let xv: Vec<Var> = x.iter().map(|&v| tape.constant(v)).collect();
        let out = model.forward_on_tape(&mut tape, &params, &xv);
        // loss mixes several primitive ops: exp, sqrt, abs, div, tanh
        let sq: Vec<Var> = out.iter().map(|&o| tape.mul(o, o)).collect();
        let ssq = tape.sum(&sq);
        let shifted = tape.add_const(ssq, 1.0);
        let root = tape.sqrt(shifted);
        let damped = tape.tanh(out[0]);
        let ratio = tape.div(damped, root);
        let amp = tape.exp(ratio);
        let a0 = tape.abs(out[1]);
        let loss = tape.add(amp, a0);
        let grads = tape.backward(loss).unwrap().collect(&params);

        let eval = |p: &[f64]| -> f64 {
            let mut m = model.clone();
            m.set_params_flat(p).unwrap();
            let o = m.forward(&x);
            let ssq: f64 = o.iter().map(|v| v * v).sum::<f64>() + 1.0;
            (o[0].tanh() / ssq.sqrt()).exp() + o[1].abs()
        };
        let flat = model.params_flat();
        let h = 1e-5;
        for i in 0..flat.len() {
            let mut pp = flat.clone();
            let mut pm = flat.clone();
            pp[i] += h;
            pm[i] -= h;
            let fd = (eval(&pp) - eval(&pm)) / (2.0 * h);
            let rel = (grads[i] - fd).abs() / fd.abs().max(1e-4);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

/// v . grad_x f(x) equals the forward-mode directional derivative.
#[test]
fn jvp_grad_consistency() {
    let mut rng = SplitMix64::seed_from_u64(777);
    for trial in 0..50u64 {
        let model = MlpModel::build(&[2, 6, 2], Activation::Tanh, 40 + trial).unwrap();
        let x = [rng.next_normal(), rng.next_normal()];
        let v = [rng.next_normal(), rng.next_normal()];
        // scalar f = sum of outputs; grad_x via tape with x as leaves
        let mut tape = Tape::new();
        let params: Vec<Var> = model.register_leaves(&mut tape);
        let xv: Vec<Var> = x.iter().map(|&val| tape.leaf(val)).collect();
        let out = model.forward_on_tape(&mut tape, &params, &xv);
        let f = tape.sum(&out);
        let grads = tape.backward(f).unwrap();
        let gx: Vec<f64> = xv.iter().map(|&xi| grads.wrt(xi)).collect();
        let dot: f64 = gx.iter().zip(&v).map(|(a, b)| a * b).sum();
        let jv = model.jvp(&x, &v).unwrap();
        let directional: f64 = jv.iter().sum();
        assert!(
            (dot - directional).abs() < 1e-8,
            "trial {trial}: {dot} vs {directional}"
        );
    }
}

#[test]
fn spectral_normalization_never_exceeds_target() {
    let mut rng = SplitMix64::seed_from_u64(31);
    for trial in 0..100 {
        let rows = 2 + trial % 5;
        let cols = 2 + (trial / 2) % 4;
        let scale = 0.2 + 3.0 * rng.next_f64();
        let w: Vec<f64> = (0..rows * cols).map(|_| rng.next_normal() * scale).collect();
        let (scaled, _) = spectral_normalize(&w, rows, cols, 0.9, 60, trial as u64);
        let mut u = vec![0.0; cols];
        u[0] = 1.0;
        let sigma = power_iteration(&scaled, rows, cols, 300, &mut u);
        assert!(sigma <= 0.9 + 1e-6, "trial {trial}: sigma {sigma}");
    }
}

/// Quadrature normalization of the flow density: midpoint rule over a box
/// that carries essentially all the mass.
#[test]
fn flow_density_normalizes_by_quadrature() {
    let flow = FlowModel::new(2, 4, &[8, 8], Activation::Softplus, 0.9, 99).unwrap();
    let n = 160;
    let (lo, hi) = (-8.0, 8.0);
    let step = (hi - lo) / n as f64;
    let mut sum = CompensatedSum::default();
    for i in 0..n {
        for j in 0..n {
            let x = [
                lo + (i as f64 + 0.5) * step,
                lo + (j as f64 + 0.5) * step,
            ];
            let p = match flow.log_density(&x) {
                Ok(ld) => ld.exp(),
                Err(_) => 0.0,
            };
            sum.add(p * step * step);
        }
    }
    let total = sum.value();
    assert!((total - 1.0).abs() < 0.02, "quadrature mass {total}");
}

/// Monte-Carlo change-of-variables consistency: -log p(G(z)) recomputed
/// through the inverse equals -log p_z(z) + log|det J_G(z)| pointwise.
#[test]
fn flow_change_of_variables_consistency() {
    let flow = FlowModel::new(2, 4, &[8, 8], Activation::Softplus, 0.9, 55).unwrap();
    let mut rng = SplitMix64::seed_from_u64(4242);
    let mut z = [0.0; 2];
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    for _ in 0..200 {
        rng.fill_normal(&mut z);
        let (x, log_det_fwd) = flow.forward(&z).unwrap();
        let via_inverse = flow.log_density(&x).unwrap();
        let base = -log_2pi - 0.5 * (z[0] * z[0] + z[1] * z[1]);
        let direct = base - log_det_fwd;
        assert!(
            (via_inverse - direct).abs() < 1e-6,
            "{via_inverse} vs {direct}"
        );
    }
}

/// Training the boundary never mutates the density model: checkpoint bytes
/// are identical before and after.
#[test]
fn density_model_frozen_through_boundary_training() {
    let flow = FlowModel::new(2, 2, &[6], Activation::Softplus, 0.9, 17).unwrap();
    let before = serde_json::to_string(&FlowCheckpoint::capture(&flow, 17)).unwrap();
    let data = GaussianMixture::standard_normal(2).sample(64, 3);
    let hp = BdsgHyperparams {
        sample_size: 64,
        batch_size: 8,
        epochs: 15,
        seed: 5,
        ..Default::default()
    };
    let _boundary = train_boundary(&flow, &data, &[2, 4, 2], &hp).unwrap();
    let after = serde_json::to_string(&FlowCheckpoint::capture(&flow, 17)).unwrap();
    assert_eq!(before, after);
}

/// The two density backends are interchangeable behind the contract: the
/// same downstream operations run and produce the same report structure.
#[test]
fn cfs_and_flow_backends_are_substitutable() {
    let mixture = GaussianMixture::standard_normal(2);
    let flow = FlowModel::new(2, 2, &[6], Activation::Softplus, 0.9, 23).unwrap();
    let backends: Vec<&dyn DensityModel> = vec![&mixture, &flow];
    let data = mixture.sample(64, 9);
    let net = MlpModel::build(&[2, 6, 2], Activation::Tanh, 11).unwrap();
    let boundary =
        BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap();
    let hp = BdsgHyperparams {
        sample_size: 64,
        batch_size: 8,
        seed: 3,
        ..Default::default()
    };
    let z = draw_latent_batch(2, 8, 77);
    for backend in backends {
        let verdict = classify(backend, &[0.2, -0.4], 0.01).unwrap();
        assert_eq!(verdict.point.len(), 2);
        let loss = bdsg_loss(backend, &boundary, &z, &data, &hp).unwrap();
        assert!(loss.total.is_finite());
        let score = ood_score(&boundary, backend, &data, &hp).unwrap();
        assert!(score.total.is_finite());
        let strong = generate_strong_anomalies(&boundary, backend, 32, 8, 0.5, 5).unwrap();
        assert_eq!(strong.generated, 32);
        let b = bp1(
            &boundary.sample(64, 13).unwrap(),
            backend,
            0.001,
            0.01,
        )
        .unwrap();
        assert!((0.0..=1.0).contains(&b));
    }
}

/// Everything here is seeded; run twice, compare bit patterns.
#[test]
fn end_to_end_determinism_of_training() {
    let run = || {
        let mixture = GaussianMixture::standard_normal(2);
        let data = mixture.sample(48, 21);
        let hp = BdsgHyperparams {
            sample_size: 48,
            batch_size: 8,
            epochs: 10,
            seed: 31,
            ..Default::default()
        };
        let b = train_boundary(&mixture, &data, &[2, 4, 2], &hp).unwrap();
        let h = b.history().last().unwrap().total;
        let s = b.sample(16, 3).unwrap();
        (h.to_bits(), s.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    let (h1, s1) = run();
    let (h2, s2) = run();
    assert_eq!(h1, h2);
    assert_eq!(s1, s2);
}

#[test]
fn flow_training_determinism() {
    let run = || {
        let mixture = GaussianMixture::standard_normal(2);
        let data = mixture.sample(64, 2);
        let mut flow = FlowModel::new(2, 2, &[6], Activation::Softplus, 0.9, 7).unwrap();
        let hist = flow
            .train(
                &data,
                &FlowTrainConfig {
                    epochs: 6,
                    batch_size: 16,
                    learning_rate: 2e-3,
                    lr_decay: 1.0,
                    seed: 5,
                },
            )
            .unwrap();
        let ck = serde_json::to_string(&FlowCheckpoint::capture(&flow, 7)).unwrap();
        (hist.last().unwrap().to_bits(), ck)
    };
    let (a1, c1) = run();
    let (a2, c2) = run();
    assert_eq!(a1, a2);
    assert_eq!(c1, c2);
}

/// Short maximum-likelihood run on standard-normal data: the flow's density
/// at the origin approaches the analytic value and the mean NLL approaches
/// the differential entropy of the generating Gaussian.
#[test]
fn flow_fits_standard_normal() {
    let mixture = GaussianMixture::standard_normal(2);
    let data = mixture.sample(512, 77);
    let mut flow = FlowModel::new(2, 4, &[8, 8], Activation::Softplus, 0.9, 5).unwrap();
    let cfg = FlowTrainConfig {
        epochs: 40,
        batch_size: 64,
        learning_rate: 3e-3,
        lr_decay: 0.99,
        seed: 11,
    };
    let hist = flow.train(&data, &cfg).unwrap();
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    let at_origin = flow.log_density(&[0.0, 0.0]).unwrap();
    assert!(
        (at_origin + log_2pi).abs() < 0.15,
        "log p(0) = {at_origin}, want ~{}",
        -log_2pi
    );
    // differential entropy of N(0, I_2) = ln(2 pi e)
    let entropy = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let final_nll = *hist.last().unwrap();
    assert!(
        (final_nll - entropy).abs() < 0.2,
        "final NLL {final_nll}, entropy {entropy}"
    );
    // round-trip after training
    let mut rng = SplitMix64::seed_from_u64(123);
    let mut z = [0.0; 2];
    for _ in 0..200 {
        rng.fill_normal(&mut z);
        let (x, _) = flow.forward(&z).unwrap();
        let back = flow.inverse(&x).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}

/// Strong-anomaly retention cross-checked against the band statistic on the
/// same samples: everything below the band's lower edge is retained when
/// epsilon sits at that edge.
#[test]
fn strong_anomaly_retention_consistent_with_band() {
    let mixture = GaussianMixture::standard_normal(2);
    let net = MlpModel::build(&[2, 8, 2], Activation::Tanh, 19).unwrap();
    let boundary =
        BoundaryModel::from_parts(net, BdsgHyperparams::default(), Vec::new()).unwrap();
    let peak = 1.0 / (2.0 * std::f64::consts::PI);
    let eps = 0.01 * peak;
    let q = 512;
    let strong = generate_strong_anomalies(&boundary, &mixture, q, 8, eps, 91).unwrap();
    let samples = boundary.sample(q, 91).unwrap();
    let manual = samples
        .rows()
        .filter(|r| mixture.log_density(r).unwrap().exp() < eps)
        .count();
    assert_eq!(strong.samples.len(), manual);
}

#[test]
fn loss_history_csv_schema_matches_breakdown() {
    let mixture = GaussianMixture::standard_normal(2);
    let data = mixture.sample(32, 3);
    let hp = BdsgHyperparams {
        sample_size: 32,
        batch_size: 4,
        epochs: 3,
        seed: 1,
        ..Default::default()
    };
    let b = train_boundary(&mixture, &data, &[2, 4, 2], &hp).unwrap();
    for h in b.history() {
        let recomputed = h.l0 + hp.lambda1 * h.l1 + hp.lambda2 * h.l2;
        assert!((h.total - recomputed).abs() < 1e-10);
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracles for the ranking metrics
// ---------------------------------------------------------------------------

fn auroc_brute_force(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn auprc_brute_force(scores: &[f64], labels: &[u8]) -> f64 {
    // walk distinct thresholds descending, accumulate precision x d(recall)
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|(s, l)| **s >= t && **l == 1)
            .count() as f64;
        let fp = scores
            .iter()
            .zip(labels)
            .filter(|(s, l)| **s >= t && **l == 0)
            .count() as f64;
        let recall = tp / pos;
        let precision = tp / (tp + fp);
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    ap
}

#[test]
fn ranking_metrics_match_brute_force_on_500_instances() {
    let mut rng = SplitMix64::seed_from_u64(2024);
    for trial in 0..500 {
        let n = 3 + (trial % 17);
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            // coarse scores force plenty of ties
            scores.push((rng.next_f64() * 8.0).floor() / 8.0);
            labels.push((rng.next_u64() % 2) as u8);
        }
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == n {
            continue;
        }
        let fast = auroc(&scores, &labels).unwrap();
        let slow = auroc_brute_force(&scores, &labels);
        assert!(
            (fast - slow).abs() < 1e-12,
            "trial {trial}: auroc {fast} vs {slow} ({scores:?}, {labels:?})"
        );
        let fast_ap = auprc(&scores, &labels).unwrap();
        let slow_ap = auprc_brute_force(&scores, &labels);
        assert!(
            (fast_ap - slow_ap).abs() < 1e-12,
            "trial {trial}: auprc {fast_ap} vs {slow_ap}"
        );
    }
}

#[test]
fn dispersion_and_bp_ranges() {
    let mixture = GaussianMixture::standard_normal(2);
    let b = Batch::from_rows(&[vec![3.2, 0.0], vec![0.0, 3.2], vec![-3.2, 0.0]]).unwrap();
    let d = dispersion(&b).unwrap();
    assert!(d > 0.0);
    let v = bp1(&b, &mixture, 0.001, 0.01).unwrap();
    assert!((0.0..=1.0).contains(&v));
}
