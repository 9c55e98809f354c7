use bdsg_core::boundary::{train_boundary, BdsgHyperparams};
use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture, MixtureComponent};
use bdsg_core::eval::{bp1, bp2_from_fields, density_field, GridSpec};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let core_var: f64 = a[1].parse().unwrap();
    let halo_w: f64 = a[2].parse().unwrap();
    let halo_var: f64 = a[3].parse().unwrap();
    let m_flow: usize = a[4].parse().unwrap();
    let flow_epochs: usize = a[5].parse().unwrap();
    let b_epochs: usize = a[6].parse().unwrap();
    let mix = GaussianMixture::new(vec![
        MixtureComponent { weight: 1.0 - halo_w, mean: vec![0.0, 0.0], covariance: vec![vec![core_var, 0.0], vec![0.0, core_var]] },
        MixtureComponent { weight: halo_w, mean: vec![0.0, 0.0], covariance: vec![vec![halo_var, 0.0], vec![0.0, halo_var]] },
    ]).unwrap();
    let peak = mix.log_density(&[0.0, 0.0]).unwrap().exp();
    println!("mixture: core var {core_var} w {:.2}, halo var {halo_var} w {halo_w}; peak {peak:.3}", 1.0-halo_w);

    // shared flow fixture
    let fdata = mix.sample(m_flow, derive_seed(1000, "flow-data"));
    let mut flow = FlowModel::new(2, 32, &[8, 8], Activation::Softplus, 0.95, derive_seed(1000, "flow-init")).unwrap();
    let t0 = std::time::Instant::now();
    let hist = flow.train(&fdata, &FlowTrainConfig { epochs: flow_epochs, batch_size: 64, learning_rate: 3e-3, lr_decay: 0.996, seed: 1000 }).unwrap();
    let ce: f64 = fdata.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / fdata.len() as f64;
    println!("flow: {} ep M={m_flow} in {:.0?}, nll {:.4} floor {ce:.4}", flow_epochs, t0.elapsed(), hist.last().unwrap());

    let grid = GridSpec::square(-3.5, 3.5, 141);
    let tf = density_field(&mix, &grid).unwrap();
    let ff = density_field(&flow, &grid).unwrap();
    let (mut s1, mut s2) = (0.0, 0.0);
    for seed in [42u64, 43, 44] {
        let data = mix.sample(1024, derive_seed(seed, "gen-data"));
        let hp = BdsgHyperparams {
            lambda1: 0.3, lambda2: 0.025, sample_size: 1024, batch_size: 256,
            epochs: b_epochs, seed: derive_seed(seed, "train-boundary"),
            eps_div: 1e-8, learning_rate: 3e-3, lr_decay: 0.99975,
        };
        let t1 = std::time::Instant::now();
        let b = train_boundary(&mix, &data, &[2, 8, 8, 2], &hp).unwrap();
        let samples = b.sample(1024, derive_seed(seed, "eval-boundary-samples")).unwrap();
        let b1 = bp1(&samples, &mix, 0.001, 0.01).unwrap();
        let b2 = bp2_from_fields(&samples, &grid, &ff, &tf, 0.001, 0.01).unwrap();
        let fl = b.history().last().unwrap();
        println!("  seed {seed}: bp1={b1:.3} bp2={b2:.3} l0={:.5} ({:.0?})", fl.l0, t1.elapsed());
        s1 += b1; s2 += b2;
    }
    println!("MEAN: bp1={:.3} bp2={:.3}", s1 / 3.0, s2 / 3.0);
}
