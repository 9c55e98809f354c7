use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let epochs: usize = a.get(1).map(|s| s.parse().unwrap()).unwrap_or(260);
    let m: usize = a.get(2).map(|s| s.parse().unwrap()).unwrap_or(4096);
    let decay: f64 = a.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.996);
    let mix = GaussianMixture::isotropic(&[vec![2.5, 0.0], vec![-2.5, 0.0]], 1.0).unwrap();
    let data = mix.sample(m, derive_seed(1001, "flow-data"));
    let mut flow = FlowModel::new(2, 32, &[8, 8], Activation::Softplus, 0.95, derive_seed(1001, "flow-init")).unwrap();
    let hist = flow.train(&data, &FlowTrainConfig { epochs, batch_size: 64, learning_rate: 3e-3, lr_decay: decay, seed: 1001 }).unwrap();
    let ce: f64 = data.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / data.len() as f64;
    println!("nll {:.4} floor {ce:.4}", hist.last().unwrap());
    let tp = mix.log_density(&[2.5, 0.0]).unwrap().exp();
    let mut fp: f64 = 0.0;
    let mut fp_at = 0.0;
    for i in 0..100 {
        let x = [1.5 + i as f64 * 0.02, 0.0];
        if let Ok(ld) = flow.log_density(&x) {
            if ld.exp() > fp { fp = ld.exp(); fp_at = x[0]; }
        }
    }
    println!("truth peak {tp:.5}; flow peak {fp:.5} at x={fp_at:.2} (ratio {:.3})", fp / tp);
    println!("  along +x from mode:   r_rel  truth_frac  flow_frac");
    for rr in [2.0, 2.5, 3.0, 3.2, 3.4, 3.6] {
        let x = [2.5 + rr, 0.0];
        let t = mix.log_density(&x).unwrap().exp() / tp;
        let f = flow.log_density(&x).map(|l| l.exp()).unwrap_or(0.0) / fp;
        println!("   {rr:.1}: {t:.5}  {f:.5}");
    }
    println!("  along +y from mode:");
    for rr in [2.0, 2.5, 3.0, 3.2, 3.4, 3.6] {
        let x = [2.5, rr];
        let t = mix.log_density(&x).unwrap().exp() / tp;
        let f = flow.log_density(&x).map(|l| l.exp()).unwrap_or(0.0) / fp;
        println!("   {rr:.1}: {t:.5}  {f:.5}");
    }
}
