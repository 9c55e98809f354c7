use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture};
use bdsg_core::autodiff::Activation;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3e-3);
    let decay: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.98);
    let batch: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(64);
    let blocks: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(16);
    let sep: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(2.5);
    let lip: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(0.95);
    let hidden: usize = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(16);

    let mix = GaussianMixture::isotropic(&[vec![sep, 0.0], vec![-sep, 0.0]], 1.0).unwrap();
    let data = mix.sample(2048, 42);
    let ce: f64 = data.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / data.len() as f64;
    let mut flow = FlowModel::new(2, blocks, &[hidden, hidden], Activation::Softplus, lip, 7).unwrap();
    let t0 = std::time::Instant::now();
    let cfg = FlowTrainConfig { epochs, batch_size: batch, learning_rate: lr, lr_decay: decay, seed: 1 };
    let hist = flow.train(&data, &cfg).unwrap();
    println!("cfg: ep={epochs} lr={lr} decay={decay} batch={batch} blocks={blocks} sep={sep} lip={lip} hidden={hidden}");
    println!("{} epochs in {:.1?}; floor {ce:.4}; nll: {:.4} -> q1 {:.4} -> half {:.4} -> end {:.4}",
        epochs, t0.elapsed(), hist[0], hist[epochs/4], hist[epochs/2], hist[epochs-1]);
    let probes: [[f64; 2]; 4] = [[sep, 0.0], [-sep, 0.0], [0.0, 0.0], [sep, 3.0]];
    for x in probes {
        let lp = flow.log_density(&x).unwrap();
        println!("  log p at {x:?}: flow {lp:.4}  truth {:.4}", mix.log_density(&x).unwrap());
    }
}
