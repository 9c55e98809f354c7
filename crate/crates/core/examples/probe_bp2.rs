use bdsg_core::checkpoint::BoundaryCheckpoint;
use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture, MixtureComponent};
use bdsg_core::eval::{bp1, bp2_from_fields, density_field, GridSpec};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ck_path = &args[1];
    let seed: u64 = args[2].parse().unwrap();
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(80);
    let mix = GaussianMixture::new(vec![
        MixtureComponent { weight: 0.85, mean: vec![0.0, 0.0], covariance: vec![vec![0.0345, 0.0], vec![0.0, 0.0345]] },
        MixtureComponent { weight: 0.15, mean: vec![0.0, 0.0], covariance: vec![vec![0.45, 0.0], vec![0.0, 0.45]] },
    ]).unwrap();
    let data = mix.sample(2048, derive_seed(seed, "flow-data"));
    let mut flow = FlowModel::new(2, 16, &[16, 16], Activation::Softplus, 0.95, derive_seed(seed, "flow-init")).unwrap();
    let t0 = std::time::Instant::now();
    let hist = flow.train(&data, &FlowTrainConfig {
        epochs, batch_size: 64, learning_rate: 3e-3, lr_decay: 0.995, seed,
    }).unwrap();
    let ce: f64 = data.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / data.len() as f64;
    println!("flow trained {epochs} ep in {:.0?}: nll {:.4} -> {:.4} (floor {ce:.4})",
        t0.elapsed(), hist[0], hist.last().unwrap());
    let ck: BoundaryCheckpoint = bdsg_core::checkpoint::load_json(std::path::Path::new(ck_path)).unwrap();
    let b = ck.restore().unwrap();
    let samples = b.sample(1024, derive_seed(seed, "eval-boundary-samples")).unwrap();
    let grid = GridSpec::square(-3.5, 3.5, 141);
    let tf = density_field(&mix, &grid).unwrap();
    let ff = density_field(&flow, &grid).unwrap();
    let b1 = bp1(&samples, &mix, 0.001, 0.01).unwrap();
    let b2 = bp2_from_fields(&samples, &grid, &ff, &tf, 0.001, 0.01).unwrap();
    println!("bp1={b1:.3} bp2={b2:.3} (bp2 <= bp1: {})", b2 <= b1 + 1e-9);
}
