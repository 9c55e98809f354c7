use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture};
use bdsg_core::eval::{density_field, grid_metrics_from_fields, GridSpec};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let sep: f64 = a[1].parse().unwrap();
    let var: f64 = a[2].parse().unwrap();
    let m_flow: usize = a[3].parse().unwrap();
    let epochs: usize = a[4].parse().unwrap();
    let blocks: usize = a[5].parse().unwrap();
    let seed: u64 = a.get(6).map(|s| s.parse().unwrap()).unwrap_or(1001);
    let mix = GaussianMixture::isotropic(&[vec![sep, 0.0], vec![-sep, 0.0]], var).unwrap();
    let data = mix.sample(m_flow, derive_seed(seed, "flow-data"));
    let ce: f64 = data.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / data.len() as f64;
    let mut flow = FlowModel::new(2, blocks, &[8, 8], Activation::Softplus, 0.95, derive_seed(seed, "flow-init")).unwrap();
    let t0 = std::time::Instant::now();
    let hist = flow.train(&data, &FlowTrainConfig { epochs, batch_size: 64, learning_rate: 3e-3, lr_decay: 0.996, seed }).unwrap();
    println!("flow: sep={sep} var={var} M={m_flow} {} ep {} blocks in {:.0?}; nll {:.4} (floor {ce:.4})",
        epochs, blocks, t0.elapsed(), hist.last().unwrap());
    let grid = GridSpec::square(-10.0, 10.0, 200);
    let t1 = std::time::Instant::now();
    let tf = density_field(&mix, &grid).unwrap();
    let ff = density_field(&flow, &grid).unwrap();
    println!("grid eval in {:.0?}", t1.elapsed());
    for eps in [0.005, 0.01, 0.02] {
        let g = grid_metrics_from_fields(&tf, &ff, eps).unwrap();
        println!("  eps={eps}: precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4}", g.precision, g.recall, g.f1, g.accuracy);
    }
}
