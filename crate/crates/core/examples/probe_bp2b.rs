use bdsg_core::checkpoint::{save_json, FlowCheckpoint};
use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture, MixtureComponent};
use bdsg_core::eval::{bp2_from_fields, density_field, GridSpec};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args[1].parse().unwrap();
    let epochs: usize = args[2].parse().unwrap();
    let blocks: usize = args[3].parse().unwrap();
    let m: usize = args[4].parse().unwrap();
    let mix = GaussianMixture::new(vec![
        MixtureComponent { weight: 0.85, mean: vec![0.0, 0.0], covariance: vec![vec![0.0345, 0.0], vec![0.0, 0.0345]] },
        MixtureComponent { weight: 0.15, mean: vec![0.0, 0.0], covariance: vec![vec![0.45, 0.0], vec![0.0, 0.45]] },
    ]).unwrap();
    let data = mix.sample(m, derive_seed(seed, "flow-data"));
    let mut flow = FlowModel::new(2, blocks, &[8, 8], Activation::Softplus, 0.95, derive_seed(seed, "flow-init")).unwrap();
    let t0 = std::time::Instant::now();
    let hist = flow.train(&data, &FlowTrainConfig { epochs, batch_size: 64, learning_rate: 3e-3, lr_decay: 0.995, seed }).unwrap();
    let ce: f64 = data.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / data.len() as f64;
    println!("{} ep, {} blocks, M={} in {:.0?}: nll end {:.4} (floor {ce:.4})", epochs, blocks, m, t0.elapsed(), hist.last().unwrap());
    save_json(&FlowCheckpoint::capture(&flow, seed), std::path::Path::new("/tmp/bdsg-smoke/halo_flow.json")).unwrap();
    // bp2 against each trained boundary
    let grid = GridSpec::square(-3.5, 3.5, 141);
    let tf = density_field(&mix, &grid).unwrap();
    let ff = density_field(&flow, &grid).unwrap();
    for bseed in [42u64, 43, 44] {
        let path = format!("/tmp/bdsg-smoke/halo2_{bseed}/boundary.json");
        let ck: bdsg_core::checkpoint::BoundaryCheckpoint = bdsg_core::checkpoint::load_json(std::path::Path::new(&path)).unwrap();
        let b = ck.restore().unwrap();
        let samples = b.sample(1024, derive_seed(bseed, "eval-boundary-samples")).unwrap();
        let b2 = bp2_from_fields(&samples, &grid, &ff, &tf, 0.001, 0.01).unwrap();
        println!("  boundary seed {bseed}: bp2={b2:.3}");
    }
}
