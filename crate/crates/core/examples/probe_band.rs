use bdsg_core::checkpoint::BoundaryCheckpoint;
use bdsg_core::density::{DensityModel, GaussianMixture};
use bdsg_core::rng::derive_seed;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ck_path = &args[1];
    let var: f64 = args[2].parse().unwrap();
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(42);
    let ck: BoundaryCheckpoint = bdsg_core::checkpoint::load_json(std::path::Path::new(ck_path)).unwrap();
    let b = ck.restore().unwrap();
    let mix = GaussianMixture::isotropic(&[vec![0.0, 0.0]], var).unwrap();
    let peak = mix.log_density(&[0.0, 0.0]).unwrap().exp();
    let samples = b.sample(1024, derive_seed(seed, "eval-boundary-samples")).unwrap();
    let mut fracs: Vec<f64> = samples.rows()
        .map(|r| mix.log_density(r).unwrap().exp() / peak)
        .collect();
    fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| fracs[((fracs.len() - 1) as f64 * p) as usize];
    println!("density/peak quantiles: p05={:.5} p25={:.5} p50={:.5} p75={:.5} p95={:.5}",
        q(0.05), q(0.25), q(0.50), q(0.75), q(0.95));
    let below = fracs.iter().filter(|&&f| f < 0.001).count() as f64 / fracs.len() as f64;
    let inside = fracs.iter().filter(|&&f| (0.001..=0.01).contains(&f)).count() as f64 / fracs.len() as f64;
    let above = fracs.iter().filter(|&&f| f > 0.01).count() as f64 / fracs.len() as f64;
    println!("below gamma: {below:.3}  in band: {inside:.3}  above epsilon: {above:.3}");
    let mut radii: Vec<f64> = samples.rows().map(|r| (r[0]*r[0]+r[1]*r[1]).sqrt()).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let qr = |p: f64| radii[((radii.len() - 1) as f64 * p) as usize];
    let sigma = var.sqrt();
    println!("radius/sigma quantiles: p05={:.2} p25={:.2} p50={:.2} p75={:.2} p95={:.2} (band [3.03, 3.72])",
        qr(0.05)/sigma, qr(0.25)/sigma, qr(0.50)/sigma, qr(0.75)/sigma, qr(0.95)/sigma);
}
