use bdsg_core::density::{DensityModel, FlowModel, FlowTrainConfig, GaussianMixture, MixtureComponent};
use bdsg_core::rng::derive_seed;
use bdsg_core::Activation;

fn band_radii(f: &dyn Fn(f64) -> f64, peak: f64) -> (f64, f64) {
    // scan radius for the [0.1%, 1%] peak-relative band along +x
    let (mut lo, mut hi) = (f64::NAN, f64::NAN);
    let mut prev_in = false;
    for i in 0..3000 {
        let r = i as f64 * 0.002;
        let frac = f(r) / peak;
        let inside = (0.001..=0.01).contains(&frac);
        if inside && !prev_in { lo = r; }
        if !inside && prev_in { hi = r; break; }
        prev_in = inside;
    }
    (lo, hi)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args[1].parse().unwrap();
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(120);
    let blocks: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16);
    let mix = GaussianMixture::new(vec![
        MixtureComponent { weight: 0.85, mean: vec![0.0, 0.0], covariance: vec![vec![0.0345, 0.0], vec![0.0, 0.0345]] },
        MixtureComponent { weight: 0.15, mean: vec![0.0, 0.0], covariance: vec![vec![0.45, 0.0], vec![0.0, 0.45]] },
    ]).unwrap();
    let data = mix.sample(2048, derive_seed(seed, "flow-data"));
    let mut flow = FlowModel::new(2, blocks, &[16, 16], Activation::Softplus, 0.95, derive_seed(seed, "flow-init")).unwrap();
    let hist = flow.train(&data, &FlowTrainConfig { epochs, batch_size: 64, learning_rate: 4e-3, lr_decay: 0.992, seed }).unwrap();
    let ce: f64 = data.rows().map(|r| -mix.log_density(r).unwrap()).sum::<f64>() / data.len() as f64;
    let q = |i: usize| hist[i.min(hist.len()-1)];
    println!("nll: {:.3} q1 {:.3} half {:.3} 3q {:.3} end {:.4} (floor {ce:.4})",
        q(0), q(epochs/4), q(epochs/2), q(3*epochs/4), hist.last().unwrap());
    let truth_peak = mix.log_density(&[0.0, 0.0]).unwrap().exp();
    let flow_peak = {
        // scan along axis for the flow's max (radially symmetric-ish)
        let mut best: f64 = 0.0;
        for i in 0..200 {
            let x = [i as f64 * 0.01 - 1.0, 0.0];
            if let Ok(ld) = flow.log_density(&x) { best = best.max(ld.exp()); }
        }
        best
    };
    let tb = band_radii(&|r| mix.log_density(&[r, 0.0]).unwrap().exp(), truth_peak);
    let fb = band_radii(&|r| flow.log_density(&[r, 0.0]).map(|l| l.exp()).unwrap_or(0.0), flow_peak);
    println!("peaks: truth {truth_peak:.3} flow {flow_peak:.3}");
    println!("band radii (+x): truth [{:.2}, {:.2}]  flow [{:.2}, {:.2}]", tb.0, tb.1, fb.0, fb.1);
}
