use bdsg_core::checkpoint::FlowCheckpoint;
use bdsg_core::density::{DensityModel, GaussianMixture, MixtureComponent};

fn main() {
    let mix = GaussianMixture::new(vec![
        MixtureComponent { weight: 0.85, mean: vec![0.0, 0.0], covariance: vec![vec![0.0345, 0.0], vec![0.0, 0.0345]] },
        MixtureComponent { weight: 0.15, mean: vec![0.0, 0.0], covariance: vec![vec![0.45, 0.0], vec![0.0, 0.45]] },
    ]).unwrap();
    let ck: FlowCheckpoint = bdsg_core::checkpoint::load_json(std::path::Path::new("/tmp/bdsg-smoke/halo_flow.json")).unwrap();
    let flow = ck.restore().unwrap();
    let truth_peak = mix.log_density(&[0.0, 0.0]).unwrap().exp();
    let mut flow_peak: f64 = 0.0;
    for i in 0..400 {
        let x = [i as f64 * 0.005 - 1.0, 0.0];
        if let Ok(ld) = flow.log_density(&x) { flow_peak = flow_peak.max(ld.exp()); }
    }
    println!("peaks: truth {truth_peak:.3} flow {flow_peak:.3}");
    println!("  r     truth p/peak   flow p/peak   (band = [0.001, 0.01])");
    for i in 0..16 {
        let r = 0.5 + i as f64 * 0.1;
        let t = mix.log_density(&[r, 0.0]).unwrap().exp() / truth_peak;
        let f = flow.log_density(&[r, 0.0]).map(|l| l.exp()).unwrap_or(0.0) / flow_peak;
        let tin = if (0.001..=0.01).contains(&t) { "*" } else { " " };
        let fin = if (0.001..=0.01).contains(&f) { "*" } else { " " };
        println!("  {r:.1}   {t:.5} {tin}      {f:.5} {fin}");
    }
}
