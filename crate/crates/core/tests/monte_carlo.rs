use pcakernel::estimators::{EstimatorConfig, ProjectedSample};
use pcakernel::kernels::{
    moment_mdp, regular_variation_ratio, small_ball_estimate, small_ball_index,
};
use pcakernel::spectral::{eigendecompose, empirical_covariance};
use pcakernel::synthetic::{generate_process, CoefficientLaw, ProcessSpec};
use pcakernel::{HilbertVector, KernelSpec};

// every ball used below stays inside the support box, so the projected
// density is constant on it and F(h) = V_D h^D f exactly
fn concentrated(spectrum: Vec<f64>, seed: u64) -> ProcessSpec {
    ProcessSpec::new(spectrum.len(), spectrum, CoefficientLaw::UniformSym, seed).unwrap()
}

#[test]
fn covariance_eigenvalues_from_ten_thousand_draws() {
    let lam = [1.0, 0.5, 0.25, 0.125];
    let spec = ProcessSpec::new(4, lam.to_vec(), CoefficientLaw::UniformSym, 2024).unwrap();
    let xs = generate_process(&spec, 10_000).unwrap();
    let dec = eigendecompose(&empirical_covariance(&xs, false).unwrap()).unwrap();
    for (got, want) in dec.eigenvalues().iter().zip(lam) {
        assert!((got - want).abs() < 0.05, "{got} vs {want}");
    }
}

#[test]
fn regular_variation_ratio_near_origin() {
    let spec = concentrated(vec![0.0046, 0.0045, 0.0044, 0.0001], 17);
    let xs = generate_process(&spec, 100_000).unwrap();
    let p = spec.true_projector(3).unwrap();
    let x = HilbertVector::zeros(4);
    let curve = small_ball_estimate(&xs, &x, &p, &[0.025, 0.05, 0.1]).unwrap();
    let up = regular_variation_ratio(&curve, 0.05, 2.0).unwrap();
    let down = regular_variation_ratio(&curve, 0.05, 0.5).unwrap();
    assert!((up / 8.0 - 1.0).abs() < 0.15, "u = 2: {up}");
    assert!((down / 0.125 - 1.0).abs() < 0.15, "u = 0.5: {down}");
    assert_eq!(regular_variation_ratio(&curve, 0.05, 1.0).unwrap(), 1.0);
    let index = small_ball_index(&curve).unwrap();
    assert!((index.slope - 3.0).abs() < 0.3, "{}", index.slope);
}

#[test]
fn small_ball_vanishes_below_the_distance_quantile() {
    let spec = ProcessSpec::geometric(25, 0.5, CoefficientLaw::UniformSym, 8).unwrap();
    let xs = generate_process(&spec, 10_000).unwrap();
    let p = spec.true_projector(3).unwrap();
    let x = xs[0].clone();
    let mut d = ProjectedSample::new(&xs, &p)
        .unwrap()
        .distances(&x)
        .unwrap();
    d.sort_by(f64::total_cmp);
    let q01 = d[d.len() / 100];
    let radii: Vec<f64> = (0..8).map(|k| 0.5 * q01 * 2f64.powi(k)).collect();
    let curve = small_ball_estimate(&xs, &x, &p, &radii).unwrap();
    assert!(curve.values[0] < 0.05, "{}", curve.values[0]);
    assert!(curve.values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn kernel_moment_ratio_approaches_m_d1() {
    let spec = concentrated(vec![0.024, 0.023, 0.0225, 0.001], 5);
    let law = spec.projected_law(3).unwrap();
    let p = spec.true_projector(3).unwrap();
    let n = 100_000;
    let xs = generate_process(&spec, n).unwrap();
    let sample = ProjectedSample::new(&xs, &p).unwrap();
    let kernel = KernelSpec::epanechnikov();
    let m1 = moment_mdp(&kernel, 3, 1);
    let anchors: Vec<HilbertVector> = (0..8)
        .map(|k| {
            let t = k as f64 * std::f64::consts::FRAC_PI_4;
            HilbertVector::new(vec![0.008 * t.cos(), 0.008 * t.sin(), 0.004, 0.0]).unwrap()
        })
        .collect();
    for h in [0.2, 0.1, 0.05] {
        let cfg = EstimatorConfig::new(3, h, kernel).unwrap();
        let (mut s, mut f) = (0.0, 0.0);
        for x in &anchors {
            s += sample.partial_sum(x, &cfg).unwrap();
            f += law
                .small_ball_probability(&p.coordinates(x).unwrap(), h)
                .unwrap();
        }
        let ratio = s / (n as f64 * f);
        assert!((ratio / m1 - 1.0).abs() < 0.1, "h = {h}: {ratio} vs {m1}");
    }
}
