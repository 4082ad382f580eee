mod common;

use common::binomial_se;
use ustat::processes::{autocovariance, check_covariance_determinant, covariance_matrix};
use ustat::{simulate, IndexTuple, MarginalLaw, ProcessSpec};

fn normal(mean: f64, sd: f64) -> MarginalLaw {
    MarginalLaw::Normal { mean, sd }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn ar1_is_stationary_across_replicates() {
    let spec = ProcessSpec::GaussianAr1 { mean: 2.0, rho: 0.5, sigma: 1.0 };
    let reps = 10_000;
    let paths: Vec<_> = (0..reps).map(|s| simulate(&spec, 20, 50_000 + s).unwrap()).collect();
    let gamma0 = 4.0 / 3.0;
    for t in [0, 9, 19] {
        let xs: Vec<f64> = paths.iter().map(|p| p.points()[t].value()).collect();
        let (m, v) = mean_var(&xs);
        let se_mean = (gamma0 / reps as f64).sqrt();
        // variance of a sample variance of normals: 2 sigma^4 / (n - 1)
        let se_var = gamma0 * (2.0 / (reps as f64 - 1.0)).sqrt();
        assert!((m - 2.0).abs() <= 4.0 * se_mean, "t={t} mean {m}");
        assert!((v - gamma0).abs() <= 4.0 * se_var, "t={t} var {v}");
    }
    let lag1: f64 = paths
        .iter()
        .map(|p| (p.points()[5].value() - 2.0) * (p.points()[6].value() - 2.0))
        .sum::<f64>()
        / reps as f64;
    assert!((lag1 - autocovariance(&spec, 1).unwrap()).abs() < 0.06, "lag-1 {lag1}");
}

#[test]
fn gaussian_linear_autocovariance_matches_a_long_path() {
    let spec = ProcessSpec::GaussianLinear { coefficients: vec![1.0, 0.6, -0.3], mean: 0.0, sigma: 1.5 };
    let n = 200_000;
    let path = simulate(&spec, n, 77).unwrap();
    let xs: Vec<f64> = path.points().iter().map(|p| p.value()).collect();
    for lag in 0..5 {
        let emp = (0..n - lag).map(|i| xs[i] * xs[i + lag]).sum::<f64>() / (n - lag) as f64;
        let theory = autocovariance(&spec, lag).unwrap();
        assert!((emp - theory).abs() < 0.05, "lag {lag}: {emp} vs {theory}");
    }
    assert_eq!(autocovariance(&spec, 3).unwrap(), 0.0);
}

#[test]
fn mixture_components_follow_the_weights() {
    let spec = ProcessSpec::Mixture {
        weights: vec![0.2, 0.8],
        components: vec![
            ProcessSpec::Iid { law: normal(-5.0, 1.0) },
            ProcessSpec::Iid { law: normal(5.0, 1.0) },
        ],
    };
    let reps = 5000;
    let mut first = 0;
    for s in 0..reps {
        let path = simulate(&spec, 30, 9_000 + s).unwrap();
        let k = path.latent_component.unwrap();
        let mean = path.points().iter().map(|p| p.value()).sum::<f64>() / 30.0;
        // every point of the path follows the drawn component
        assert_eq!(mean < 0.0, k == 0);
        first += (k == 0) as usize;
    }
    assert!((first as f64 - 0.2 * reps as f64).abs() <= 4.0 * binomial_se(reps as usize, 0.2));
}

#[test]
fn paired_coordinates_are_uncorrelated() {
    let spec = ProcessSpec::PairedIndependent {
        x: Box::new(ProcessSpec::GaussianAr1 { mean: 0.0, rho: 0.3, sigma: 1.0 }),
        y: Box::new(ProcessSpec::Iid { law: MarginalLaw::Uniform { lo: -1.0, hi: 1.0 } }),
    };
    let n = 40_000;
    let path = simulate(&spec, n, 5).unwrap();
    assert_eq!(path.dim(), 2);
    let (xs, ys): (Vec<f64>, Vec<f64>) = path.points().iter().map(|p| (p.x()[0], p.y().unwrap()[0])).unzip();
    let (mx, vx) = mean_var(&xs);
    let (my, vy) = mean_var(&ys);
    let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n as f64;
    let corr = cov / (vx * vy).sqrt();
    assert!(corr.abs() <= 4.0 * 1.4 / (n as f64).sqrt(), "corr {corr}");
    assert!(ys.iter().all(|y| (-1.0..1.0).contains(y)));
}

#[test]
fn simulation_is_reproducible_and_seed_sensitive() {
    let spec = ProcessSpec::Iid { law: MarginalLaw::Exponential { rate: 2.0, shift: 1.0 } };
    let a = simulate(&spec, 1000, 3).unwrap();
    assert_eq!(a, simulate(&spec, 1000, 3).unwrap());
    assert_ne!(a, simulate(&spec, 1000, 4).unwrap());
    assert!(a.points().iter().all(|p| p.value() >= 1.0));
    let (m, _) = mean_var(&a.points().iter().map(|p| p.value()).collect::<Vec<_>>());
    assert!((m - 1.5).abs() < 4.0 * 0.5 / (1000f64).sqrt());
}

#[test]
fn ar1_covariance_structure() {
    let spec = ProcessSpec::GaussianAr1 { mean: 0.0, rho: 0.5, sigma: 1.0 };
    let c = 4.0 / 3.0;
    let sigma = covariance_matrix(&spec, &IndexTuple::new(vec![1, 2, 4]).unwrap()).unwrap();
    assert!((sigma.get(0, 2) - c * 0.125).abs() < 1e-15);
    assert!(sigma.is_positive_semidefinite());
    let scan = check_covariance_determinant(&spec, 3, 16).unwrap();
    let want = c.powi(3) * 0.75 * 0.75;
    assert!((scan.min_determinant - want).abs() <= 1e-12 * want);
    assert!(scan.certified);
}
