use std::path::Path;

use ustat::config::FileConfig;
use ustat::{convergence_experiment, tail_mass_diagnostic, ConvergenceReport, Kernel, SamplePath};

fn run(text: &str, seed: u64) -> ConvergenceReport {
    let cfg = FileConfig::parse(text, Path::new("t.toml"), &[format!("experiment.seed={seed}")]).unwrap();
    convergence_experiment(&cfg.experiment_config().unwrap()).unwrap()
}

const PAIRS: [&str; 4] = [
    r#"
[process]
type = "iid"
law = { type = "normal", mean = 0.0, sd = 1.0 }
[kernel]
name = "symmetry3"
[experiment]
checkpoints = [100, 200, 400, 800]
replicates = 100
mode = "incomplete"
b = 20000
"#,
    r#"
[process]
type = "mixture"
weights = [0.3, 0.7]
components = [
  { type = "iid", law = { type = "normal", mean = 1.0, sd = 1.0 } },
  { type = "ar1", mean = -2.0, rho = 0.3 },
]
[kernel]
name = "poly-product"
coefficients = [0.0, 1.0]
order = 2
[experiment]
checkpoints = [100, 200, 400, 800]
replicates = 100
"#,
    r#"
[process]
type = "ar1"
rho = 0.4
[kernel]
name = "indicator"
boxes = [ { lo = [-inf], hi = [0.0] }, { lo = [0.5], hi = [inf] } ]
[experiment]
checkpoints = [100, 200, 400, 800]
replicates = 100
p = 2.0
"#,
    r#"
[process]
type = "iid"
law = { type = "uniform", lo = -1.0, hi = 1.0 }
[kernel]
name = "symmetry3"
[experiment]
checkpoints = [20, 40, 80, 160]
replicates = 100
"#,
];

#[test]
fn lp_error_is_mostly_non_increasing_after_the_first_checkpoint() {
    for (i, text) in PAIRS.iter().enumerate() {
        let runs = 10usize;
        let good = (0..runs)
            .filter(|s| run(text, 700 + 31 * i as u64 + *s as u64).lp_non_increasing_from(1))
            .count();
        assert!(good * 10 >= runs * 9, "pair {i}: {good}/{runs} runs non-increasing");
    }
}

#[test]
fn max_error_proxy_shrinks() {
    let report = run(PAIRS[1], 42);
    assert!(report.max_error.last().unwrap() < report.max_error.first().unwrap());
    assert!(report.flags.is_empty());
    assert_eq!(report.cluster_agreement, Some(1.0));
}

#[test]
fn tail_mass_is_monotone_and_vanishes_past_the_bound() {
    let xs: Vec<f64> = (0..60).map(|i| ((i * 37) % 61) as f64 / 6.0 - 5.0).collect();
    let path = SamplePath::from_scalars(&xs).unwrap();
    let xy = Kernel::new("xy", 2, true, |a| a[0].value() * a[1].value());
    let rows = tail_mass_diagnostic(&path, &xy, 1.0, &[0.0, 1.0, 5.0, 20.0, 50.0]).unwrap();
    assert!(rows.windows(2).all(|w| w[1].mass <= w[0].mass));
    assert_eq!(rows.last().unwrap().mass, 0.0);
    let bounded = ustat::kernels::symmetry_test_kernel();
    let rows = tail_mass_diagnostic(&path, &bounded, 2.0, &[3.5]).unwrap();
    assert_eq!(rows[0].mass, 0.0);
}
