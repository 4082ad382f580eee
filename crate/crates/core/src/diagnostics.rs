//! Replicated simulations and the convergence evidence they produce.

use std::io::Write;

use rayon::prelude::*;

use crate::engine::{
    check_exact_kernel, enumerate_increasing_tuples, prefix_incomplete_u_statistics,
    prefix_u_statistics, reconstruct_from_d_jr, truncate_kernel, u_statistic, PrefixSeries,
    TruncationLevel,
};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::kernel::{Kernel, LimitHook};
use crate::kernels::{build_kernel, KernelSpec};
use crate::limits::{
    closed_form_limit, component_models, estimate_limit, lp_distance, mu_omega_for_path,
    LimitEstimate, LimitMethod,
};
use crate::numeric::{binom, rel_close, KahanSum};
use crate::point::{Point, SamplePath};
use crate::processes::{simulate, ProcessSpec};
use crate::rng::{derive_seed, stream, Stream};

/// How U-statistics are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    /// Uniform sampling of `b` tuples per checkpoint.
    Incomplete { b: usize },
}

impl Mode {
    pub fn describe(self) -> String {
        match self {
            Mode::Exact => "exact".to_string(),
            Mode::Incomplete { b } => format!("incomplete(B={b})"),
        }
    }
}

pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub kernel: KernelSpec,
    pub checkpoints: Vec<usize>,
    pub replicates: usize,
    pub p: f64,
    pub mode: Mode,
    pub truncation: Option<f64>,
    pub master_seed: u64,
    /// Sample count for Monte Carlo limits.
    pub mc_samples: usize,
}

impl ExperimentConfig {
    pub fn new(process: ProcessSpec, kernel: KernelSpec, checkpoints: Vec<usize>, replicates: usize) -> Self {
        ExperimentConfig {
            process,
            kernel,
            checkpoints,
            replicates,
            p: 1.0,
            mode: Mode::Exact,
            truncation: None,
            master_seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }

    /// Validates the configuration and returns the kernel to evaluate
    /// (truncated when a level is set).
    pub fn prepare_kernel(&self) -> Result<Kernel> {
        self.process.validate()?;
        if self.replicates == 0 {
            return Err(Error::config("experiment.replicates", "must be at least 1"));
        }
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("experiment.checkpoints", "must be a non-empty strictly increasing list"));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::config("experiment.p", format!("must be a finite real >= 1, got {}", self.p)));
        }
        if self.mc_samples < 2 {
            return Err(Error::config("experiment.mc_samples", "must be at least 2"));
        }
        if let Mode::Incomplete { b: 0 } = self.mode {
            return Err(Error::config("experiment.b", "must be at least 1"));
        }
        let kernel = build_kernel(&self.kernel)?;
        let m = kernel.order();
        if self.checkpoints[0] < m {
            return Err(Error::config(
                "experiment.checkpoints",
                format!("checkpoint {} is smaller than the kernel order {m}", self.checkpoints[0]),
            ));
        }
        let kernel = match self.truncation {
            None => kernel,
            Some(r) => {
                let level = TruncationLevel::new(r).map_err(|e| Error::config("experiment.truncation", e.to_string()))?;
                truncate_kernel(&kernel, level)
            }
        };
        if self.mode == Mode::Exact {
            check_exact_kernel(*self.checkpoints.last().unwrap(), &kernel)?;
        }
        Ok(kernel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub latent_component: Option<usize>,
    pub series: PrefixSeries,
    pub limit: LimitEstimate,
}

impl ReplicateResult {
    pub fn terminal_error(&self) -> f64 {
        (self.series.last().unwrap() - self.limit.value).abs()
    }
}

/// Per-component summary for mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub component: usize,
    pub count: usize,
    /// NaN when no replicate fell in this component.
    pub mean_terminal_u: f64,
    pub limit: LimitEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub process_id: String,
    pub kernel_name: String,
    pub mode: Mode,
    pub p: f64,
    pub master_seed: u64,
    pub checkpoints: Vec<usize>,
    pub replicates: Vec<ReplicateResult>,
    pub lp_error: Vec<f64>,
    /// Largest `|U - limit|` over replicates, per checkpoint.
    pub max_error: Vec<f64>,
    pub clusters: Vec<ClusterSummary>,
    /// Share of replicates whose terminal value is nearest to their own
    /// component's limit. Mixtures only.
    pub cluster_agreement: Option<f64>,
    pub flags: Vec<String>,
}

pub const FLAG_NO_GUARANTEE: &str = "no theoretical guarantee: non-symmetric kernel of order >= 3";

impl ConvergenceReport {
    /// Whether the L^p error never increases from checkpoint `from` onward.
    pub fn lp_non_increasing_from(&self, from: usize) -> bool {
        self.lp_error[from.min(self.lp_error.len())..]
            .windows(2)
            .all(|w| w[1] <= w[0])
    }

    /// Report CSV: `# key=value` metadata lines, then one row per replicate and
    /// checkpoint. Rows with replicate = -1 carry the mean U, mean limit and the
    /// L^p error; rows with replicate = -2 carry the maximum absolute error.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# process_id={}", self.process_id)?;
        writeln!(w, "# kernel={}", self.kernel_name)?;
        writeln!(w, "# mode={}", self.mode.describe())?;
        writeln!(w, "# p={}", self.p)?;
        writeln!(w, "# master_seed={}", self.master_seed)?;
        writeln!(w, "# replicates={}", self.replicates.len())?;
        for flag in &self.flags {
            writeln!(w, "# flag={flag}")?;
        }
        for c in &self.clusters {
            writeln!(
                w,
                "# cluster component={} count={} mean_terminal_u={} limit={} limit_method={}",
                c.component,
                c.count,
                fmt_f64(c.mean_terminal_u),
                fmt_f64(c.limit.value),
                c.limit.method.as_str()
            )?;
        }
        if let Some(a) = self.cluster_agreement {
            writeln!(w, "# cluster_agreement={}", fmt_f64(a))?;
        }
        writeln!(w, "replicate,checkpoint,u_value,limit_value,limit_stderr,abs_error")?;
        for r in &self.replicates {
            for (c, u) in r.series.checkpoints.iter().zip(&r.series.values) {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.index,
                    c,
                    fmt_f64(*u),
                    fmt_f64(r.limit.value),
                    fmt_f64(r.limit.std_error),
                    fmt_f64((u - r.limit.value).abs())
                )?;
            }
        }
        let count = self.replicates.len() as f64;
        let mean_limit = self.replicates.iter().map(|r| r.limit.value).collect::<KahanSum>().value() / count;
        let mean_se = self.replicates.iter().map(|r| r.limit.std_error).collect::<KahanSum>().value() / count;
        for (j, c) in self.checkpoints.iter().enumerate() {
            let mean_u = self.replicates.iter().map(|r| r.series.values[j]).collect::<KahanSum>().value() / count;
            let row = |tag: i32, err: f64| {
                format!(
                    "{tag},{c},{},{},{},{}",
                    fmt_f64(mean_u),
                    fmt_f64(mean_limit),
                    fmt_f64(mean_se),
                    fmt_f64(err)
                )
            };
            writeln!(w, "{}", row(-1, self.lp_error[j]))?;
            writeln!(w, "{}", row(-2, self.max_error[j]))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "process {}\nkernel {} ({}), {} replicates, p = {}\n",
            self.process_id,
            self.kernel_name,
            self.mode.describe(),
            self.replicates.len(),
            self.p
        ));
        for flag in &self.flags {
            out.push_str(&format!("flag: {flag}\n"));
        }
        out.push_str(&format!("{:>10} {:>14} {:>14}\n", "n", "L^p error", "max error"));
        for (j, c) in self.checkpoints.iter().enumerate() {
            out.push_str(&format!("{c:>10} {:>14.6e} {:>14.6e}\n", self.lp_error[j], self.max_error[j]));
        }
        for c in &self.clusters {
            out.push_str(&format!(
                "component {}: {} replicates, mean terminal U {:.6}, limit {:.6} ({})\n",
                c.component,
                c.count,
                c.mean_terminal_u,
                c.limit.value,
                c.limit.method.as_str()
            ));
        }
        if let Some(a) = self.cluster_agreement {
            out.push_str(&format!("nearest-limit assignment agrees with latent component on {:.1}% of replicates\n", 100.0 * a));
        }
        out
    }
}

fn limit_key(latent: Option<usize>) -> u64 {
    latent.map_or(0, |k| k as u64 + 1)
}

/// Runs every replicate: simulate, evaluate U along the checkpoints, and
/// compare with the limit of the path's ergodic component.
///
/// Replicates run in parallel but each is seeded from `(master_seed, index)`
/// and results are reduced in index order, so the report is independent of
/// the worker count.
pub fn convergence_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let kernel = cfg.prepare_kernel()?;
    let n_max = *cfg.checkpoints.last().unwrap();

    let mut flags = Vec::new();
    if !kernel.is_symmetric() && kernel.order() >= 3 {
        flags.push(FLAG_NO_GUARANTEE.to_string());
    }

    // one limit per ergodic component
    let limit_seed = derive_seed(cfg.master_seed, u64::MAX);
    let models = component_models(&cfg.process)?;
    let component_limits = models
        .par_iter()
        .map(|m| estimate_limit(m, &kernel, cfg.mc_samples, derive_seed(limit_seed, limit_key(m.component_index))))
        .collect::<Result<Vec<_>>>()?;

    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.master_seed, r as u64);
            let path = simulate(&cfg.process, n_max, seed)?;
            let series = match cfg.mode {
                Mode::Exact => prefix_u_statistics(&path, &kernel, &cfg.checkpoints)?,
                Mode::Incomplete { b } => prefix_incomplete_u_statistics(&path, &kernel, &cfg.checkpoints, b, seed)?,
            };
            let model = mu_omega_for_path(&cfg.process, &path)?;
            let limit = component_limits[model.component_index.unwrap_or(0)];
            Ok(ReplicateResult {
                index: r,
                seed,
                latent_component: path.latent_component,
                series,
                limit,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let series: Vec<PrefixSeries> = replicates.iter().map(|r| r.series.clone()).collect();
    let limits: Vec<f64> = replicates.iter().map(|r| r.limit.value).collect();
    let lp_error = lp_distance(&series, &limits, cfg.p)?;
    let max_error = (0..cfg.checkpoints.len())
        .map(|j| {
            replicates
                .iter()
                .map(|r| (r.series.values[j] - r.limit.value).abs())
                .fold(0.0, f64::max)
        })
        .collect();

    let (clusters, cluster_agreement) = if cfg.process.is_mixture() {
        let clusters: Vec<ClusterSummary> = component_limits
            .iter()
            .enumerate()
            .map(|(k, limit)| {
                let terminal: Vec<f64> = replicates
                    .iter()
                    .filter(|r| r.latent_component == Some(k))
                    .map(|r| r.series.last().unwrap())
                    .collect();
                let mean_terminal_u = if terminal.is_empty() {
                    f64::NAN
                } else {
                    terminal.iter().copied().collect::<KahanSum>().value() / terminal.len() as f64
                };
                ClusterSummary {
                    component: k,
                    count: terminal.len(),
                    mean_terminal_u,
                    limit: *limit,
                }
            })
            .collect();
        let agree = replicates
            .iter()
            .filter(|r| nearest_component(r.series.last().unwrap(), &component_limits) == r.latent_component)
            .count();
        (clusters, Some(agree as f64 / replicates.len() as f64))
    } else {
        (Vec::new(), None)
    };

    Ok(ConvergenceReport {
        process_id: cfg.process.id(),
        kernel_name: kernel.name().to_string(),
        mode: cfg.mode,
        p: cfg.p,
        master_seed: cfg.master_seed,
        checkpoints: cfg.checkpoints.clone(),
        replicates,
        lp_error,
        max_error,
        clusters,
        cluster_agreement,
        flags,
    })
}

/// Index of the component limit closest to `u` (first one on ties).
pub fn nearest_component(u: f64, limits: &[LimitEstimate]) -> Option<usize> {
    limits
        .iter()
        .enumerate()
        .min_by(|a, b| (u - a.1.value).abs().total_cmp(&(u - b.1.value).abs()))
        .map(|(k, _)| k)
}

/// [`convergence_experiment`] restricted to indicator-product kernels whose
/// box probabilities are closed-form under every component.
pub fn indicator_convergence_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let kernel = cfg.prepare_kernel()?;
    if !matches!(kernel.limit_hook(), LimitHook::Boxes(_)) {
        return Err(Error::config("kernel.name", "indicator experiments need the \"indicator\" kernel"));
    }
    for model in component_models(&cfg.process)? {
        match closed_form_limit(&model, &kernel) {
            Some(LimitEstimate { method: LimitMethod::ExactBox, .. }) => {}
            _ => {
                return Err(Error::config(
                    "process",
                    format!("box probabilities are not closed-form under {}", model.description),
                ))
            }
        }
    }
    convergence_experiment(cfg)
}

/// Checks that `binom(n,2)^{-1} sum_j j d_{j,R}` equals the U-statistic of
/// the truncated kernel to 1e-12, relative to the mean of `|h_R|`.
pub fn dj_identity_check(path: &SamplePath, k2: &Kernel, r: TruncationLevel) -> Result<bool> {
    let reconstructed = reconstruct_from_d_jr(path, k2, r)?;
    let hr = truncate_kernel(k2, r);
    let direct = u_statistic(path, &hr)?;
    let eval = hr.clone();
    let abs = Kernel::new("abs", 2, hr.is_symmetric(), move |a| eval.eval(a).abs()).with_input(hr.input());
    let scale = u_statistic(path, &abs)?;
    Ok(rel_close(reconstructed, direct, 1e-12, scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMassRow {
    pub r: f64,
    pub mass: f64,
}

/// Tuples evaluated exactly before [`tail_mass_diagnostic`] switches to sampling.
pub const TAIL_MASS_TUPLE_BUDGET: usize = 200_000;

/// Empirical `mean |h|^p 1{|h| > R}` over the path's tuples for each `R`.
/// Advisory only.
pub fn tail_mass_diagnostic(path: &SamplePath, k: &Kernel, p: f64, r_grid: &[f64]) -> Result<Vec<TailMassRow>> {
    k.check_path(path)?;
    let (n, m) = (path.len(), k.order());
    if n < m {
        return Err(Error::domain(format!("path length {n} is smaller than kernel order {m}")));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("p must be positive, got {p}")));
    }
    let pts = path.points();
    let mut values: Vec<f64> = Vec::new();
    if binom(n as u64, m as u64) <= TAIL_MASS_TUPLE_BUDGET as f64 {
        for t in enumerate_increasing_tuples(n, m)? {
            let args: Vec<&Point> = t.indices().iter().map(|&i| &pts[i - 1]).collect();
            values.push(k.eval(&args).abs());
        }
    } else {
        let mut rng = stream(derive_seed(path.seed, 0x7a11), Stream::Diagnostic);
        for _ in 0..TAIL_MASS_TUPLE_BUDGET {
            let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            let args: Vec<&Point> = idx.iter().map(|&i| &pts[i]).collect();
            values.push(k.eval(&args).abs());
        }
    }
    let count = values.len() as f64;
    Ok(r_grid
        .iter()
        .map(|&r| {
            let acc: KahanSum = values.iter().filter(|v| **v > r).map(|v| v.powf(p)).collect();
            TailMassRow { r, mass: acc.value() / count }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::symmetry_test_kernel;
    use crate::processes::MarginalLaw;

    fn std_normal() -> ProcessSpec {
        ProcessSpec::Iid { law: MarginalLaw::Normal { mean: 0.0, sd: 1.0 } }
    }

    fn xy() -> Kernel {
        Kernel::new("xy", 2, true, |a| a[0].value() * a[1].value())
    }

    #[test]
    fn constant_kernel_has_zero_error() {
        let cfg = ExperimentConfig::new(
            std_normal(),
            KernelSpec::named("constant").with("order", 2).with("value", 1.25),
            vec![5, 10, 20],
            4,
        );
        let rep = convergence_experiment(&cfg).unwrap();
        assert_eq!(rep.lp_error, vec![0.0; 3]);
        assert_eq!(rep.max_error, vec![0.0; 3]);
    }

    #[test]
    fn infeasible_exact_mode_is_rejected() {
        let cfg = ExperimentConfig::new(std_normal(), KernelSpec::named("symmetry3"), vec![100, 2000], 1);
        assert!(matches!(convergence_experiment(&cfg), Err(Error::Infeasible(m)) if m.contains("incomplete")));
    }

    #[test]
    fn non_symmetric_high_order_is_flagged() {
        let cfg = ExperimentConfig::new(
            std_normal(),
            KernelSpec::named("user-table")
                .with("order", 3)
                .with("breaks", 0.0)
                .with("table", toml::Value::Array((0..8).map(|i| toml::Value::Float(i as f64)).collect())),
            vec![5, 8],
            2,
        );
        let rep = convergence_experiment(&cfg).unwrap();
        assert_eq!(rep.flags, vec![FLAG_NO_GUARANTEE.to_string()]);
    }

    #[test]
    fn single_replicate_lp_equals_abs_error() {
        let mut cfg = ExperimentConfig::new(std_normal(), KernelSpec::named("symmetry3"), vec![10, 20, 40], 1);
        cfg.p = 2.0;
        let rep = convergence_experiment(&cfg).unwrap();
        for (j, e) in rep.lp_error.iter().enumerate() {
            let direct = (rep.replicates[0].series.values[j] - rep.replicates[0].limit.value).abs();
            assert!((e - direct).abs() <= 1e-15 * direct.max(1.0));
        }
    }

    #[test]
    fn dj_identity_examples() {
        let path = simulate(&std_normal(), 50, 5).unwrap();
        assert!(dj_identity_check(&path, &xy(), TruncationLevel::new(10.0).unwrap()).unwrap());
        assert!(dj_identity_check(&path, &xy(), TruncationLevel::new(0.3).unwrap()).unwrap());
        let two = SamplePath::from_scalars(&[1.5, -2.0]).unwrap();
        assert!(dj_identity_check(&two, &xy(), TruncationLevel::new(1.0).unwrap()).unwrap());
    }

    #[test]
    fn tail_mass_examples() {
        let path = simulate(&std_normal(), 30, 2).unwrap();
        let rows = tail_mass_diagnostic(&path, &symmetry_test_kernel(), 1.0, &[3.5]).unwrap();
        assert_eq!(rows[0].mass, 0.0);
        let rows = tail_mass_diagnostic(&path, &xy(), 1.5, &[0.0, 5.0, 50.0]).unwrap();
        let full = u_statistic(&path, &Kernel::new("|xy|^p", 2, true, |a| (a[0].value() * a[1].value()).abs().powf(1.5))).unwrap();
        assert!((rows[0].mass - full).abs() < 1e-12 * full);
        assert!(rows[2].mass <= rows[1].mass);
    }

    #[test]
    fn mixture_report_has_clusters() {
        let mix = ProcessSpec::Mixture {
            weights: vec![0.5, 0.5],
            components: vec![
                ProcessSpec::Iid { law: MarginalLaw::Normal { mean: 1.0, sd: 1.0 } },
                ProcessSpec::Iid { law: MarginalLaw::Normal { mean: 3.0, sd: 1.0 } },
            ],
        };
        let cfg = ExperimentConfig::new(
            mix,
            KernelSpec::named("polynomial-product")
                .with("order", 2)
                .with("coefficients", toml::Value::Array(vec![0.into(), 1.into()])),
            vec![50, 200],
            10,
        );
        let rep = convergence_experiment(&cfg).unwrap();
        assert_eq!(rep.clusters.len(), 2);
        assert_eq!(rep.clusters.iter().map(|c| c.count).sum::<usize>(), 10);
        assert_eq!(rep.clusters[1].limit.value, 9.0);
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.contains("# cluster component=1"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 10 * 2 + 2 * 2);
    }
}
