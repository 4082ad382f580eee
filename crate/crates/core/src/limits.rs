//! The random measure `mu_omega` of a path and the limit functional `I_m`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::engine::PrefixSeries;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, LimitHook};
use crate::kernels::BoxRegion;
use crate::point::{Point, SamplePath};
use crate::processes::{MarginalLaw, ProcessSpec};
use crate::rng::{derive_seed, stream, Stream};

/// A samplable law on the state space.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Scalar(MarginalLaw),
    /// Product of two laws on a paired space.
    Pair(Box<Law>, Box<Law>),
    /// Uniform distribution on stored points.
    Empirical(Arc<Vec<Point>>),
}

impl Law {
    pub fn dim(&self) -> usize {
        match self {
            Law::Scalar(_) => 1,
            Law::Pair(x, y) => x.dim() + y.dim(),
            Law::Empirical(pts) => pts[0].dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Law::Scalar(l) => Point::scalar(l.sample(rng)),
            Law::Pair(x, y) => {
                let a = x.sample(rng);
                let b = y.sample(rng);
                Point::pair(a, b)
            }
            Law::Empirical(pts) => pts[rng.random_range(0..pts.len())].clone(),
        }
    }

    /// Probability of a box, when available in closed form.
    pub fn box_probability(&self, b: &BoxRegion) -> Option<f64> {
        if b.dim() != self.dim() {
            return None;
        }
        match self {
            Law::Scalar(l) => Some(l.interval_probability(b.lo()[0], b.hi()[0])),
            Law::Pair(x, y) => {
                let dx = x.dim();
                let bx = BoxRegion::new(b.lo()[..dx].to_vec(), b.hi()[..dx].to_vec()).ok()?;
                let by = BoxRegion::new(b.lo()[dx..].to_vec(), b.hi()[dx..].to_vec()).ok()?;
                Some(x.box_probability(&bx)? * y.box_probability(&by)?)
            }
            Law::Empirical(pts) => {
                let hits = pts.iter().filter(|p| b.contains(p.coords())).count();
                Some(hits as f64 / pts.len() as f64)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Law::Scalar(l) => l.describe(),
            Law::Pair(x, y) => format!("{} x {}", x.describe(), y.describe()),
            Law::Empirical(pts) => format!("empirical({} points)", pts.len()),
        }
    }
}

/// `mu_omega` for one path: the marginal law of the active ergodic component.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMeasureModel {
    pub law: Law,
    pub component_index: Option<usize>,
    pub description: String,
    /// Set for split-sample plug-in models built from observed data.
    pub heuristic: bool,
}

impl RandomMeasureModel {
    pub fn new(law: Law, component_index: Option<usize>) -> Self {
        let description = law.describe();
        RandomMeasureModel {
            law,
            component_index,
            description,
            heuristic: false,
        }
    }
}

/// Stationary marginal law of an ergodic process.
pub fn marginal_law(spec: &ProcessSpec) -> Result<Law> {
    Ok(match spec {
        ProcessSpec::Iid { law } => Law::Scalar(law.clone()),
        ProcessSpec::GaussianAr1 { mean, rho, sigma } => Law::Scalar(MarginalLaw::Normal {
            mean: *mean,
            sd: sigma / (1.0 - rho * rho).sqrt(),
        }),
        ProcessSpec::GaussianLinear { coefficients, mean, sigma } => Law::Scalar(MarginalLaw::Normal {
            mean: *mean,
            sd: sigma * coefficients.iter().map(|a| a * a).sum::<f64>().sqrt(),
        }),
        ProcessSpec::PairedIndependent { x, y } => {
            Law::Pair(Box::new(marginal_law(x)?), Box::new(marginal_law(y)?))
        }
        ProcessSpec::Mixture { .. } => {
            return Err(Error::domain("a mixture has no single ergodic marginal; select a component"))
        }
    })
}

/// Model of every mixture component, in order (a single entry for ergodic specs).
pub fn component_models(spec: &ProcessSpec) -> Result<Vec<RandomMeasureModel>> {
    match spec {
        ProcessSpec::Mixture { components, .. } => components
            .iter()
            .enumerate()
            .map(|(k, c)| Ok(RandomMeasureModel::new(marginal_law(c)?, Some(k))))
            .collect(),
        other => Ok(vec![RandomMeasureModel::new(marginal_law(other)?, None)]),
    }
}

pub fn mu_omega_for_path(spec: &ProcessSpec, path: &SamplePath) -> Result<RandomMeasureModel> {
    spec.validate()?;
    match (spec, path.latent_component) {
        (ProcessSpec::Mixture { components, .. }, Some(k)) => {
            let c = components.get(k).ok_or_else(|| {
                Error::domain(format!(
                    "latent component {k} out of range for {} components",
                    components.len()
                ))
            })?;
            Ok(RandomMeasureModel::new(marginal_law(c)?, Some(k)))
        }
        (ProcessSpec::Mixture { .. }, None) => Err(Error::domain(
            "path has no latent component index; mu_omega of a mixture path is unknown",
        )),
        (_, Some(k)) => Err(Error::domain(format!(
            "path carries latent component {k} but the process is not a mixture"
        ))),
        (other, None) => Ok(RandomMeasureModel::new(marginal_law(other)?, None)),
    }
}

/// Plug-in model for observed data: the empirical law of the first half of
/// the path. Heuristic; the ergodic decomposition is not identified.
pub fn split_sample_model(path: &SamplePath) -> RandomMeasureModel {
    let half = (path.len() / 2).max(1);
    let law = Law::Empirical(Arc::new(path.points()[..half].to_vec()));
    let mut model = RandomMeasureModel::new(law, path.latent_component);
    model.heuristic = true;
    model
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMethod {
    Analytic,
    MonteCarlo,
    ExactBox,
}

impl LimitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitMethod::Analytic => "analytic",
            LimitMethod::MonteCarlo => "monte_carlo",
            LimitMethod::ExactBox => "exact_box",
        }
    }
}

/// Value of `I_m(S, h, omega)`; `std_error` is zero unless Monte Carlo was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: LimitMethod,
}

/// Closed-form limit when the kernel's hook covers the model.
pub fn closed_form_limit(model: &RandomMeasureModel, k: &Kernel) -> Option<LimitEstimate> {
    match k.limit_hook() {
        LimitHook::Analytic(f) => f(&model.law).map(|value| LimitEstimate {
            value,
            std_error: 0.0,
            method: LimitMethod::Analytic,
        }),
        LimitHook::Boxes(boxes) => {
            let probs = boxes
                .iter()
                .map(|b| model.law.box_probability(b))
                .collect::<Option<Vec<f64>>>()?;
            Some(LimitEstimate {
                value: probs.iter().product(),
                std_error: 0.0,
                method: LimitMethod::ExactBox,
            })
        }
        LimitHook::None => None,
    }
}

pub fn estimate_limit(model: &RandomMeasureModel, k: &Kernel, mc_samples: usize, seed: u64) -> Result<LimitEstimate> {
    match closed_form_limit(model, k) {
        Some(est) => Ok(est),
        None => monte_carlo_limit(model, k, mc_samples, seed),
    }
}

const MC_CHUNK: usize = 4096;

/// Mean and sum of squared deviations of one chunk.
#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }
}

/// Average of `h` over `mc_samples` tuples of i.i.d. draws from the model.
///
/// Work is split into fixed-size chunks with seeds derived from `seed`, and
/// chunk results are merged in chunk order, so the estimate does not depend
/// on the number of worker threads. Kernels with a sampling evaluator use
/// it: the draws are exchangeable, so its mean equals that of the kernel.
pub fn monte_carlo_limit(model: &RandomMeasureModel, k: &Kernel, mc_samples: usize, seed: u64) -> Result<LimitEstimate> {
    if mc_samples < 2 {
        return Err(Error::domain("Monte Carlo limit estimation needs at least 2 samples"));
    }
    if let Law::Empirical(pts) = &model.law {
        if pts.is_empty() {
            return Err(Error::domain("empirical law has no points"));
        }
    }
    let m = k.order();
    let eval = k.sampling_evaluator().unwrap_or(k.evaluator()).clone();
    let chunks = mc_samples.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = MC_CHUNK.min(mc_samples - c * MC_CHUNK);
            let mut rng = stream(derive_seed(seed, c as u64), Stream::MonteCarlo);
            let mut acc = Moments { count: 0.0, mean: 0.0, m2: 0.0 };
            let mut draws: Vec<Point> = Vec::with_capacity(m);
            for _ in 0..size {
                draws.clear();
                draws.extend((0..m).map(|_| model.law.sample(&mut rng)));
                let args: Vec<&Point> = draws.iter().collect();
                let x = eval(&args);
                acc = acc.merge(Moments { count: 1.0, mean: x, m2: 0.0 });
            }
            acc
        })
        .collect();
    let total = parts.into_iter().reduce(Moments::merge).expect("at least one chunk");
    let variance = total.m2 / (total.count - 1.0);
    Ok(LimitEstimate {
        value: total.mean,
        std_error: (variance / total.count).sqrt(),
        method: LimitMethod::MonteCarlo,
    })
}

/// Per checkpoint: `(mean_r |U_r - limit_r|^p)^{1/p}`.
pub fn lp_distance(series: &[PrefixSeries], limits: &[f64], p: f64) -> Result<Vec<f64>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::domain(format!("p must be a finite real >= 1, got {p}")));
    }
    if series.is_empty() || series.len() != limits.len() {
        return Err(Error::domain(format!(
            "{} series but {} limits",
            series.len(),
            limits.len()
        )));
    }
    let checkpoints = &series[0].checkpoints;
    if series.iter().any(|s| &s.checkpoints != checkpoints || s.values.len() != checkpoints.len()) {
        return Err(Error::domain("all series must share the same checkpoints"));
    }
    let r = series.len() as f64;
    Ok((0..checkpoints.len())
        .map(|j| {
            let acc: crate::numeric::KahanSum = series
                .iter()
                .zip(limits)
                .map(|(s, l)| (s.values[j] - l).abs().powf(p))
                .collect();
            (acc.value() / r).powf(1.0 / p)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{indicator_product_kernel, polynomial_product_kernel, symmetry_test_kernel};
    use crate::processes::simulate;

    fn normal(mean: f64, sd: f64) -> MarginalLaw {
        MarginalLaw::Normal { mean, sd }
    }

    fn mixture() -> ProcessSpec {
        ProcessSpec::Mixture {
            weights: vec![0.5, 0.5],
            components: vec![
                ProcessSpec::Iid { law: normal(1.0, 1.0) },
                ProcessSpec::Iid { law: normal(3.0, 1.0) },
            ],
        }
    }

    fn product() -> Kernel {
        polynomial_product_kernel(vec![0.0, 1.0], 2).unwrap()
    }

    #[test]
    fn mu_omega_examples() {
        let iid = ProcessSpec::Iid { law: normal(0.0, 1.0) };
        let path = simulate(&iid, 4, 1).unwrap();
        assert_eq!(mu_omega_for_path(&iid, &path).unwrap().law, Law::Scalar(normal(0.0, 1.0)));

        let mix = mixture();
        let mut found = [false, false];
        for seed in 0..40 {
            let path = simulate(&mix, 3, seed).unwrap();
            let k = path.latent_component.unwrap();
            let model = mu_omega_for_path(&mix, &path).unwrap();
            let expect = if k == 0 { normal(1.0, 1.0) } else { normal(3.0, 1.0) };
            assert_eq!(model.law, Law::Scalar(expect));
            assert_eq!(model.component_index, Some(k));
            found[k] = true;
        }
        assert!(found[0] && found[1]);

        let ar = ProcessSpec::GaussianAr1 { mean: 0.0, rho: 0.6, sigma: 2.0 };
        let path = simulate(&ar, 3, 1).unwrap();
        let Law::Scalar(MarginalLaw::Normal { mean, sd }) = mu_omega_for_path(&ar, &path).unwrap().law else {
            panic!()
        };
        assert_eq!(mean, 0.0);
        assert!((sd * sd - 4.0 / (1.0 - 0.36)).abs() < 1e-12);

        let mut bare = simulate(&mix, 3, 0).unwrap();
        bare.latent_component = None;
        assert!(mu_omega_for_path(&mix, &bare).is_err());
    }

    #[test]
    fn limit_examples() {
        let model = RandomMeasureModel::new(Law::Scalar(normal(4.0, 2.0)), None);
        let est = estimate_limit(&model, &symmetry_test_kernel(), 10, 0).unwrap();
        assert_eq!((est.value, est.std_error, est.method), (0.0, 0.0, LimitMethod::Analytic));

        let std = RandomMeasureModel::new(Law::Scalar(normal(0.0, 1.0)), None);
        let boxes = vec![
            BoxRegion::new(vec![f64::NEG_INFINITY], vec![0.0]).unwrap(),
            BoxRegion::new(vec![0.0], vec![f64::INFINITY]).unwrap(),
        ];
        let est = estimate_limit(&std, &indicator_product_kernel(boxes).unwrap(), 10, 0).unwrap();
        assert_eq!(est.method, LimitMethod::ExactBox);
        assert!((est.value - 0.25).abs() < 1e-15);

        let xy = Kernel::new("xy", 2, true, |a| a[0].value() * a[1].value());
        let model = RandomMeasureModel::new(Law::Scalar(normal(1.5, 1.0)), None);
        let est = estimate_limit(&model, &xy, 100_000, 3).unwrap();
        assert_eq!(est.method, LimitMethod::MonteCarlo);
        assert!(est.std_error > 0.0);
        assert!((est.value - 2.25).abs() < 4.0 * est.std_error, "{est:?}");
        assert!(monte_carlo_limit(&model, &xy, 1, 3).is_err());
    }

    #[test]
    fn closed_form_is_seed_invariant() {
        let model = RandomMeasureModel::new(Law::Scalar(normal(1.0, 1.0)), None);
        let k = product();
        let a = estimate_limit(&model, &k, 100, 1).unwrap();
        let b = estimate_limit(&model, &k, 100, 99).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error, 0.0);
    }

    #[test]
    fn per_component_limits_differ() {
        let models = component_models(&mixture()).unwrap();
        let k = product();
        let limits: Vec<f64> = models.iter().map(|m| estimate_limit(m, &k, 10, 0).unwrap().value).collect();
        assert_eq!(limits, vec![1.0, 9.0]);
    }

    #[test]
    fn lp_distance_examples() {
        let s = |v: Vec<f64>| PrefixSeries { checkpoints: vec![2, 3], values: v };
        assert_eq!(lp_distance(&[s(vec![1.0, 1.0]), s(vec![2.0, 2.0])], &[1.0, 2.0], 2.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(lp_distance(&[s(vec![0.5, 3.0])], &[1.0], 1.0).unwrap(), vec![0.5, 2.0]);
        let d = lp_distance(&[s(vec![1.0, 1.0]), s(vec![3.0, 3.0])], &[1.0, 1.0], 2.0).unwrap();
        assert!((d[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(lp_distance(&[s(vec![1.0, 1.0])], &[1.0, 2.0], 1.0).is_err());
        assert!(lp_distance(&[s(vec![1.0, 1.0])], &[1.0], 0.5).is_err());
    }

    #[test]
    fn split_sample_is_heuristic_and_exact_on_boxes() {
        let path = SamplePath::from_scalars(&[-1.0, 2.0, 0.5, 9.0]).unwrap();
        let model = split_sample_model(&path);
        assert!(model.heuristic);
        let b = BoxRegion::new(vec![0.0], vec![10.0]).unwrap();
        assert_eq!(model.law.box_probability(&b), Some(0.5));
    }

    #[test]
    fn pair_law_box_probability_factorizes() {
        let law = Law::Pair(Box::new(Law::Scalar(normal(0.0, 1.0))), Box::new(Law::Scalar(MarginalLaw::Uniform { lo: 0.0, hi: 4.0 })));
        let b = BoxRegion::new(vec![0.0, 1.0], vec![f64::INFINITY, 2.0]).unwrap();
        assert!((law.box_probability(&b).unwrap() - 0.5 * 0.25).abs() < 1e-15);
    }
}
