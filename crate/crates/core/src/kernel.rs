//! The kernel interface shared by every other module.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::BoxRegion;
use crate::limits::Law;
use crate::numeric::rel_close;
use crate::point::{Point, SamplePath};
use crate::rng::{stream, Stream};

pub type Evaluator = Arc<dyn Fn(&[&Point]) -> f64 + Send + Sync>;
/// One factor of a product-form kernel.
pub type Factor = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

pub type AnalyticLimit = Arc<dyn Fn(&Law) -> Option<f64> + Send + Sync>;

/// Sign with the convention `sgn(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SignValue {
    Negative = -1,
    Zero = 0,
    Positive = 1,
}

impl SignValue {
    pub fn as_f64(self) -> f64 {
        self as i8 as f64
    }
}

pub fn sgn(t: f64) -> Result<SignValue> {
    if !t.is_finite() {
        return Err(Error::domain(format!("sgn of non-finite value {t}")));
    }
    Ok(if t > 0.0 {
        SignValue::Positive
    } else if t < 0.0 {
        SignValue::Negative
    } else {
        SignValue::Zero
    })
}

/// `sgn` on finite values, as a float.
#[inline]
pub(crate) fn sign_f64(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// How the limit `I_m` of a kernel can be obtained without sampling.
#[derive(Clone, Default)]
pub enum LimitHook {
    #[default]
    None,
    /// Closed form in terms of the component law; `None` when the law is not covered.
    Analytic(AnalyticLimit),
    /// Product of indicators of these boxes.
    Boxes(Vec<BoxRegion>),
}

impl fmt::Debug for LimitHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitHook::None => f.write_str("None"),
            LimitHook::Analytic(_) => f.write_str("Analytic(..)"),
            LimitHook::Boxes(b) => f.debug_tuple("Boxes").field(b).finish(),
        }
    }
}

/// Which points a kernel accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    Any,
    Dim(usize),
    Paired,
}

/// An order-`m` real function on the state space.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    order: usize,
    symmetric: bool,
    evaluator: Evaluator,
    sampling_evaluator: Option<Evaluator>,
    limit: LimitHook,
    bound: Option<f64>,
    input: InputShape,
    factors: Option<Arc<Vec<Factor>>>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("symmetric", &self.symmetric)
            .field("limit", &self.limit)
            .field("bound", &self.bound)
            .field("input", &self.input)
            .finish()
    }
}

impl Kernel {
    /// Panics if `order == 0`.
    pub fn new<F>(name: impl Into<String>, order: usize, symmetric: bool, f: F) -> Self
    where
        F: Fn(&[&Point]) -> f64 + Send + Sync + 'static,
    {
        assert!(order >= 1, "kernel order must be at least 1");
        Kernel {
            name: name.into(),
            order,
            symmetric,
            evaluator: Arc::new(f),
            sampling_evaluator: None,
            limit: LimitHook::None,
            bound: None,
            input: InputShape::Any,
            factors: None,
        }
    }

    /// Constant kernel of the given order.
    pub fn constant(order: usize, c: f64) -> Self {
        Kernel::new(format!("constant({c})"), order, true, move |_| c)
            .with_bound(c.abs())
            .with_analytic_limit(move |_| Some(c))
    }

    pub fn with_analytic_limit<F>(mut self, f: F) -> Self
    where
        F: Fn(&Law) -> Option<f64> + Send + Sync + 'static,
    {
        self.limit = LimitHook::Analytic(Arc::new(f));
        self
    }

    pub fn with_limit_hook(mut self, hook: LimitHook) -> Self {
        self.limit = hook;
        self
    }

    /// Declares `|h| <= bound` everywhere.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn with_input(mut self, input: InputShape) -> Self {
        self.input = input;
        self
    }

    /// An unsymmetrized evaluator whose average over uniformly permuted
    /// arguments equals this kernel. Used by sampling estimators only.
    pub fn with_sampling_evaluator<F>(mut self, f: F) -> Self
    where
        F: Fn(&[&Point]) -> f64 + Send + Sync + 'static,
    {
        self.sampling_evaluator = Some(Arc::new(f));
        self
    }

    /// Declares `h(x_1, ..., x_m) = prod_l factors[l](x_l)`, which lets the
    /// engine sum over increasing tuples in `O(n m)`. Panics unless there is
    /// one factor per argument.
    pub fn with_product_factors(mut self, factors: Vec<Factor>) -> Self {
        assert_eq!(factors.len(), self.order, "one factor per kernel argument");
        self.factors = Some(Arc::new(factors));
        self
    }

    pub fn product_factors(&self) -> Option<&[Factor]> {
        self.factors.as_deref().map(Vec::as_slice)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn limit_hook(&self) -> &LimitHook {
        &self.limit
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn input(&self) -> InputShape {
        self.input
    }

    pub(crate) fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub(crate) fn sampling_evaluator(&self) -> Option<&Evaluator> {
        self.sampling_evaluator.as_ref()
    }

    /// Evaluates the kernel. `args.len()` must equal the order.
    #[inline]
    pub fn eval(&self, args: &[&Point]) -> f64 {
        debug_assert_eq!(args.len(), self.order);
        (self.evaluator)(args)
    }

    /// Checks that the points of `path` fit this kernel's input shape.
    pub fn check_path(&self, path: &SamplePath) -> Result<()> {
        match self.input {
            InputShape::Any => Ok(()),
            InputShape::Dim(d) if path.dim() == d => Ok(()),
            InputShape::Dim(d) => Err(Error::domain(format!(
                "kernel {} expects dimension {d}, path has dimension {}",
                self.name,
                path.dim()
            ))),
            InputShape::Paired if path.split().is_some() => Ok(()),
            InputShape::Paired => Err(Error::domain(format!(
                "kernel {} expects paired points",
                self.name
            ))),
        }
    }

    /// A random point of a shape this kernel accepts.
    pub(crate) fn random_input<R: Rng>(&self, rng: &mut R) -> Point {
        let mut draw = |d: usize| -> Vec<f64> {
            (0..d)
                .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        match self.input {
            InputShape::Any => Point::new(draw(1)).expect("finite draw"),
            InputShape::Dim(d) => Point::new(draw(d)).expect("finite draw"),
            InputShape::Paired => Point::with_split(draw(2), 1).expect("valid split"),
        }
    }
}

/// Spot-checks permutation invariance on `trials` random inputs, each against
/// a random non-identity permutation, at relative tolerance 1e-12.
pub fn validate_kernel_symmetry(k: &Kernel, trials: usize, rng_seed: u64) -> bool {
    let m = k.order();
    if m < 2 {
        return true;
    }
    let mut rng = stream(rng_seed, Stream::Diagnostic);
    let identity: Vec<usize> = (0..m).collect();
    for _ in 0..trials {
        let points: Vec<Point> = (0..m).map(|_| k.random_input(&mut rng)).collect();
        let mut perm = identity.clone();
        while perm == identity {
            perm.shuffle(&mut rng);
        }
        let args: Vec<&Point> = points.iter().collect();
        let permuted: Vec<&Point> = perm.iter().map(|&i| &points[i]).collect();
        let a = k.eval(&args);
        let b = k.eval(&permuted);
        if !rel_close(a, b, 1e-12, f64::MIN_POSITIVE) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::symmetry_test_kernel;
    use proptest::prelude::*;

    #[test]
    fn sign_convention() {
        assert_eq!(sgn(2.0).unwrap(), SignValue::Positive);
        assert_eq!(sgn(0.0).unwrap(), SignValue::Zero);
        assert_eq!(sgn(-0.0).unwrap(), SignValue::Zero);
        assert_eq!(sgn(-0.5).unwrap(), SignValue::Negative);
        assert!(sgn(f64::NAN).is_err());
        assert!(sgn(f64::INFINITY).is_err());
        assert_eq!(SignValue::Negative.as_f64(), -1.0);
    }

    proptest! {
        #[test]
        fn sgn_is_odd(t in -1e300f64..1e300) {
            prop_assert_eq!(sgn(-t).unwrap().as_f64(), -sgn(t).unwrap().as_f64());
        }
    }

    #[test]
    fn symmetry_validation() {
        assert!(validate_kernel_symmetry(&symmetry_test_kernel(), 100, 1));
        let diff = Kernel::new("diff", 2, false, |a| a[0].value() - a[1].value());
        for seed in 0..20 {
            assert!(!validate_kernel_symmetry(&diff, 1, seed));
        }
        assert!(validate_kernel_symmetry(&Kernel::constant(4, 2.5), 100, 3));
    }
}
