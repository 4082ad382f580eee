//! Concrete kernels and the name-based registry used by configuration files.

use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sign_f64, Factor, InputShape, Kernel, LimitHook};
use crate::limits::Law;
use crate::numeric::KahanSum;
use crate::point::{euclidean, Metric, Point};

/// Product of closed-open intervals `[lo_i, hi_i)`; infinite bounds allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = BoxRegion { lo, hi };
        b.validate()?;
        Ok(b)
    }

    /// The whole of `R^d`.
    pub fn full(d: usize) -> Self {
        BoxRegion {
            lo: vec![f64::NEG_INFINITY; d],
            hi: vec![f64::INFINITY; d],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::domain(format!(
                "box bounds must be non-empty and of equal length (lo {}, hi {})",
                self.lo.len(),
                self.hi.len()
            )));
        }
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if l.is_nan() || h.is_nan() || *l == f64::INFINITY || *h == f64::NEG_INFINITY || l >= h {
                return Err(Error::domain(format!("invalid box interval [{l}, {h})")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v < *h)
    }
}

/// `sgn(2x1-x2-x3) + sgn(2x2-x1-x3) + sgn(2x3-x1-x2)`.
pub fn symmetry_test_kernel() -> Kernel {
    Kernel::new("symmetry3", 3, true, |a| {
        let (x1, x2, x3) = (a[0].value(), a[1].value(), a[2].value());
        sign_f64(2.0 * x1 - x2 - x3) + sign_f64(2.0 * x2 - x1 - x3) + sign_f64(2.0 * x3 - x1 - x2)
    })
    .with_input(InputShape::Dim(1))
    .with_bound(3.0)
    .with_analytic_limit(|law| match law {
        Law::Scalar(l) if l.is_symmetric() => Some(0.0),
        _ => None,
    })
}

fn same_dims(points: &[&[f64]]) -> Result<()> {
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::domain("dimension mismatch among kernel arguments"));
    }
    Ok(())
}

/// `d(z1,z2) - d(z1,z3) - d(z2,z4) + d(z3,z4)`.
pub fn dcov_f(z1: &Point, z2: &Point, z3: &Point, z4: &Point, metric: Metric) -> Result<f64> {
    let z = [z1.coords(), z2.coords(), z3.coords(), z4.coords()];
    same_dims(&z)?;
    Ok(f_raw(z, metric))
}

#[inline]
fn f_raw(z: [&[f64]; 4], metric: Metric) -> f64 {
    metric(z[0], z[1]) - metric(z[0], z[2]) - metric(z[1], z[3]) + metric(z[2], z[3])
}

/// Which `y` indices the second factor of the order-6 kernel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcovIndexing {
    /// `f(x1,x2,x3,x4) f(y1,y2,y3,y4)`.
    Displayed,
    /// `f(x1,x2,x3,x4) f(y1,y2,y5,y6)`, the usual distance-covariance kernel.
    Standard,
}

impl DcovIndexing {
    #[inline]
    fn y_slots(self) -> [usize; 4] {
        match self {
            DcovIndexing::Displayed => [0, 1, 2, 3],
            DcovIndexing::Standard => [0, 1, 4, 5],
        }
    }
}

fn check_pairs(pairs: &[&Point]) -> Result<()> {
    if pairs.len() != 6 {
        return Err(Error::domain(format!("expected 6 pairs, got {}", pairs.len())));
    }
    let mut xs = Vec::with_capacity(6);
    let mut ys = Vec::with_capacity(6);
    for p in pairs {
        let y = p
            .y()
            .ok_or_else(|| Error::domain("distance covariance kernels need paired points"))?;
        xs.push(p.x());
        ys.push(y);
    }
    same_dims(&xs)?;
    same_dims(&ys)
}

fn g_raw(pairs: &[&Point], metric: Metric, indexing: DcovIndexing) -> f64 {
    let x = |i: usize| pairs[i].x();
    let y = |i: usize| pairs[i].y().expect("paired point");
    let s = indexing.y_slots();
    f_raw([x(0), x(1), x(2), x(3)], metric) * f_raw([y(s[0]), y(s[1]), y(s[2]), y(s[3])], metric)
}

/// The unsymmetrized order-6 kernel on pairs.
pub fn dcov_g(pairs: &[&Point], metric: Metric, indexing: DcovIndexing) -> Result<f64> {
    check_pairs(pairs)?;
    Ok(g_raw(pairs, metric, indexing))
}

static PERMUTATIONS_6: LazyLock<Vec<[usize; 6]>> = LazyLock::new(|| {
    let mut out = Vec::with_capacity(720);
    let mut p = [0, 1, 2, 3, 4, 5];
    loop {
        out.push(p);
        // lexicographic successor
        let Some(i) = (0..5).rev().find(|&i| p[i] < p[i + 1]) else {
            break;
        };
        let j = (i + 1..6).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
    out
});

fn h_raw(pairs: &[&Point], metric: Metric, indexing: DcovIndexing) -> f64 {
    let mut dx = [[0.0; 6]; 6];
    let mut dy = [[0.0; 6]; 6];
    for a in 0..6 {
        for b in a + 1..6 {
            dx[a][b] = metric(pairs[a].x(), pairs[b].x());
            dx[b][a] = dx[a][b];
            let (ya, yb) = (pairs[a].y().expect("paired"), pairs[b].y().expect("paired"));
            dy[a][b] = metric(ya, yb);
            dy[b][a] = dy[a][b];
        }
    }
    let f = |d: &[[f64; 6]; 6], z: [usize; 4]| d[z[0]][z[1]] - d[z[0]][z[2]] - d[z[1]][z[3]] + d[z[2]][z[3]];
    let s = indexing.y_slots();
    let acc: KahanSum = PERMUTATIONS_6
        .iter()
        .map(|p| f(&dx, [p[0], p[1], p[2], p[3]]) * f(&dy, [p[s[0]], p[s[1]], p[s[2]], p[s[3]]]))
        .collect();
    acc.value() / 720.0
}

/// Average of [`dcov_g`] over all 720 orderings of the six pairs.
pub fn dcov_h(pairs: &[&Point], metric: Metric, indexing: DcovIndexing) -> Result<f64> {
    check_pairs(pairs)?;
    Ok(h_raw(pairs, metric, indexing))
}

/// The symmetrized order-6 distance-covariance kernel. Sampling estimators
/// evaluate the unsymmetrized form on permuted tuples instead.
pub fn dcov_kernel(indexing: DcovIndexing, metric: Metric) -> Kernel {
    let name = match indexing {
        DcovIndexing::Displayed => "dcov6",
        DcovIndexing::Standard => "dcov6-standard",
    };
    Kernel::new(name, 6, true, move |a| h_raw(a, metric, indexing))
        .with_input(InputShape::Paired)
        .with_sampling_evaluator(move |a| g_raw(a, metric, indexing))
        .with_analytic_limit(|law| matches!(law, Law::Pair(..)).then_some(0.0))
}

/// `prod_l 1{x_l in A_l}`.
pub fn indicator_product_kernel(boxes: Vec<BoxRegion>) -> Result<Kernel> {
    let first = boxes
        .first()
        .ok_or_else(|| Error::domain("indicator kernel needs at least one box"))?;
    let d = first.dim();
    for b in &boxes {
        b.validate()?;
        if b.dim() != d {
            return Err(Error::domain(format!(
                "box dimensions differ: {} vs {d}",
                b.dim()
            )));
        }
    }
    let symmetric = boxes.iter().all(|b| b == first);
    let m = boxes.len();
    let factors: Vec<Factor> = boxes
        .iter()
        .map(|b| {
            let b = b.clone();
            Arc::new(move |p: &Point| if b.contains(p.coords()) { 1.0 } else { 0.0 }) as Factor
        })
        .collect();
    let eval_boxes = boxes.clone();
    Ok(Kernel::new(format!("indicator(m={m})"), m, symmetric, move |a| {
        let inside = eval_boxes
            .iter()
            .zip(a)
            .all(|(b, p)| b.contains(p.coords()));
        if inside {
            1.0
        } else {
            0.0
        }
    })
    .with_input(InputShape::Dim(d))
    .with_bound(1.0)
    .with_product_factors(factors)
    .with_limit_hook(LimitHook::Boxes(boxes)))
}

#[inline]
fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `prod_l p(x_l)` with `p(x) = sum_k coefficients[k] x^k`.
pub fn polynomial_product_kernel(coefficients: Vec<f64>, order: usize) -> Result<Kernel> {
    if order == 0 {
        return Err(Error::domain("order must be at least 1"));
    }
    if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("coefficients must be a non-empty list of finite numbers"));
    }
    let eval_coeffs = coefficients.clone();
    let factor_coeffs = Arc::new(coefficients.clone());
    let factors: Vec<Factor> = (0..order)
        .map(|_| {
            let c = factor_coeffs.clone();
            Arc::new(move |p: &Point| horner(&c, p.value())) as Factor
        })
        .collect();
    Ok(Kernel::new(
        format!("polynomial-product(m={order})"),
        order,
        true,
        move |a| a.iter().map(|p| horner(&eval_coeffs, p.value())).product(),
    )
    .with_input(InputShape::Dim(1))
    .with_product_factors(factors)
    .with_analytic_limit(move |law| {
        let mean_p = match law {
            Law::Scalar(l) => coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| c * l.raw_moment(k as u32))
                .collect::<KahanSum>()
                .value(),
            Law::Empirical(sample) => {
                sample.iter().map(|p| horner(&coefficients, p.value())).collect::<KahanSum>().value()
                    / sample.len() as f64
            }
            Law::Pair(..) => return None,
        };
        Some(mean_p.powi(order as i32))
    }))
}

/// Kernel given by a table over the cells cut out by `breaks`.
///
/// With `K = breaks.len() + 1` cells, a value `x` falls in cell
/// `#{b in breaks : b <= x}`, and `table` holds `K^order` values in row-major
/// order of the cell indices.
pub fn user_table_kernel(breaks: Vec<f64>, table: Vec<f64>, order: usize) -> Result<Kernel> {
    if order == 0 {
        return Err(Error::domain("order must be at least 1"));
    }
    if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("breaks must be finite and strictly increasing"));
    }
    let cells = breaks.len() + 1;
    let expected = cells
        .checked_pow(order as u32)
        .ok_or_else(|| Error::domain("table too large"))?;
    if table.len() != expected {
        return Err(Error::domain(format!(
            "table has {} entries, expected {cells}^{order} = {expected}",
            table.len()
        )));
    }
    if table.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("table values must be finite"));
    }
    let digits = move |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; order];
        for slot in (0..order).rev() {
            d[slot] = idx % cells;
            idx /= cells;
        }
        d
    };
    let encode = |d: &[usize]| d.iter().fold(0, |acc, &c| acc * cells + c);
    let symmetric = (0..expected).all(|idx| {
        let mut d = digits(idx);
        d.sort_unstable();
        table[encode(&d)] == table[idx]
    });
    let bound = table.iter().fold(0.0f64, |b, v| b.max(v.abs()));

    let eval_breaks = breaks.clone();
    let eval_table = table.clone();
    let kernel = Kernel::new(format!("user-table(m={order},cells={cells})"), order, symmetric, move |a| {
        let idx = a.iter().fold(0, |acc, p| {
            acc * cells + eval_breaks.partition_point(|b| *b <= p.value())
        });
        eval_table[idx]
    })
    .with_input(InputShape::Dim(1))
    .with_bound(bound)
    .with_analytic_limit(move |law| {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(&breaks);
        edges.push(f64::INFINITY);
        let probs = edges
            .windows(2)
            .map(|w| law.box_probability(&BoxRegion { lo: vec![w[0]], hi: vec![w[1]] }))
            .collect::<Option<Vec<f64>>>()?;
        let acc: KahanSum = (0..expected)
            .map(|idx| table[idx] * digits(idx).iter().map(|&c| probs[c]).product::<f64>())
            .collect();
        Some(acc.value())
    });
    Ok(kernel)
}

/// Name plus family-specific parameters, as written in a `[kernel]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

impl KernelSpec {
    pub fn named(name: impl Into<String>) -> Self {
        KernelSpec {
            name: name.into(),
            params: toml::Table::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

pub const REGISTERED_KERNELS: &[&str] = &[
    "symmetry3",
    "dcov6",
    "dcov6-standard",
    "indicator",
    "polynomial-product",
    "user-table",
    "constant",
];

struct Params<'a> {
    table: &'a toml::Table,
}

impl Params<'_> {
    fn field(key: &str) -> String {
        format!("kernel.{key}")
    }

    fn allow_only(&self, keys: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::config(
                Self::field(k),
                format!("unknown parameter; expected one of {keys:?}"),
            )),
            None => Ok(()),
        }
    }

    fn number(v: &toml::Value) -> Option<f64> {
        match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.table
            .get(key)
            .map(|v| Self::number(v).ok_or_else(|| Error::config(Self::field(key), "must be a number")))
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| Error::config(Self::field(key), "missing required parameter"))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self.table.get(key) {
            Some(toml::Value::Integer(i)) if *i >= 1 => Ok(*i as usize),
            Some(_) => Err(Error::config(Self::field(key), "must be a positive integer")),
            None => Err(Error::config(Self::field(key), "missing required parameter")),
        }
    }

    fn list_value(field: &str, v: &toml::Value) -> Result<Vec<f64>> {
        match v {
            toml::Value::Array(a) => a
                .iter()
                .map(|x| Self::number(x).ok_or_else(|| Error::config(field, "must contain only numbers")))
                .collect(),
            other => Self::number(other)
                .map(|x| vec![x])
                .ok_or_else(|| Error::config(field, "must be a number or a list of numbers")),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self
            .table
            .get(key)
            .ok_or_else(|| Error::config(Self::field(key), "missing required parameter"))?;
        Self::list_value(&Self::field(key), v)
    }

    fn boxes(&self) -> Result<Vec<BoxRegion>> {
        let arr = match self.table.get("boxes") {
            Some(toml::Value::Array(a)) if !a.is_empty() => a,
            Some(_) => return Err(Error::config("kernel.boxes", "must be a non-empty list of {lo, hi} tables")),
            None => return Err(Error::config("kernel.boxes", "missing required parameter")),
        };
        arr.iter()
            .enumerate()
            .map(|(i, b)| {
                let field = format!("kernel.boxes[{i}]");
                let t = b
                    .as_table()
                    .ok_or_else(|| Error::config(&field, "must be a table with lo and hi"))?;
                let get = |k: &str| {
                    t.get(k)
                        .ok_or_else(|| Error::config(format!("{field}.{k}"), "missing"))
                        .and_then(|v| Self::list_value(&format!("{field}.{k}"), v))
                };
                BoxRegion::new(get("lo")?, get("hi")?)
                    .map_err(|e| Error::config(&field, e.to_string()))
            })
            .collect()
    }

    fn metric(&self) -> Result<Metric> {
        match self.table.get("metric") {
            None => Ok(euclidean),
            Some(toml::Value::String(s)) if s == "euclidean" => Ok(euclidean),
            Some(_) => Err(Error::config("kernel.metric", "only \"euclidean\" is supported")),
        }
    }
}

fn as_config(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Domain(msg) => Error::config(field, msg),
        other => other,
    }
}

/// Builds a kernel from its registry name and parameters.
pub fn build_kernel(spec: &KernelSpec) -> Result<Kernel> {
    let p = Params { table: &spec.params };
    match spec.name.as_str() {
        "symmetry3" => {
            p.allow_only(&[])?;
            Ok(symmetry_test_kernel())
        }
        "dcov6" | "dcov6-standard" => {
            p.allow_only(&["metric"])?;
            let indexing = if spec.name == "dcov6" {
                DcovIndexing::Displayed
            } else {
                DcovIndexing::Standard
            };
            Ok(dcov_kernel(indexing, p.metric()?))
        }
        "indicator" => {
            p.allow_only(&["boxes"])?;
            indicator_product_kernel(p.boxes()?).map_err(as_config("kernel.boxes"))
        }
        "polynomial-product" | "poly-product" => {
            p.allow_only(&["coefficients", "order"])?;
            polynomial_product_kernel(p.list("coefficients")?, p.usize("order")?)
                .map_err(as_config("kernel.coefficients"))
        }
        "user-table" => {
            p.allow_only(&["breaks", "table", "order"])?;
            user_table_kernel(p.list("breaks")?, p.list("table")?, p.usize("order")?)
                .map_err(as_config("kernel.table"))
        }
        "constant" => {
            p.allow_only(&["value", "order"])?;
            let value = p.f64("value")?;
            if !value.is_finite() {
                return Err(Error::config("kernel.value", "must be finite"));
            }
            Ok(Kernel::constant(p.usize("order")?, value))
        }
        other => Err(Error::config(
            "kernel.name",
            format!(
                "unknown kernel \"{other}\"; registered kernels: {}",
                REGISTERED_KERNELS.join(", ")
            ),
        )),
    }
}
