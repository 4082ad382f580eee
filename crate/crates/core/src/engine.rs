//! Exact and sampled U-statistics, V-statistics, truncation and the weighted
//! averages used to reconstruct order-2 statistics.

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::kernel::{Factor, Kernel};
use crate::numeric::{binom, binom_exact, KahanSum};
use crate::point::{Point, SamplePath};
use crate::rng::{derive_seed, stream, Stream};

/// Exact mode refuses to evaluate more kernel terms than this.
pub const EXACT_EVALUATION_LIMIT: f64 = 1e9;

/// A strictly increasing tuple of 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() || indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "index tuple {indices:?} is not strictly increasing from 1"
            )));
        }
        Ok(IndexTuple(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lexicographic iterator over `Inc^m_n`.
#[derive(Debug, Clone)]
pub struct IncreasingTuples {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for IncreasingTuples {
    type Item = IndexTuple;

    fn next(&mut self) -> Option<IndexTuple> {
        let cur = self.current.as_mut()?;
        let out = IndexTuple(cur.iter().map(|i| i + 1).collect());
        if !advance_subset(cur, self.n) {
            self.current = None;
        }
        Some(out)
    }
}

pub fn enumerate_increasing_tuples(n: usize, m: usize) -> Result<IncreasingTuples> {
    if m == 0 {
        return Err(Error::domain("tuple length must be at least 1"));
    }
    let current = (m <= n).then(|| (0..m).collect());
    Ok(IncreasingTuples { n, current })
}

/// Moves `idx` (0-based, strictly increasing, values < n) to its lexicographic
/// successor. Returns false when `idx` was the last tuple.
#[inline]
fn advance_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for t in i + 1..k {
                idx[t] = idx[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Calls `f` on every 0-based increasing `k`-subset of `0..n`, in lexicographic order.
#[inline]
pub(crate) fn for_each_subset<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        if !advance_subset(&mut idx, n) {
            break;
        }
    }
}

fn check_order(path: &SamplePath, k: &Kernel) -> Result<()> {
    k.check_path(path)?;
    if path.len() < k.order() {
        return Err(Error::domain(format!(
            "path length {} is smaller than kernel order {}",
            path.len(),
            k.order()
        )));
    }
    Ok(())
}

/// Refuses exact evaluation when `binom(n, m)` exceeds [`EXACT_EVALUATION_LIMIT`].
pub fn check_exact_feasible(n: usize, m: usize) -> Result<()> {
    let terms = binom(n as u64, m as u64);
    if terms > EXACT_EVALUATION_LIMIT {
        return Err(Error::Infeasible(format!(
            "exact U-statistic needs binom({n}, {m}) = {terms:.3e} kernel evaluations \
             (limit {EXACT_EVALUATION_LIMIT:.0e}); use incomplete mode with a tuple budget B"
        )));
    }
    Ok(())
}

/// [`check_exact_feasible`] for a specific kernel: product-form kernels are
/// summed in `O(n m)` and are always feasible.
pub fn check_exact_kernel(n: usize, k: &Kernel) -> Result<()> {
    if k.product_factors().is_some() {
        return Ok(());
    }
    check_exact_feasible(n, k.order())
}

/// U-statistic values along a growing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSeries {
    pub checkpoints: Vec<usize>,
    pub values: Vec<f64>,
}

impl PrefixSeries {
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

fn check_checkpoints(checkpoints: &[usize], m: usize, n: usize) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::domain("checkpoint list is empty"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(format!(
            "checkpoints {checkpoints:?} are not strictly increasing"
        )));
    }
    if checkpoints[0] < m {
        return Err(Error::domain(format!(
            "checkpoint {} is smaller than kernel order {m}",
            checkpoints[0]
        )));
    }
    let last = *checkpoints.last().unwrap();
    if last > n {
        return Err(Error::domain(format!(
            "checkpoint {last} exceeds path length {n}"
        )));
    }
    Ok(())
}

/// Exact U-statistics of the first `checkpoints[j]` points.
///
/// Tuples are visited grouped by their largest index, so adding point `j`
/// costs one pass over the `(m-1)`-subsets of the points before it and the
/// whole series costs `binom(max, m)` kernel evaluations.
pub fn prefix_u_statistics(
    path: &SamplePath,
    k: &Kernel,
    checkpoints: &[usize],
) -> Result<PrefixSeries> {
    check_order(path, k)?;
    let m = k.order();
    check_checkpoints(checkpoints, m, path.len())?;
    if let Some(factors) = k.product_factors() {
        return Ok(product_prefix(path, factors, checkpoints));
    }

    let pts = path.points();
    let eval = k.evaluator();
    let mut acc = KahanSum::new();
    let mut args: Vec<&Point> = vec![&pts[0]; m];
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let end = *checkpoints.last().unwrap();
    for j in (m - 1)..end {
        args[m - 1] = &pts[j];
        for_each_subset(j, m - 1, |idx| {
            for (slot, &i) in idx.iter().enumerate() {
                args[slot] = &pts[i];
            }
            acc.add(eval(&args));
        });
        while next < checkpoints.len() && checkpoints[next] == j + 1 {
            values.push(acc.value() / binom((j + 1) as u64, m as u64));
            next += 1;
        }
    }
    Ok(PrefixSeries {
        checkpoints: checkpoints.to_vec(),
        values,
    })
}

/// Prefix series for `h = prod_l f_l(x_l)`. `s[l]` holds the sum over
/// increasing `l`-tuples of the first `j` points of `prod_{t<l} f_t`, and
/// point `j + 1` extends every such tuple by one slot.
fn product_prefix(path: &SamplePath, factors: &[Factor], checkpoints: &[usize]) -> PrefixSeries {
    let m = factors.len();
    let mut s: Vec<KahanSum> = (0..=m).map(|_| KahanSum::new()).collect();
    s[0].add(1.0);
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let end = *checkpoints.last().unwrap();
    for (j, x) in path.points()[..end].iter().enumerate() {
        for l in (1..=m.min(j + 1)).rev() {
            let prev = s[l - 1].value();
            if prev != 0.0 {
                s[l].add(prev * factors[l - 1](x));
            }
        }
        while next < checkpoints.len() && checkpoints[next] == j + 1 {
            values.push(s[m].value() / binom((j + 1) as u64, m as u64));
            next += 1;
        }
    }
    PrefixSeries {
        checkpoints: checkpoints.to_vec(),
        values,
    }
}

/// `binom(n, m)^{-1} * sum over Inc^m_n of h(X_{i_1}, ..., X_{i_m})`.
pub fn u_statistic(path: &SamplePath, k: &Kernel) -> Result<f64> {
    let series = prefix_u_statistics(path, k, &[path.len()])?;
    Ok(series.values[0])
}

/// Visits every tuple of `[0, n)^m` (odometer order) with its points bound in `args`.
fn for_each_grid_tuple<F: FnMut(&[usize], &[&Point])>(pts: &[Point], m: usize, mut f: F) {
    let n = pts.len();
    let mut idx = vec![0usize; m];
    let mut args: Vec<&Point> = vec![&pts[0]; m];
    loop {
        for (slot, &i) in idx.iter().enumerate() {
            args[slot] = &pts[i];
        }
        f(&idx, &args);
        let mut pos = m;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn full_grid_sum(path: &SamplePath, k: &Kernel, diagonal_only: bool) -> f64 {
    let eval = k.evaluator();
    let mut acc = KahanSum::new();
    for_each_grid_tuple(path.points(), k.order(), |idx, args| {
        if !diagonal_only || has_repeat(idx) {
            acc.add(eval(args));
        }
    });
    acc.value()
}

#[inline]
fn has_repeat(idx: &[usize]) -> bool {
    (1..idx.len()).any(|a| idx[..a].contains(&idx[a]))
}

/// `n^{-m} * sum over [1, n]^m of h(X_{i_1}, ..., X_{i_m})`.
pub fn v_statistic(path: &SamplePath, k: &Kernel) -> Result<f64> {
    k.check_path(path)?;
    let n = path.len() as f64;
    Ok(full_grid_sum(path, k, false) / n.powi(k.order() as i32))
}

/// Unnormalized sum of `h` over grid tuples with at least one repeated index.
pub fn diagonal_sum(path: &SamplePath, k: &Kernel) -> Result<f64> {
    k.check_path(path)?;
    Ok(full_grid_sum(path, k, true))
}

/// `(n^m V - D) / (m! binom(n, m))`, equal to the U-statistic for symmetric kernels.
pub fn u_from_v_decomposition(path: &SamplePath, k: &Kernel) -> Result<f64> {
    if !k.is_symmetric() {
        return Err(Error::domain(format!(
            "kernel {} is not symmetric; the V-statistic decomposition needs symmetry",
            k.name()
        )));
    }
    check_order(path, k)?;
    let m = k.order();
    let n = path.len();
    let grid = (n as f64).powi(m as i32) * v_statistic(path, k)?;
    let diag = diagonal_sum(path, k)?;
    let m_factorial: f64 = (1..=m).map(|i| i as f64).product();
    Ok((grid - diag) / (m_factorial * binom(n as u64, m as u64)))
}

/// Average of `h` over `b` tuples drawn uniformly, with replacement, from
/// `Inc^m_n`. Kernels with a sampling evaluator are evaluated through it on a
/// uniformly permuted copy of each tuple.
pub fn incomplete_u_statistic(path: &SamplePath, k: &Kernel, b: usize, rng_seed: u64) -> Result<f64> {
    check_order(path, k)?;
    if b == 0 {
        return Err(Error::domain("tuple budget B must be at least 1"));
    }
    let n = path.len();
    let m = k.order();
    let pts = path.points();
    let mut rng = stream(rng_seed, Stream::Tuples);
    let mut acc = KahanSum::new();
    let mut args: Vec<&Point> = Vec::with_capacity(m);
    match k.sampling_evaluator() {
        Some(g) => {
            for _ in 0..b {
                let mut idx = index::sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                idx.shuffle(&mut rng);
                args.clear();
                args.extend(idx.iter().map(|&i| &pts[i]));
                acc.add(g(&args));
            }
        }
        None => {
            let eval = k.evaluator();
            for _ in 0..b {
                let mut idx = index::sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                args.clear();
                args.extend(idx.iter().map(|&i| &pts[i]));
                acc.add(eval(&args));
            }
        }
    }
    Ok(acc.value() / b as f64)
}

/// Incomplete U-statistics at each checkpoint, each with its own derived seed.
pub fn prefix_incomplete_u_statistics(
    path: &SamplePath,
    k: &Kernel,
    checkpoints: &[usize],
    b: usize,
    rng_seed: u64,
) -> Result<PrefixSeries> {
    check_order(path, k)?;
    check_checkpoints(checkpoints, k.order(), path.len())?;
    let values = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let prefix = path.prefix(c)?;
            incomplete_u_statistic(&prefix, k, b, derive_seed(rng_seed, j as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PrefixSeries {
        checkpoints: checkpoints.to_vec(),
        values,
    })
}

/// Truncation level `R > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain(format!(
                "truncation level must be positive and finite, got {r}"
            )));
        }
        Ok(TruncationLevel(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Clamp to `[-R, R]`: `-R` below `-R`, identity on `[-R, R)`, `R` from `R` up.
#[inline]
pub fn truncate_value(t: f64, r: TruncationLevel) -> f64 {
    let r = r.0;
    if t < -r {
        -r
    } else if t < r {
        t
    } else {
        r
    }
}

/// `h_R = phi_R o h`. Keeps order, symmetry and input shape. The limit hook
/// survives only when the kernel is already bounded by `R`.
pub fn truncate_kernel(k: &Kernel, r: TruncationLevel) -> Kernel {
    let identity = k.bound().is_some_and(|b| b <= r.value());
    let inner = k.evaluator().clone();
    let mut out = Kernel::new(
        format!("{}|R={}", k.name(), r.value()),
        k.order(),
        k.is_symmetric(),
        move |args| truncate_value(inner(args), r),
    )
    .with_input(k.input());
    if identity {
        out = out
            .with_limit_hook(k.limit_hook().clone())
            .with_bound(k.bound().unwrap());
        if let Some(g) = k.sampling_evaluator().cloned() {
            out = out.with_sampling_evaluator(move |args| g(args));
        }
        if let Some(f) = k.product_factors() {
            out = out.with_product_factors(f.to_vec());
        }
    } else {
        out = out.with_bound(r.value());
    }
    out
}

/// `binom(n, m+1)^{-1} * sum_{j=m+1}^{n} binom(j-1, m) f_j`, with
/// `values = [f_{m+1}, ..., f_n]`.
pub fn weighted_average(values: &[f64], m: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("weighted average of an empty sequence"));
    }
    let n = m + values.len();
    let mut acc = KahanSum::new();
    for (offset, &f) in values.iter().enumerate() {
        let j = m + 1 + offset;
        acc.add(binom((j - 1) as u64, m as u64) * f);
    }
    Ok(acc.value() / binom(n as u64, m as u64 + 1))
}

/// `sum_{j=m+1}^{n} binom(j-1, m)` in exact arithmetic.
pub fn weight_total(n: u64, m: u64) -> Option<u128> {
    let mut total: u128 = 0;
    for j in (m + 1)..=n {
        total = total.checked_add(binom_exact(j - 1, m)?)?;
    }
    Some(total)
}

/// `d_{j,R} = (1/j) sum_{i<j} h_R(X_i, X_j)` for 1-based `j` in `2..=n`.
pub fn d_jr(path: &SamplePath, k2: &Kernel, j: usize, r: TruncationLevel) -> Result<f64> {
    if k2.order() != 2 {
        return Err(Error::domain(format!(
            "d_jR needs an order-2 kernel, got order {}",
            k2.order()
        )));
    }
    k2.check_path(path)?;
    if j < 2 || j > path.len() {
        return Err(Error::domain(format!(
            "index j = {j} outside 2..={}",
            path.len()
        )));
    }
    let pts = path.points();
    let acc: KahanSum = pts[..j - 1]
        .iter()
        .map(|x| truncate_value(k2.eval(&[x, &pts[j - 1]]), r))
        .collect();
    Ok(acc.value() / j as f64)
}

/// `binom(n, 2)^{-1} * sum_{j=2}^{n} j d_{j,R}`, which equals the U-statistic
/// of the truncated kernel.
pub fn reconstruct_from_d_jr(path: &SamplePath, k2: &Kernel, r: TruncationLevel) -> Result<f64> {
    let n = path.len();
    if n < 2 {
        return Err(Error::domain("reconstruction needs at least two points"));
    }
    let mut acc = KahanSum::new();
    for j in 2..=n {
        acc.add(j as f64 * d_jr(path, k2, j, r)?);
    }
    Ok(acc.value() / binom(n as u64, 2))
}
