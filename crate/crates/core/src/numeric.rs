//! Compensated summation, binomial coefficients and tolerance helpers.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Exact binomial coefficient, `None` on overflow of `u128`.
pub fn binom_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1)
        let g = gcd(acc, i as u128 + 1);
        let d = (i as u128 + 1) / g;
        acc = (acc / g).checked_mul((n - i) as u128 / d)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Binomial coefficient as a float. Exact integer arithmetic up to n = 200
/// (and beyond while it fits), log-gamma otherwise.
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    match binom_exact(n, k) {
        Some(v) => v as f64,
        None => statrs::function::factorial::ln_binomial(n, k).exp(),
    }
}

/// `|a - b| <= tol * max(|a|, |b|, scale)`.
pub fn rel_close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binom_exact(3, 2), Some(3));
        assert_eq!(binom_exact(10, 3), Some(120));
        assert_eq!(binom_exact(4, 5), Some(0));
        assert_eq!(binom_exact(0, 0), Some(1));
        assert_eq!(binom(200, 6), 82_408_626_300.0);
    }

    #[test]
    fn pascal_rule_holds_exactly() {
        for n in 1..=128u64 {
            for k in 1..n {
                let lhs = binom_exact(n, k).unwrap();
                let rhs = binom_exact(n - 1, k - 1).unwrap() + binom_exact(n - 1, k).unwrap();
                assert_eq!(lhs, rhs, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn log_space_fallback_is_close() {
        // binom(400, 200) overflows u128
        assert!(binom_exact(400, 200).is_none());
        let approx = binom(400, 200);
        let ln = statrs::function::factorial::ln_binomial(400, 200);
        assert!((approx.ln() - ln).abs() < 1e-9);
    }

    #[test]
    fn kahan_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(kahan_sum(xs), 2.0);
    }
}
