#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ustat::{Kernel, Point, SamplePath};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_path(rng: &mut ChaCha8Rng, n: usize) -> SamplePath {
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    SamplePath::from_scalars(&xs).unwrap()
}

/// `sum_l a_l x_l + b prod_l x_l + c sin(sum_l w_l x_l) + d max_l x_l`;
/// symmetric when the per-slot coefficients are shared.
pub fn random_kernel(rng: &mut ChaCha8Rng, m: usize, symmetric: bool) -> Kernel {
    let slot = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        if symmetric {
            vec![rng.random_range(-2.0..2.0); m]
        } else {
            (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()
        }
    };
    let a = slot(rng);
    let w = slot(rng);
    let (b, c, d) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Kernel::new("random", m, symmetric, move |args: &[&Point]| {
        let x: Vec<f64> = args.iter().map(|p| p.value()).collect();
        let lin: f64 = x.iter().zip(&a).map(|(x, a)| x * a).sum();
        let prod: f64 = x.iter().product();
        let phase: f64 = x.iter().zip(&w).map(|(x, w)| x * w).sum();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lin + b * prod + c * phase.sin() + d * max
    })
}

/// Sum of `f` over strictly increasing index tuples, by nested recursion.
pub fn brute_increasing(n: usize, m: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == m {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, f);
            cur.pop();
        }
    }
    rec(0, n, m, &mut Vec::new(), f);
}

/// Plain average of `h` over increasing tuples, plus the average of `|h|`.
pub fn brute_u(path: &SamplePath, k: &Kernel) -> (f64, f64) {
    let pts = path.points();
    let (mut sum, mut abs, mut count) = (0.0, 0.0, 0usize);
    brute_increasing(path.len(), k.order(), &mut |idx| {
        let args: Vec<&Point> = idx.iter().map(|&i| &pts[i]).collect();
        let v = k.eval(&args);
        sum += v;
        abs += v.abs();
        count += 1;
    });
    (sum / count as f64, abs / count as f64)
}

pub fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
}

pub fn binomial_se(n: usize, p: f64) -> f64 {
    (n as f64 * p * (1.0 - p)).sqrt()
}
