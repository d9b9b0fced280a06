//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Dense multinomial logistic regression fitted by plain full-batch
/// gradient descent on mean log loss + l2/2 * ||W||^2 (bias unpenalized).
pub struct DenseLogReg {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLogReg {
    pub fn fit(
        xs: &[Vec<f64>],
        ys: &[usize],
        classes: usize,
        l2: f64,
        lr: f64,
        iters: usize,
    ) -> Self {
        let d = xs[0].len();
        let n = xs.len() as f64;
        let mut w = vec![vec![0.0; d]; classes];
        let mut b = vec![0.0; classes];
        for _ in 0..iters {
            let mut gw = vec![vec![0.0; d]; classes];
            let mut gb = vec![0.0; classes];
            for (x, &y) in xs.iter().zip(ys) {
                let p = Self::probs(&w, &b, x);
                for c in 0..classes {
                    let r = p[c] - if c == y { 1.0 } else { 0.0 };
                    gb[c] += r / n;
                    for k in 0..d {
                        gw[c][k] += r * x[k] / n;
                    }
                }
            }
            for c in 0..classes {
                b[c] -= lr * gb[c];
                for k in 0..d {
                    w[c][k] -= lr * (gw[c][k] + l2 * w[c][k]);
                }
            }
        }
        DenseLogReg {
            weights: w,
            bias: b,
        }
    }

    fn probs(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bc)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bc)
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let p = Self::probs(&self.weights, &self.bias, x);
        let mut best = 0;
        for c in 1..p.len() {
            if p[c] > p[best] {
                best = c;
            }
        }
        best
    }
}

/// Two 2-D Gaussian blobs of `n/2` points each, centred at `(-sep, -sep)`
/// (class 0) and `(sep, sep)` (class 1). Box-Muller on a ChaCha20 stream.
pub fn gaussian_blobs(n: usize, sep: f64, sd: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut normal = move || {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let y = usize::from(i >= n / 2);
        let c = if y == 1 { sep } else { -sep };
        xs.push(vec![c + sd * normal(), c + sd * normal()]);
        ys.push(y);
    }
    (xs, ys)
}

/// Pairwise ranking agreement by brute force: every ordered pair (i, j),
/// i != j, is compared through the sign of the rate differences, and the
/// count is halved since each unordered pair is seen twice.
pub fn brute_force_pairwise(human: &[f64], metric: &[f64]) -> f64 {
    let n = human.len();
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            total += 1;
            if sign(human[i] - human[j]) == sign(metric[i] - metric[j]) {
                agree += 1;
            }
        }
    }
    (agree / 2) as f64 / (total / 2) as f64
}
