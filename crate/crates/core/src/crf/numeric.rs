//! Chain-structured inference in log space plus the Adam optimizer.
//!
//! Everything here works on plain score matrices: `emissions[t][k]` and a
//! [`TransitionScores`] block. Structurally forbidden transitions are
//! represented by a large negative sentinel in the scores themselves (see
//! [`super::STRUCTURAL_NEG`]), so the algorithms need no masking logic:
//! forbidden paths carry weight exp(-1e9) which underflows to exactly zero.

use crate::decoder::TransitionScores;

/// log(sum(exp(xs))) with max-shifting; empty input or all -inf gives -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Forward recursion. Returns `alpha` (alpha[t][k] = log total weight of
/// prefixes ending at tag k, start score and emissions included) and the
/// log-partition `log Z`.
pub fn forward(emissions: &[Vec<f64>], scores: &TransitionScores) -> (Vec<Vec<f64>>, f64) {
    let n = emissions.len();
    let k = scores.k;
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let mut alpha = vec![vec![0.0; k]; n];
    for j in 0..k {
        alpha[0][j] = scores.start[j] + emissions[0][j];
    }
    let mut acc = vec![0.0; k];
    for t in 1..n {
        for j in 0..k {
            for (q, a) in acc.iter_mut().enumerate() {
                *a = alpha[t - 1][q] + scores.trans[q * k + j];
            }
            alpha[t][j] = logsumexp(&acc) + emissions[t][j];
        }
    }
    for (j, a) in acc.iter_mut().enumerate() {
        *a = alpha[n - 1][j] + scores.end[j];
    }
    (alpha, logsumexp(&acc))
}

/// Backward recursion: beta[t][k] = log total weight of suffixes that
/// continue after tag k at t (emissions at t excluded, end score included).
pub fn backward(emissions: &[Vec<f64>], scores: &TransitionScores) -> Vec<Vec<f64>> {
    let n = emissions.len();
    let k = scores.k;
    if n == 0 {
        return Vec::new();
    }
    let mut beta = vec![vec![0.0; k]; n];
    beta[n - 1].copy_from_slice(&scores.end);
    let mut acc = vec![0.0; k];
    for t in (0..n - 1).rev() {
        for j in 0..k {
            for (q, a) in acc.iter_mut().enumerate() {
                *a = scores.trans[j * k + q] + emissions[t + 1][q] + beta[t + 1][q];
            }
            beta[t][j] = logsumexp(&acc);
        }
    }
    beta
}

/// State posteriors gamma[t][k] = p(y_t = k | x).
pub fn state_posteriors(alpha: &[Vec<f64>], beta: &[Vec<f64>], log_z: f64) -> Vec<Vec<f64>> {
    alpha
        .iter()
        .zip(beta)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y - log_z).exp()).collect())
        .collect()
}

/// Total score of a specific path under raw matrices (no masks): start +
/// emissions + transitions + end. Empty path scores 0.
pub fn sequence_score(emissions: &[Vec<f64>], scores: &TransitionScores, path: &[usize]) -> f64 {
    if path.is_empty() {
        return 0.0;
    }
    let k = scores.k;
    let mut sc = scores.start[path[0]] + emissions[0][path[0]];
    for t in 1..path.len() {
        sc = sc + scores.trans[path[t - 1] * k + path[t]] + emissions[t][path[t]];
    }
    sc + scores.end[*path.last().expect("non-empty")]
}

/// Scale `grad` in place so its global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Adam with bias correction (betas 0.9/0.999, eps 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; dim], v: vec![0.0; dim] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::constraints::{LatticeMasks, TagTransitions};
    use crate::decoder::{self, ScoreLattice};

    #[test]
    fn logsumexp_basics() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((logsumexp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-12);
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(logsumexp(&[3.0]), 3.0);
    }

    #[test]
    fn single_token_uniform_partitions_to_ln2() {
        let scores = TransitionScores::zeros(2);
        let (_, log_z) = forward(&[vec![0.0, 0.0]], &scores);
        assert!((log_z - 2f64.ln()).abs() < 1e-12);
    }

    fn enumerate_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in &out {
                for j in 0..k {
                    let mut q = p.clone();
                    q.push(j);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn log_partition_matches_enumeration() {
        // Deterministic pseudo-random small lattices; oracle sums over all
        // paths explicitly.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for &(n, k) in &[(1usize, 3usize), (2, 2), (3, 3), (4, 2)] {
            let emissions: Vec<Vec<f64>> =
                (0..n).map(|_| (0..k).map(|_| next()).collect()).collect();
            let scores = TransitionScores {
                k,
                trans: (0..k * k).map(|_| next()).collect(),
                start: (0..k).map(|_| next()).collect(),
                end: (0..k).map(|_| next()).collect(),
            };
            let (_, log_z) = forward(&emissions, &scores);
            let all: Vec<f64> = enumerate_paths(n, k)
                .iter()
                .map(|p| sequence_score(&emissions, &scores, p))
                .collect();
            let oracle = logsumexp(&all);
            assert!((log_z - oracle).abs() < 1e-9, "{log_z} vs {oracle}");

            // log Z must dominate the best single path.
            let l = ScoreLattice {
                emissions: emissions.clone(),
                scores: Arc::new(scores.clone()),
                masks: LatticeMasks::unconstrained(n, TagTransitions::allowing_all(k)),
            };
            let (_, best) = decoder::viterbi(&l).unwrap();
            assert!(log_z >= best - 1e-12);
        }
    }

    #[test]
    fn sentinel_blocked_paths_underflow_to_zero_weight() {
        // Forbid 0->0 and 1->1 with the sentinel; partition over 2 tokens
        // must equal the feasible two paths only.
        let neg = -1e9;
        let scores = TransitionScores {
            k: 2,
            trans: vec![neg, 0.5, -0.25, neg],
            start: vec![0.0, 0.0],
            end: vec![0.0, 0.0],
        };
        let em = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let (_, log_z) = forward(&em, &scores);
        let oracle = logsumexp(&[0.5, -0.25]);
        assert!((log_z - oracle).abs() < 1e-12);
    }

    #[test]
    fn path_probabilities_sum_to_one() {
        let scores = TransitionScores {
            k: 3,
            trans: vec![0.1, -0.4, 0.2, -1e9, 0.3, 0.0, 0.7, -0.2, -1e9],
            start: vec![0.2, -0.1, 0.0],
            end: vec![0.0, 0.4, -1e9],
        };
        let emissions: Vec<Vec<f64>> = vec![
            vec![0.3, -0.2, 0.1],
            vec![-0.5, 0.2, 0.6],
            vec![0.0, 0.1, -0.3],
            vec![0.4, -0.6, 0.2],
        ];
        let (_, log_z) = forward(&emissions, &scores);
        let mut total = 0.0;
        for p in enumerate_paths(4, 3) {
            total += (sequence_score(&emissions, &scores, &p) - log_z).exp();
        }
        assert!((total - 1.0).abs() < 1e-8, "sum {total}");
    }

    #[test]
    fn state_posteriors_normalize() {
        let scores = TransitionScores {
            k: 2,
            trans: vec![0.3, -0.1, 0.2, 0.5],
            start: vec![0.1, -0.3],
            end: vec![0.0, 0.2],
        };
        let emissions = vec![vec![0.5, -0.5], vec![0.2, 0.4], vec![-0.1, 0.3]];
        let (alpha, log_z) = forward(&emissions, &scores);
        let beta = backward(&emissions, &scores);
        let gamma = state_posteriors(&alpha, &beta, log_z);
        for row in &gamma {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "row sums to {s}");
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(x) = (x0 - 3)^2 + 2 (x1 + 1)^2, minimizer (3, -1).
        let mut x = vec![0.0, 0.0];
        let mut opt = Adam::new(0.05, 2);
        let mut steps = 0;
        for _ in 0..10_000 {
            let grad = vec![2.0 * (x[0] - 3.0), 4.0 * (x[1] + 1.0)];
            opt.step(&mut x, &grad);
            steps += 1;
            if (x[0] - 3.0).abs() < 1e-6 && (x[1] + 1.0).abs() < 1e-6 {
                break;
            }
        }
        assert!(
            (x[0] - 3.0).abs() < 1e-6 && (x[1] + 1.0).abs() < 1e-6,
            "not converged after {steps} steps: {x:?}"
        );
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![3.0, 4.0]; // norm 5
        let before = clip_grad_norm(&mut g, 1.0);
        assert_eq!(before, 5.0);
        let after = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((after - 1.0).abs() < 1e-12);
        let mut h = vec![0.3, 0.4];
        clip_grad_norm(&mut h, 1.0);
        assert_eq!(h, vec![0.3, 0.4]);
    }
}
