//! L2-regularized logistic regression fitted with L-BFGS.
//!
//! Both the reference classifier (sparse bag-of-words counts) and the belief
//! model (dense embeddings) minimize
//!
//! ```text
//! f(w, b) = Σᵢ [log(1 + exp(zᵢ)) − yᵢ zᵢ] + (λ / 2) ‖w‖²,   zᵢ = w·xᵢ + b
//! ```
//!
//! which is scikit-learn's objective with `C = 1 / λ`. The bias is not
//! penalized. Iteration stops once ‖∇f‖₂ ≤ `tolerance`.

use std::collections::VecDeque;

/// Sparse feature row: `(index, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub history: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 20_000,
            history: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

pub struct LogisticProblem<'a> {
    pub rows: &'a [SparseRow],
    pub targets: &'a [f64],
    pub n_features: usize,
    pub reg_strength: f64,
}

impl LogisticProblem<'_> {
    /// Objective value; gradient written into `grad` (last slot is the bias).
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.n_features;
        let (w, b) = (&x[..d], x[d]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (row, &y) in self.rows.iter().zip(self.targets) {
            let z = b + row.iter().map(|&(j, v)| w[j] * v).sum::<f64>();
            loss += softplus(z) - y * z;
            let r = sigmoid(z) - y;
            for &(j, v) in row {
                grad[j] += r * v;
            }
            grad[d] += r;
        }
        let mut penalty = 0.0;
        for j in 0..d {
            penalty += w[j] * w[j];
            grad[j] += self.reg_strength * w[j];
        }
        loss + 0.5 * self.reg_strength * penalty
    }

    pub fn solve(&self, options: SolverOptions) -> LogisticFit {
        let dim = self.n_features + 1;
        let mut x = vec![0.0; dim];
        let mut g = vec![0.0; dim];
        let mut f = self.eval(&x, &mut g);
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.history);
        let mut x_new = vec![0.0; dim];
        let mut g_new = vec![0.0; dim];
        let mut iterations = 0;
        let mut gnorm = norm(&g);

        while gnorm > options.tolerance && iterations < options.max_iterations {
            iterations += 1;
            let mut dir = two_loop(&g, &history);
            let mut slope = dot(&g, &dir);
            if slope >= 0.0 {
                history.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = -gnorm * gnorm;
            }
            // First steepest-descent step is scaled so it does not overshoot wildly.
            let mut step = if history.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..dim {
                    x_new[i] = x[i] + step * dir[i];
                }
                let f_new = self.eval(&x_new, &mut g_new);
                let armijo = f_new <= f + 1e-4 * step * slope;
                // Near the optimum f is flat to rounding; accept any step that
                // does not increase f and shrinks the gradient.
                let flat = f_new <= f + 1e-12 * f.abs().max(1.0) && norm(&g_new) < gnorm;
                if f_new.is_finite() && (armijo || flat) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                if history.is_empty() {
                    break;
                }
                history.clear();
                continue;
            }
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-16 {
                if history.len() == options.history {
                    history.pop_front();
                }
                history.push_back((s, y, 1.0 / sy));
            }
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut g, &mut g_new);
            f = self.eval(&x, &mut g);
            gnorm = norm(&g);
        }

        let bias = x[self.n_features];
        x.truncate(self.n_features);
        LogisticFit {
            weights: x,
            bias,
            iterations,
            grad_norm: gnorm,
            converged: gnorm <= options.tolerance,
        }
    }
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
