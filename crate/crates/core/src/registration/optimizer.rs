//! Box-constrained limited-memory quasi-Newton minimizer.
//!
//! Search directions come from the L-BFGS two-loop recursion restricted to
//! the free variables (those not held at a bound by the gradient). Steps are
//! projected onto the box and accepted only under an Armijo decrease along
//! the projected path, so the objective never increases.

use std::collections::VecDeque;

pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64], fx: f64) -> Vec<f64>;
}

#[derive(Clone, Debug)]
pub struct LbfgsbConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the infinity norm of the projected gradient drops below this.
    pub grad_tol: f64,
    /// Stop when `|f_k - f_{k+1}| / max(|f_k|, 1e-300)` drops below this.
    pub rel_tol: f64,
    pub max_backtracks: usize,
    pub armijo: f64,
}

impl Default for LbfgsbConfig {
    fn default() -> Self {
        LbfgsbConfig {
            memory: 6,
            max_iterations: 200,
            grad_tol: 1e-6,
            rel_tol: 1e-9,
            max_backtracks: 30,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Variables pinned at a bound with the gradient pointing outward.
fn pinned(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<bool> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0))
        .collect()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| ((xi - gi).clamp(lo, hi) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0` (projected).
pub fn minimize<F: Objective>(
    f: &mut F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &LbfgsbConfig,
) -> Minimum {
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n);
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = f.value(&x);
    let initial_value = fx;
    let mut g = f.gradient(&x, fx);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        if projected_gradient_norm(&x, &g, lower, upper) < cfg.grad_tol {
            converged = true;
            break;
        }
        let fixed = pinned(&x, &g, lower, upper);
        let mask = |v: &mut [f64]| {
            for (vi, &p) in v.iter_mut().zip(&fixed) {
                if p {
                    *vi = 0.0;
                }
            }
        };

        // two-loop recursion on the free subspace
        let mut q = g.clone();
        mask(&mut q);
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
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        mask(&mut d);
        if dot(&g, &d) >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            mask(&mut d);
        }

        let mut step = if history.is_empty() {
            let norm = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if norm > 0.0 { (1.0 / norm).min(1.0) } else { 1.0 }
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let delta: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &delta);
            if slope >= 0.0 {
                step *= 0.5;
                continue;
            }
            let ft = f.value(&trial);
            if ft <= fx + cfg.armijo * slope {
                accepted = Some((trial, ft, delta));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;

        let Some((x_new, f_new, s)) = accepted else {
            if history.is_empty() {
                // no descent possible even along the projected gradient
                converged = true;
                break;
            }
            history.clear();
            continue;
        };
        let g_new = f.gradient(&x_new, f_new);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - f_new).abs() / fx.abs().max(1e-300);
        x = x_new;
        fx = f_new;
        g = g_new;
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Minimum { x, value: fx, initial_value, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;
    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&mut self, x: &[f64], _: f64) -> Vec<f64> {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        }
    }

    struct Quadratic(Vec<f64>);
    impl Objective for Quadratic {
        fn value(&mut self, x: &[f64]) -> f64 {
            x.iter().zip(&self.0).map(|(a, b)| (a - b).powi(2)).sum()
        }
        fn gradient(&mut self, x: &[f64], _: f64) -> Vec<f64> {
            x.iter().zip(&self.0).map(|(a, b)| 2.0 * (a - b)).collect()
        }
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let cfg = LbfgsbConfig { max_iterations: 500, rel_tol: 0.0, grad_tol: 1e-8, ..Default::default() };
        let m = minimize(&mut Rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &cfg);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
        assert!(m.converged);
    }

    #[test]
    fn active_bound_is_respected() {
        // optimum (1,1) outside the box x0 <= 0.5: solution is x0 = 0.5, x1 = 0.25
        let m = minimize(&mut Rosenbrock, &[-1.0, 0.0], &[-2.0, -2.0], &[0.5, 2.0], &LbfgsbConfig {
            max_iterations: 500,
            rel_tol: 0.0,
            grad_tol: 1e-9,
            ..Default::default()
        });
        assert_eq!(m.x[0], 0.5);
        assert!((m.x[1] - 0.25).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn quadratic_clamped_corner() {
        let mut q = Quadratic(vec![3.0, -3.0, 0.2]);
        let m = minimize(&mut q, &[0.0; 3], &[-1.0; 3], &[1.0; 3], &LbfgsbConfig::default());
        assert_eq!(&m.x[..2], &[1.0, -1.0]);
        assert!((m.x[2] - 0.2).abs() < 1e-8);
        assert!(m.value <= m.initial_value);
    }

    #[test]
    fn start_outside_box_is_projected() {
        let mut q = Quadratic(vec![0.0]);
        let m = minimize(&mut q, &[10.0], &[-1.0], &[1.0], &LbfgsbConfig::default());
        assert!(m.x[0].abs() < 1e-8);
        assert_eq!(m.initial_value, 1.0);
    }
}
