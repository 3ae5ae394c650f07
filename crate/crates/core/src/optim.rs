//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub max_iterations: usize,
    /// Stop when the largest gradient component is at most this.
    pub gradient_tolerance: f64,
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step shrink factor.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            max_iterations: 5000,
            gradient_tolerance: 1e-9,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Infinity norm of the final gradient.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
pub fn minimize(
    mut f: impl FnMut(&[f64], &mut [f64]) -> Result<f64>,
    x0: Vec<f64>,
    cfg: &LbfgsConfig,
) -> Result<LbfgsOutcome> {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= cfg.gradient_tolerance;
    while !converged && iterations < cfg.max_iterations {
        // two-loop recursion
        d.copy_from_slice(&g);
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = dot(&g, &d);
        }
        let mut step = if mem.is_empty() { (1.0 / dot(&g, &g).sqrt()).min(1.0) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..cfg.max_backtracks {
            for i in 0..n {
                xt[i] = x[i] + step * d[i];
            }
            let ft = f(&xt, &mut gt)?;
            if ft <= fx + cfg.armijo * step * slope {
                let mut s = vec![0.0; n];
                let mut y = vec![0.0; n];
                for i in 0..n {
                    s[i] = xt[i] - x[i];
                    y[i] = gt[i] - g[i];
                }
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                    if mem.len() == cfg.memory {
                        mem.pop_front();
                    }
                    mem.push_back((s, y, 1.0 / sy));
                }
                std::mem::swap(&mut x, &mut xt);
                std::mem::swap(&mut g, &mut gt);
                fx = ft;
                accepted = true;
                break;
            }
            step *= cfg.backtrack;
        }
        iterations += 1;
        if !accepted {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        }
        converged = inf_norm(&g) <= cfg.gradient_tolerance;
    }
    Ok(LbfgsOutcome { grad_norm: inf_norm(&g), x, value: fx, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> Result<f64> {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(rosenbrock, vec![-1.2, 1.0], &LbfgsConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadratic_in_many_variables() {
        let n = 50;
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..n {
                let w = 1.0 + i as f64;
                v += 0.5 * w * (x[i] - 1.0).powi(2);
                g[i] = w * (x[i] - 1.0);
            }
            Ok(v)
        };
        let out = minimize(f, vec![0.0; n], &LbfgsConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.value < 1e-16);
    }

    #[test]
    fn empty_problem_returns_immediately() {
        let out = minimize(|_, _| Ok(3.0), vec![], &LbfgsConfig::default()).unwrap();
        assert_eq!(out.value, 3.0);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn deterministic() {
        let a = minimize(rosenbrock, vec![0.3, -0.7], &LbfgsConfig::default()).unwrap();
        let b = minimize(rosenbrock, vec![0.3, -0.7], &LbfgsConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
