//! Minimization of a smooth convex function over the probability simplex
//! by spectral projected gradient with a non-monotone line search.

/// Stationarity tolerance on the projected-gradient step, sup norm.
pub const STATIONARITY_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 10_000;

const ARMIJO: f64 = 1e-4;
const MEMORY: usize = 10;
const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub weights: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Sup norm of `P(w - grad) - w` at the returned point.
    pub stationarity: f64,
}

/// Euclidean projection onto `{w : w >= 0, sum w = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // renormalize away rounding drift
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn projected_step(w: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    let trial: Vec<f64> = w.iter().zip(g).map(|(a, b)| a - alpha * b).collect();
    let p = project_simplex(&trial);
    p.iter().zip(w).map(|(a, b)| a - b).collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `value` over the simplex of dimension `k`, starting from the
/// barycenter. `gradient` writes the gradient at its first argument into
/// its second.
pub fn minimize_on_simplex<F, G>(k: usize, value: F, gradient: G) -> SimplexSolution
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    assert!(k > 0, "empty simplex");
    let mut w = vec![1.0 / k as f64; k];
    let mut g = vec![0.0; k];
    let mut f = value(&w);
    gradient(&w, &mut g);
    if k == 1 {
        return SimplexSolution { weights: w, value: f, iterations: 0, stationarity: 0.0 };
    }
    let mut history = vec![f];
    let mut alpha = (1.0 / sup_norm(&projected_step(&w, &g, 1.0)).max(STEP_MIN)).clamp(STEP_MIN, STEP_MAX);
    let mut iterations = 0;
    let mut g_new = vec![0.0; k];
    let mut stationarity = sup_norm(&projected_step(&w, &g, 1.0));

    while stationarity >= STATIONARITY_TOL && iterations < MAX_ITER {
        iterations += 1;
        let d = projected_step(&w, &g, alpha);
        let slope = dot(&g, &d);
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let (w_new, f_new) = loop {
            let cand: Vec<f64> = w.iter().zip(&d).map(|(a, b)| (a + lambda * b).max(0.0)).collect();
            let fc = value(&cand);
            if fc <= reference + ARMIJO * lambda * slope || lambda < 1e-20 {
                break (cand, fc);
            }
            lambda *= 0.5;
        };
        if f_new > f && lambda < 1e-20 {
            // no descent possible at machine precision
            break;
        }
        gradient(&w_new, &mut g_new);
        let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy <= 0.0 { STEP_MAX } else { (dot(&s, &s) / sy).clamp(STEP_MIN, STEP_MAX) };
        w = w_new;
        f = f_new;
        std::mem::swap(&mut g, &mut g_new);
        history.push(f);
        if history.len() > MEMORY {
            history.remove(0);
        }
        stationarity = sup_norm(&projected_step(&w, &g, 1.0));
    }
    SimplexSolution { weights: w, value: f, iterations, stationarity }
}
