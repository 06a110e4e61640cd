//! Nelder-Mead downhill simplex.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once max f - min f over the simplex falls below this.
    pub tolerance: f64,
    /// Evaluation budget per dimension.
    pub evaluations_per_dim: usize,
    /// Offset added to one coordinate for each initial vertex.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            tolerance: 1e-8,
            evaluations_per_dim: 500,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimise `f` starting from `x0`.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &SimplexOptions) -> SimplexOutcome {
    let n = x0.len();
    let max_evals = opts.evaluations_per_dim.max(1) * n.max(1);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    if n == 0 {
        let value = eval(x0, &mut evals);
        return SimplexOutcome { point: Vec::new(), value, evaluations: evals, converged: true };
    }

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut converged = false;

    loop {
        // stable sort so equal values keep their earlier position
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];
        if (vals[worst] - vals[best]).abs() < opts.tolerance || !vals[worst].is_finite() && !vals[best].is_finite() {
            converged = (vals[worst] - vals[best]).abs() < opts.tolerance;
            break;
        }
        if evals >= max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[worst]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(opts.reflection);
        let fr = eval(&xr, &mut evals);
        if fr < vals[best] {
            let xe = along(opts.reflection * opts.expansion);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < vals[worst] {
            let xc = along(opts.reflection * opts.contraction);
            let fc = eval(&xc, &mut evals);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(-opts.contraction);
            let fc = eval(&xc, &mut evals);
            let ok = fc < vals[worst];
            (xc, fc, ok)
        };
        if accept {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for (x, a) in pts[i].iter_mut().zip(&anchor) {
                *x = a + opts.shrink * (*x - a);
            }
            vals[i] = eval(&pts[i], &mut evals);
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexOutcome { point: pts[best].clone(), value: vals[best], evaluations: evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let out = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &SimplexOptions::default(),
        );
        assert!(out.converged);
        assert!((out.point[0] - 1.0).abs() < 1e-3);
        assert!((out.point[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn rosenbrock_gets_close() {
        let opts = SimplexOptions { evaluations_per_dim: 2000, tolerance: 1e-14, ..Default::default() };
        let out = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &opts,
        );
        assert!(out.value < 1e-8, "value {}", out.value);
    }

    #[test]
    fn respects_evaluation_budget() {
        let opts = SimplexOptions { evaluations_per_dim: 10, tolerance: 0.0, ..Default::default() };
        let out = minimize(|x| x.iter().map(|v| v.sin()).sum(), &[0.3; 4], &opts);
        assert!(!out.converged);
        // one iteration can overshoot by at most n + 2 evaluations
        assert!(out.evaluations <= 40 + 6);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 3.0).cos() + x[1].abs();
        let out = minimize(f, &[0.1, 0.2], &SimplexOptions::default());
        assert!(out.value <= f(&[0.1, 0.2]));
    }
}
