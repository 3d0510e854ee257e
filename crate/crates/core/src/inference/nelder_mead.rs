//! Derivative-free simplex minimisation.

#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Evaluations allowed per run.
    pub max_evals: usize,
    /// Converged once the simplex values span less than this.
    pub tol: f64,
    /// Fresh simplices started from the best point after a run stalls.
    pub restarts: usize,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub converged: bool,
    /// Objective value of every evaluation, in order.
    pub trace: Vec<f64>,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let mut trace = Vec::new();
        let mut eval = |x: &[f64], trace: &mut Vec<f64>| {
            let v = f(x);
            let v = if v.is_nan() { f64::INFINITY } else { v };
            trace.push(v);
            v
        };
        let mut best = x0.to_vec();
        let mut best_f = eval(&best, &mut trace);
        for _ in 0..=self.restarts {
            let (x, fx, ok) = self.run(&mut eval, &best, &mut trace);
            if fx <= best_f {
                best = x;
                best_f = fx;
            }
            if ok {
                return Minimum {
                    x: best,
                    fx: best_f,
                    converged: true,
                    trace,
                };
            }
        }
        Minimum {
            x: best,
            fx: best_f,
            converged: false,
            trace,
        }
    }

    fn run<E: FnMut(&[f64], &mut Vec<f64>) -> f64>(
        &self,
        eval: &mut E,
        x0: &[f64],
        trace: &mut Vec<f64>,
    ) -> (Vec<f64>, f64, bool) {
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0, trace)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += self.step;
            let fx = eval(&x, trace);
            simplex.push((x, fx));
        }
        let mut used = n + 1;
        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        };
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            if spread.is_finite() && spread < self.tol {
                return (simplex[0].0.clone(), simplex[0].1, true);
            }
            if used >= self.max_evals {
                return (simplex[0].0.clone(), simplex[0].1, false);
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let xr = lerp(&centroid, &worst.0, -1.0);
            let fr = eval(&xr, trace);
            used += 1;
            if fr < simplex[0].1 {
                let xe = lerp(&centroid, &worst.0, -2.0);
                let fe = eval(&xe, trace);
                used += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let xc = lerp(&centroid, &xr, 0.5);
                    let fc = eval(&xc, trace);
                    (xc, fc)
                } else {
                    let xc = lerp(&centroid, &worst.0, 0.5);
                    let fc = eval(&xc, trace);
                    (xc, fc)
                };
                used += 1;
                if fc < fr.min(worst.1) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        v.0 = lerp(&x_best, &v.0, 0.5);
                        v.1 = eval(&v.0, trace);
                        used += 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead {
            max_evals: 5000,
            tol: 1e-12,
            restarts: 3,
            step: 0.5,
        };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            m.x
        );
        assert!(m.trace.iter().all(|&v| v >= m.fx));
    }

    #[test]
    fn quadratic_5d() {
        let nm = NelderMead {
            max_evals: 2000,
            tol: 1e-10,
            restarts: 3,
            step: 1.0,
        };
        let c = [1.0, -2.0, 0.5, 3.0, -1.0];
        let m = nm.minimize(
            |x| {
                x.iter()
                    .zip(&c)
                    .enumerate()
                    .map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2))
                    .sum()
            },
            &[0.0; 5],
        );
        assert!(m.converged);
        for (a, b) in m.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn budget_exhaustion_reported() {
        let nm = NelderMead {
            max_evals: 10,
            tol: 1e-30,
            restarts: 1,
            step: 1.0,
        };
        let m = nm.minimize(|x| x[0] * x[0] + x[1] * x[1], &[3.0, 3.0]);
        assert!(!m.converged);
        assert!(m.fx < 18.0);
    }

    #[test]
    fn infinite_regions_avoided() {
        let nm = NelderMead {
            max_evals: 2000,
            tol: 1e-10,
            restarts: 0,
            step: 0.5,
        };
        let m = nm.minimize(
            |x| {
                if x[0] < 0.0 {
                    f64::INFINITY
                } else {
                    (x[0] - 0.3).powi(2)
                }
            },
            &[1.0],
        );
        assert!((m.x[0] - 0.3).abs() < 1e-4);
    }
}
