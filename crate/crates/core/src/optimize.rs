//! Derivative-free local minimization.

/// Result of a Nelder-Mead run.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evaluations: usize,
    /// Stop once the simplex values spread less than this, relative to `1 + |f_best|`.
    pub f_tol: f64,
    /// ... and every vertex is within this of the best one, per coordinate.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evaluations: 4000,
            f_tol: 1e-13,
            x_tol: 1e-13,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start` with an axis-aligned initial simplex of
    /// edge lengths `step`.
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, start: &[f64], step: &[f64]) -> Minimum {
        let n = start.len();
        let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..n {
            let mut v = start.to_vec();
            v[i] += step[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        let mut evaluations = n + 1;

        while evaluations < self.max_evaluations {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol * (1.0 + values[0].abs()) && size <= self.x_tol * (1.0 + simplex[0].iter().fold(0.0_f64, |m, x| m.max(x.abs()))) {
                break;
            }

            let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

            let reflected = along(-1.0);
            let fr = f(&reflected);
            evaluations += 1;
            if fr < values[0] {
                let expanded = along(-2.0);
                let fe = f(&expanded);
                evaluations += 1;
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = f(&c);
                (c, fc)
            };
            evaluations += 1;
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
                continue;
            }
            for i in 1..=n {
                for j in 0..n {
                    simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                }
                values[i] = f(&simplex[i]);
            }
            evaluations += n;
        }

        let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            evaluations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = NelderMead {
            max_evaluations: 20_000,
            ..NelderMead::default()
        }
        .minimize(rosen, &[-1.2, 1.0], &[0.1, 0.1]);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn quadratic_bowl_is_tight() {
        let m = NelderMead::default().minimize(|x| (x[0] - 0.3).powi(2) + 4.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], &[0.5, 0.5]);
        assert!((m.x[0] - 0.3).abs() < 1e-7 && (m.x[1] + 2.0).abs() < 1e-7);
    }
}
