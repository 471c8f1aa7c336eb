//! Small derivative-free and least-squares optimizers.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Box-constrained Nelder–Mead settings.
#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the simplex diameter falls below `x_tol` in every coordinate
    /// (relative to the box width).
    pub x_tol: f64,
    /// Initial simplex edge, as a fraction of the box width.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            x_tol: 1e-10,
            initial_step: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    /// Minimize `f` over the box `[lo, hi]` starting from `x0`. Trial points
    /// are clamped to the box.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], lo: &[f64], hi: &[f64]) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let n = x0.len();
        let width: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l).max(f64::MIN_POSITIVE)).collect();
        let clamp = |x: &mut [f64]| {
            for i in 0..n {
                x[i] = x[i].clamp(lo[i], hi[i]);
            }
        };
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
            *evals += 1;
            let v = f(x)?;
            Ok(if v.is_nan() { f64::INFINITY } else { v })
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let mut start = x0.to_vec();
        clamp(&mut start);
        let v0 = eval(&start, &mut evals)?;
        simplex.push((start.clone(), v0));
        for i in 0..n {
            let mut x = start.clone();
            let step = self.initial_step * width[i];
            x[i] = if x[i] + step <= hi[i] { x[i] + step } else { x[i] - step };
            clamp(&mut x);
            let v = eval(&x, &mut evals)?;
            simplex.push((x, v));
        }

        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let diameter_ok = (0..n).all(|i| {
                let (mn, mx) = simplex
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.0[i]), b.max(s.0[i])));
                mx - mn <= self.x_tol * width[i]
            });
            if diameter_ok {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for i in 0..n {
                    centroid[i] += x[i] / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = (0..n).map(|i| centroid[i] + t * (worst.0[i] - centroid[i])).collect();
                clamp(&mut p);
                p
            };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals)?;
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evals)?;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for s in simplex.iter_mut().skip(1) {
                for (x, b) in s.0.iter_mut().zip(&best) {
                    *x = b + 0.5 * (*x - b);
                }
                s.1 = eval(&s.0, &mut evals)?;
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Ok(Minimum { x, value, evals })
    }
}

/// Levenberg–Marquardt settings for `min ½‖r(x)‖²`.
#[derive(Clone, Copy, Debug)]
pub struct LevenbergMarquardt {
    pub max_iter: usize,
    /// Stop when a successful step reduces the cost by less than this fraction.
    pub rel_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: DVector<f64>,
    /// `‖r(x)‖²`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LevenbergMarquardt {
    /// `model(x)` returns residuals and Jacobian, or `None` where `x` is
    /// infeasible (such steps are rejected and the damping raised).
    pub fn solve<F>(&self, mut model: F, x0: DVector<f64>) -> Option<LeastSquares>
    where
        F: FnMut(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
    {
        let (mut r, mut jac) = model(&x0)?;
        let mut x = x0;
        let mut cost = r.norm_squared();
        let mut lambda = self.initial_lambda;
        let n = x.len();
        for iter in 0..self.max_iter {
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &r;
            if grad.amax() <= 1e-300 || cost == 0.0 {
                return Some(LeastSquares {
                    x,
                    cost,
                    iterations: iter,
                    converged: true,
                });
            }
            let mut accepted = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = -chol.solve(&grad);
                let trial = &x + &step;
                match model(&trial) {
                    Some((tr, tj)) if tr.norm_squared().is_finite() && tr.norm_squared() <= cost => {
                        let new_cost = tr.norm_squared();
                        let small_step = step.norm() <= 1e-14 * (1.0 + x.norm());
                        let done = cost - new_cost <= self.rel_tol * cost || small_step;
                        x = trial;
                        r = tr;
                        jac = tj;
                        cost = new_cost;
                        lambda = (lambda / 3.0).max(1e-12);
                        accepted = true;
                        if done {
                            return Some(LeastSquares {
                                x,
                                cost,
                                iterations: iter + 1,
                                converged: true,
                            });
                        }
                        break;
                    }
                    _ => lambda *= 10.0,
                }
            }
            if !accepted {
                // No downhill step at any damping: a stationary point to machine precision.
                return Some(LeastSquares {
                    x,
                    cost,
                    iterations: iter,
                    converged: true,
                });
            }
        }
        Some(LeastSquares {
            x,
            cost,
            iterations: self.max_iter,
            converged: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let nm = NelderMead {
            max_evals: 10_000,
            ..NelderMead::default()
        };
        let m = nm.minimize(rosen, &[-1.2, 1.0], &[-3.0, -3.0], &[3.0, 3.0]).unwrap();
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn nelder_mead_respects_box() {
        let f = |x: &[f64]| Ok((x[0] - 5.0).powi(2) + x[1] * x[1]);
        let m = NelderMead::default().minimize(f, &[0.0, 0.5], &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.x[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn levenberg_marquardt_fits_exponential() {
        let ts: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
        let model = |p: &DVector<f64>| {
            let r = DVector::from_iterator(ts.len(), ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y));
            let j = DMatrix::from_fn(ts.len(), 2, |i, k| {
                let e = (-p[1] * ts[i]).exp();
                if k == 0 {
                    e
                } else {
                    -p[0] * ts[i] * e
                }
            });
            Some((r, j))
        };
        let fit = LevenbergMarquardt::default().solve(model, DVector::from_vec(vec![1.0, 0.1])).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.x[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.x[1], 0.7, epsilon = 1e-8);
    }
}
