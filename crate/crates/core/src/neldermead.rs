//! Box-constrained Nelder-Mead simplex search.
//!
//! Bounds are enforced by projecting every candidate vertex onto the box
//! before it is evaluated. Axes with zero box width are frozen.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::space::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmConfig {
    /// Iteration cap; `None` means `200 * dim`.
    pub max_iter: Option<usize>,
    pub x_tol: f64,
    pub f_tol: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Initial simplex edge as a fraction of the box width.
    pub initial_step: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            max_iter: None,
            x_tol: 1e-6,
            f_tol: 1e-9,
            alpha: 1.0,
            gamma: 2.0,
            rho: 0.5,
            sigma: 0.5,
            initial_step: 0.05,
        }
    }
}

impl NmConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return bad("alpha must be > 0");
        }
        if self.gamma.is_nan() || self.gamma <= 1.0 {
            return bad("gamma must be > 1");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must be in (0, 1)");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma must be in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return bad("initial_step must be in (0, 1]");
        }
        if !(self.x_tol >= 0.0 && self.f_tol >= 0.0) {
            return bad("tolerances must be >= 0");
        }
        if self.max_iter == Some(0) {
            return bad("max_iter must be >= 1");
        }
        Ok(())
    }

    pub fn max_iter_for(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(200 * dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x_min: Vec<f64>,
    pub f_min: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Progress report passed to the callback after every iteration.
#[derive(Debug, Clone, Copy)]
pub struct NmProgress {
    pub iteration: usize,
    pub best_f: f64,
}

pub fn minimize<F>(
    objective: F,
    x0: &[f64],
    bounds: &Bounds,
    config: &NmConfig,
) -> Result<NmResult, SolverError>
where
    F: FnMut(&[f64]) -> f64,
{
    minimize_with_callback(objective, x0, bounds, config, |_| {})
}

pub fn minimize_with_callback<F, C>(
    mut objective: F,
    x0: &[f64],
    bounds: &Bounds,
    config: &NmConfig,
    mut callback: C,
) -> Result<NmResult, SolverError>
where
    F: FnMut(&[f64]) -> f64,
    C: FnMut(NmProgress),
{
    config.validate()?;
    let dim = bounds.dim();
    if x0.len() != dim {
        return Err(SolverError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    for i in 0..dim {
        let tol = 1e-9 * bounds.width(i).max(1.0);
        if !(x0[i] >= bounds.lo[i] - tol && x0[i] <= bounds.hi[i] + tol) {
            return Err(SolverError::StartOutsideBox(x0.to_vec()));
        }
    }
    let start = bounds.clamp(x0);
    let active: Vec<usize> = (0..dim).filter(|&i| bounds.width(i) > 0.0).collect();

    let mut eval = |x: &[f64]| -> Result<f64, SolverError> {
        let v = objective(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SolverError::NonFinite(x.to_vec()))
        }
    };

    let f0 = eval(&start)?;
    if active.is_empty() {
        return Ok(NmResult {
            x_min: start,
            f_min: f0,
            iterations: 0,
            converged: true,
        });
    }

    let n = active.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.clone(), f0));
    for &axis in &active {
        let mut v = start.clone();
        let step = config.initial_step * bounds.width(axis);
        v[axis] = if v[axis] + step <= bounds.hi[axis] {
            v[axis] + step
        } else {
            v[axis] - step
        };
        let v = bounds.clamp(&v);
        let fv = eval(&v)?;
        simplex.push((v, fv));
    }

    let project = |base: &[f64], dir_from: &[f64], dir_to: &[f64], coef: f64| -> Vec<f64> {
        // base + coef * (dir_to - dir_from), clamped
        let raw: Vec<f64> = base
            .iter()
            .zip(dir_from.iter().zip(dir_to))
            .map(|(b, (a, c))| b + coef * (c - a))
            .collect();
        bounds.clamp(&raw)
    };

    let max_iter = config.max_iter_for(n);
    let mut best = simplex[0].clone();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }

        let apex = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(v, _)| active.iter().map(move |&i| (v[i] - apex[i]).abs()))
            .fold(0.0, f64::max);
        let spread = simplex[1..]
            .iter()
            .map(|(_, f)| (f - simplex[0].1).abs())
            .fold(0.0, f64::max);
        if diameter < config.x_tol && spread < config.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let second_worst_f = simplex[n - 1].1;
        let best_f = simplex[0].1;

        // reflection: c + alpha (c - w)
        let xr = project(&centroid, &worst.0, &centroid, config.alpha);
        let fr = eval(&xr)?;

        if fr < best_f {
            let xe = project(&centroid, &centroid, &xr, config.gamma);
            let fe = eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < second_worst_f {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc, accept) = if fr < worst.1 {
                let xc = project(&centroid, &centroid, &xr, config.rho);
                let fc = eval(&xc)?;
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = project(&centroid, &centroid, &worst.0, config.rho);
                let fc = eval(&xc)?;
                let ok = fc < worst.1;
                (xc, fc, ok)
            };
            if accept {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v = project(&anchor, &anchor, &vertex.0, config.sigma);
                    let fv = eval(&v)?;
                    *vertex = (v, fv);
                }
            }
        }

        let round_best = simplex
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("simplex is non-empty");
        if round_best.1 < best.1 {
            best = round_best.clone();
        }
        callback(NmProgress {
            iteration: iterations,
            best_f: best.1,
        });
    }

    Ok(NmResult {
        x_min: best.0,
        f_min: best.1,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn boxed(lo: &[f64], hi: &[f64]) -> Bounds {
        Bounds::new(lo.to_vec(), hi.to_vec())
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn quadratic_minimum() {
        let r = minimize(|x| (x[0] - 2.0).powi(2), &[0.0], &boxed(&[0.0], &[5.0]), &NmConfig::default())
            .unwrap();
        assert!((r.x_min[0] - 2.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let r = minimize(
            rosenbrock,
            &[-1.2, 1.0],
            &boxed(&[-5.0, -5.0], &[5.0, 5.0]),
            &NmConfig::default(),
        )
        .unwrap();
        assert!(r.f_min < 1e-6, "{:?}", r);
        assert!((r.x_min[0] - 1.0).abs() < 1e-2 && (r.x_min[1] - 1.0).abs() < 1e-2);
        assert!(r.iterations <= 400);
    }

    #[test]
    fn boundary_minimum_via_clamping() {
        let r = minimize(|x| x[0], &[5.0], &boxed(&[3.0], &[10.0]), &NmConfig::default()).unwrap();
        assert!((r.x_min[0] - 3.0).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn start_at_upper_edge_flips_step_inward() {
        let r = minimize(|x| (x[0] - 9.0).powi(2), &[10.0], &boxed(&[0.0], &[10.0]), &NmConfig::default())
            .unwrap();
        assert!((r.x_min[0] - 9.0).abs() < 1e-4);
    }

    #[test]
    fn frozen_axis_is_untouched() {
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + x[1],
            &[0.0, 4.0],
            &boxed(&[-2.0, 4.0], &[2.0, 4.0]),
            &NmConfig::default(),
        )
        .unwrap();
        assert_eq!(r.x_min[1], 4.0);
        assert!((r.x_min[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        let b = boxed(&[0.0], &[1.0]);
        assert!(matches!(
            minimize(|x| x[0], &[2.0], &b, &NmConfig::default()),
            Err(SolverError::StartOutsideBox(_))
        ));
        assert!(matches!(
            minimize(|x| if x[0] > 0.52 { f64::NAN } else { x[0] }, &[0.5], &b, &NmConfig::default()),
            Err(SolverError::NonFinite(p)) if p[0] > 0.52
        ));
        let bad = NmConfig { gamma: 0.5, ..NmConfig::default() };
        assert!(matches!(minimize(|x| x[0], &[0.5], &b, &bad), Err(SolverError::InvalidConfig(_))));
        assert!(matches!(
            minimize(|x| x[0], &[0.5, 0.5], &b, &NmConfig::default()),
            Err(SolverError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn best_so_far_is_monotone() {
        let mut trace = Vec::new();
        let r = minimize_with_callback(
            rosenbrock,
            &[-1.2, 1.0],
            &boxed(&[-5.0, -5.0], &[5.0, 5.0]),
            &NmConfig::default(),
            |p| trace.push(p.best_f),
        )
        .unwrap();
        assert_eq!(trace.len(), r.iterations);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_iteration_cap() {
        let cfg = NmConfig { max_iter: Some(7), ..NmConfig::default() };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &boxed(&[-5.0, -5.0], &[5.0, 5.0]), &cfg).unwrap();
        assert_eq!(r.iterations, 7);
        assert!(!r.converged);
    }

    proptest! {
        #[test]
        fn never_worse_inside_box_and_deterministic(
            cx in -3.0..3.0f64, cy in -3.0..3.0f64,
            sx in -2.0..2.0f64, sy in -2.0..2.0f64,
            wiggle in 0.0..3.0f64,
        ) {
            let b = boxed(&[-2.0, -2.0], &[2.0, 2.0]);
            let f = |x: &[f64]| (x[0] - cx).powi(2) + 2.0 * (x[1] - cy).powi(2) + wiggle * (3.0 * x[0]).sin();
            let r1 = minimize(f, &[sx, sy], &b, &NmConfig::default()).unwrap();
            let r2 = minimize(f, &[sx, sy], &b, &NmConfig::default()).unwrap();
            prop_assert!(r1.f_min <= f(&[sx, sy]));
            prop_assert!(b.contains(&r1.x_min));
            prop_assert_eq!(r1.f_min, f(&r1.x_min));
            prop_assert_eq!(r1, r2);
        }
    }
}
