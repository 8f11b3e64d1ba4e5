//! Continuation between two surrogates.
//!
//! `H(x, t) = t * f(x) + (1 - t) * g(x)` deforms the old surrogate `f`
//! (at `t = 1`) into the new surrogate `g` (at `t = 0`). [`track_path`]
//! follows a minimizer of `H` in uniform steps of `t`, warm-starting each
//! Nelder-Mead solve from the previous point.

use serde::{Deserialize, Serialize};

use crate::error::HomotopyError;
use crate::gam::GamSurrogate;
use crate::neldermead::{self, NmConfig};
use crate::space::{Bounds, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomotopyConfig {
    pub n_steps: usize,
    pub nm: NmConfig,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self {
            n_steps: 5,
            nm: NmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyPath {
    /// `x^(0) .. x^(N)`; `x^(0)` is the start point recorded at `t = 1`.
    pub points: Vec<ParamVector>,
    pub t_values: Vec<f64>,
}

impl HomotopyPath {
    pub fn end(&self) -> &ParamVector {
        self.points.last().expect("path always holds the start point")
    }
}

fn blend(f: f64, g: f64, t: f64) -> f64 {
    t * f + (1.0 - t) * g
}

pub fn eval_homotopy(
    f: &GamSurrogate,
    g: &GamSurrogate,
    x: &ParamVector,
    t: f64,
) -> Result<f64, HomotopyError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(HomotopyError::InvalidT(t));
    }
    check_dims(f, g)?;
    if x.len() != f.dim() {
        return Err(HomotopyError::DimensionMismatch {
            f: f.dim(),
            g: x.len(),
        });
    }
    Ok(blend(
        f.predict_unchecked(x.as_slice()),
        g.predict_unchecked(x.as_slice()),
        t,
    ))
}

fn check_dims(f: &GamSurrogate, g: &GamSurrogate) -> Result<(), HomotopyError> {
    if f.dim() != g.dim() {
        return Err(HomotopyError::DimensionMismatch {
            f: f.dim(),
            g: g.dim(),
        });
    }
    Ok(())
}

/// `t` after `k` of `n` steps; computed directly so the last value is exactly 0.
pub fn t_at(k: usize, n: usize) -> f64 {
    1.0 - k as f64 / n as f64
}

pub fn track_path(
    f: &GamSurrogate,
    g: &GamSurrogate,
    x0: &ParamVector,
    bounds: &Bounds,
    config: &HomotopyConfig,
) -> Result<HomotopyPath, HomotopyError> {
    check_dims(f, g)?;
    if config.n_steps == 0 {
        return Err(HomotopyError::NoSteps);
    }
    if x0.len() != f.dim() || bounds.dim() != f.dim() {
        return Err(HomotopyError::DimensionMismatch {
            f: f.dim(),
            g: x0.len(),
        });
    }
    let n = config.n_steps;
    let mut points = Vec::with_capacity(n + 1);
    let mut t_values = Vec::with_capacity(n + 1);
    points.push(x0.clone());
    t_values.push(1.0);
    let mut current = x0.as_slice().to_vec();
    for k in 1..=n {
        let t = t_at(k, n);
        let h = |x: &[f64]| blend(f.predict_unchecked(x), g.predict_unchecked(x), t);
        let result = neldermead::minimize(h, &current, bounds, &config.nm)?;
        current = result.x_min;
        points.push(ParamVector(current.clone()));
        t_values.push(t);
    }
    Ok(HomotopyPath { points, t_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gam::GamConfig;
    use crate::objectives::gramacy_lee;

    fn fit1(xs: &[f64], func: impl Fn(f64) -> f64) -> GamSurrogate {
        let pts: Vec<_> = xs.iter().map(|&x| (ParamVector(vec![x]), func(x))).collect();
        GamSurrogate::fit(&pts, &GamConfig::default()).unwrap()
    }

    fn lattice(n: usize, seed: f64) -> Vec<f64> {
        (0..n).map(|i| 0.5 + 2.0 * ((seed + i as f64 * 0.618_034) % 1.0)).collect()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let f = fit1(&lattice(10, 0.1), |x| x * x);
        let g = fit1(&lattice(10, 0.3), |x| (x - 1.5).abs());
        let x = ParamVector(vec![1.3]);
        let pf = f.predict(&x).unwrap();
        let pg = g.predict(&x).unwrap();
        assert_eq!(eval_homotopy(&f, &g, &x, 1.0).unwrap(), pf);
        assert_eq!(eval_homotopy(&f, &g, &x, 0.0).unwrap(), pg);
        assert_eq!(blend(2.0, 4.0, 0.5), 3.0);
        let mid = eval_homotopy(&f, &g, &x, 0.5).unwrap();
        assert!((mid - 0.5 * (pf + pg)).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let f = fit1(&lattice(6, 0.0), |x| x);
        let x = ParamVector(vec![1.0]);
        assert_eq!(eval_homotopy(&f, &f, &x, 1.5), Err(HomotopyError::InvalidT(1.5)));
        assert!(eval_homotopy(&f, &f, &x, -0.1).is_err());
        let pts2: Vec<_> = (0..6)
            .map(|i| (ParamVector(vec![i as f64, (i * i) as f64]), i as f64))
            .collect();
        let g2 = GamSurrogate::fit(&pts2, &GamConfig::default()).unwrap();
        assert!(matches!(
            eval_homotopy(&f, &g2, &x, 0.5),
            Err(HomotopyError::DimensionMismatch { .. })
        ));
        let cfg = HomotopyConfig { n_steps: 0, ..Default::default() };
        let b = Bounds::new(vec![0.5], vec![2.5]);
        assert_eq!(track_path(&f, &f, &x, &b, &cfg), Err(HomotopyError::NoSteps));
    }

    #[test]
    fn t_schedule() {
        let t: Vec<f64> = (0..=5).map(|k| t_at(k, 5)).collect();
        assert_eq!(t[0], 1.0);
        assert_eq!(t[5], 0.0);
        assert!((t[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn identical_surrogates_descend() {
        let g = fit1(&lattice(20, 0.2), |x| gramacy_lee(x).unwrap());
        let b = Bounds::new(vec![0.5], vec![2.5]);
        let x0 = ParamVector(vec![1.9]);
        let path = track_path(&g, &g, &x0, &b, &HomotopyConfig::default()).unwrap();
        assert_eq!(path.points.len(), 6);
        assert_eq!(path.t_values.len(), 6);
        for k in 1..path.points.len() {
            let t = path.t_values[k];
            let now = eval_homotopy(&g, &g, &path.points[k], t).unwrap();
            let before = eval_homotopy(&g, &g, &path.points[k - 1], t).unwrap();
            assert!(now <= before);
        }
        let direct = neldermead::minimize(
            |x| g.predict_unchecked(x),
            x0.as_slice(),
            &b,
            &NmConfig::default(),
        )
        .unwrap();
        assert!(g.predict(path.end()).unwrap() <= direct.f_min + 1e-9);
    }

    #[test]
    fn single_step_path() {
        let f = fit1(&lattice(10, 0.0), |x| (x - 1.0).powi(2));
        let g = fit1(&lattice(12, 0.5), |x| (x - 2.0).powi(2));
        let b = Bounds::new(vec![0.5], vec![2.5]);
        let x0 = ParamVector(vec![1.0]);
        let cfg = HomotopyConfig { n_steps: 1, ..Default::default() };
        let path = track_path(&f, &g, &x0, &b, &cfg).unwrap();
        assert_eq!(path.points.len(), 2);
        assert_eq!(path.points[0], x0);
        assert_eq!(path.t_values, vec![1.0, 0.0]);
        let direct =
            neldermead::minimize(|x| g.predict_unchecked(x), &[1.0], &b, &NmConfig::default()).unwrap();
        assert_eq!(path.end().as_slice(), direct.x_min.as_slice());
    }

    #[test]
    fn gramacy_lee_illustration_lands_near_global_minimum() {
        let xs_f = lattice(30, 0.05);
        let mut xs_g = xs_f.clone();
        xs_g.extend(lattice(30, 0.37));
        let f = fit1(&xs_f, |x| gramacy_lee(x).unwrap());
        let g = fit1(&xs_g, |x| gramacy_lee(x).unwrap());
        let b = Bounds::new(vec![0.5], vec![2.5]);
        // start from the best of f's sample, as the driver does
        let x0 = xs_f
            .iter()
            .copied()
            .min_by(|a, c| gramacy_lee(*a).unwrap().total_cmp(&gramacy_lee(*c).unwrap()))
            .unwrap();
        let path = track_path(&f, &g, &ParamVector(vec![x0]), &b, &HomotopyConfig::default()).unwrap();
        assert!(g.predict(path.end()).unwrap() <= g.predict(&ParamVector(vec![x0])).unwrap());
        assert!((path.end()[0] - 0.5486).abs() < 0.05, "{:?}", path.end());
        assert!(path.points.iter().all(|p| b.contains(p.as_slice())));
    }
}
