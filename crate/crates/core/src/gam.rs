//! Additive P-spline surrogates.
//!
//! A [`GamSurrogate`] models a loss surface as `b0 + sum_j s_j(x_j)`, where each
//! `s_j` is a clamped B-spline with a difference penalty on adjacent
//! coefficients. Fitting solves the penalized normal equations directly; the
//! smoothing weight is fixed by [`GamConfig`] and never tuned.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::FitError;
use crate::parallel;
use crate::space::ParamVector;

const RIDGE: f64 = 1e-10;
const DEGENERATE_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamConfig {
    pub n_splines: usize,
    pub penalty: f64,
    pub degree: usize,
    pub penalty_order: usize,
}

impl Default for GamConfig {
    fn default() -> Self {
        Self {
            n_splines: 25,
            penalty: 1e-4,
            degree: 3,
            penalty_order: 2,
        }
    }
}

impl GamConfig {
    pub fn with_penalty(self, penalty: f64) -> Self {
        Self { penalty, ..self }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.n_splines <= self.degree {
            return Err(FitError::InvalidConfig(format!(
                "n_splines ({}) must exceed degree ({})",
                self.n_splines, self.degree
            )));
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(FitError::InvalidConfig(
                "penalty must be finite and >= 0".into(),
            ));
        }
        if !(1..=3).contains(&self.penalty_order) {
            return Err(FitError::InvalidConfig(
                "penalty_order must be 1, 2 or 3".into(),
            ));
        }
        Ok(())
    }
}

/// Clamped B-spline basis on uniformly spaced knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    knots: Vec<f64>,
    degree: usize,
    n_basis: usize,
}

impl BSplineBasis {
    pub fn uniform(lo: f64, hi: f64, n_basis: usize, degree: usize) -> Self {
        assert!(n_basis > degree && hi > lo);
        let intervals = n_basis - degree;
        let mut knots = Vec::with_capacity(n_basis + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree));
        knots.extend((0..=intervals).map(|i| {
            if i == intervals {
                hi
            } else {
                lo + (hi - lo) * i as f64 / intervals as f64
            }
        }));
        knots.extend(std::iter::repeat_n(hi, degree));
        Self {
            knots,
            degree,
            n_basis,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.n_basis
    }

    pub fn is_empty(&self) -> bool {
        self.n_basis == 0
    }

    fn lo(&self) -> f64 {
        self.knots[self.degree]
    }

    fn hi(&self) -> f64 {
        self.knots[self.n_basis]
    }

    /// Knot span containing `x`; `x` is assumed inside `[lo, hi]`.
    fn span(&self, x: f64) -> usize {
        let (p, n) = (self.degree, self.n_basis);
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[p] {
            return p;
        }
        let (mut low, mut high) = (p, n);
        let mut mid = (low + high) / 2;
        while x < self.knots[mid] || x >= self.knots[mid + 1] {
            if x < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
            mid = (low + high) / 2;
        }
        mid
    }

    /// Returns the first nonzero basis index and the `degree + 1` nonzero values at `x`.
    pub fn eval_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.degree;
        let x = x.clamp(self.lo(), self.hi());
        let span = self.span(x);
        let mut values = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        values[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        (span - p, values)
    }

    pub fn eval_dense(&self, x: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.n_basis];
        let (first, vals) = self.eval_nonzero(x);
        row[first..first + vals.len()].copy_from_slice(&vals);
        row
    }
}

/// Difference matrix of the given order, `(n - order) x n`.
pub fn difference_matrix(n: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(n, n);
    for _ in 0..order {
        let rows = d.nrows();
        d = DMatrix::from_fn(rows - 1, n, |i, j| d[(i + 1, j)] - d[(i, j)]);
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smooth {
    pub basis: BSplineBasis,
    pub coefficients: Vec<f64>,
    pub train_lo: f64,
    pub train_hi: f64,
    /// False when every training coordinate was identical; the smooth is then zero.
    pub active: bool,
}

impl Smooth {
    fn eval(&self, x: f64) -> f64 {
        if !self.active {
            return 0.0;
        }
        let x = if x.is_nan() {
            self.train_lo
        } else {
            x.clamp(self.train_lo, self.train_hi)
        };
        let (first, vals) = self.basis.eval_nonzero(x);
        vals.iter()
            .zip(&self.coefficients[first..])
            .map(|(b, c)| b * c)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamSurrogate {
    pub intercept: f64,
    pub smooths: Vec<Smooth>,
    pub config: GamConfig,
}

impl GamSurrogate {
    pub fn fit(points: &[(ParamVector, f64)], config: &GamConfig) -> Result<Self, FitError> {
        config.validate()?;
        let n = points.len();
        if n < 2 {
            return Err(FitError::TooFewPoints(n));
        }
        let dim = points[0].0.len();
        for (i, (x, y)) in points.iter().enumerate() {
            if x.len() != dim {
                return Err(FitError::DimensionMismatch {
                    index: i,
                    expected: dim,
                    got: x.len(),
                });
            }
            if !y.is_finite() {
                return Err(FitError::NonFiniteLoss(i));
            }
        }
        let k = config.n_splines;

        let mut smooths = Vec::with_capacity(dim);
        for j in 0..dim {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, (x, _)| {
                (acc.0.min(x[j]), acc.1.max(x[j]))
            });
            let active = hi > lo && lo.is_finite() && hi.is_finite();
            let (blo, bhi) = if active {
                (lo, hi)
            } else {
                (lo - DEGENERATE_PAD, lo + DEGENERATE_PAD)
            };
            smooths.push(Smooth {
                basis: BSplineBasis::uniform(blo, bhi, k, config.degree),
                coefficients: vec![0.0; k],
                train_lo: lo,
                train_hi: hi,
                active,
            });
        }
        let active: Vec<usize> = (0..dim).filter(|&j| smooths[j].active).collect();
        let p = 1 + active.len() * k;

        let mut design = DMatrix::<f64>::zeros(n, p);
        for (i, (x, _)) in points.iter().enumerate() {
            design[(i, 0)] = 1.0;
            for (slot, &j) in active.iter().enumerate() {
                let (first, vals) = smooths[j].basis.eval_nonzero(x[j]);
                for (r, v) in vals.into_iter().enumerate() {
                    design[(i, 1 + slot * k + first + r)] = v;
                }
            }
        }
        // Center each smooth's columns; the means are folded back into the intercept.
        let mut col_means = vec![0.0; p];
        for (c, mean) in col_means.iter_mut().enumerate().skip(1) {
            *mean = design.column(c).sum() / n as f64;
            design.column_mut(c).add_scalar_mut(-*mean);
        }

        let mut normal = design.tr_mul(&design);
        if config.penalty > 0.0 {
            let d = difference_matrix(k, config.penalty_order);
            let dtd = d.tr_mul(&d) * config.penalty;
            for slot in 0..active.len() {
                let off = 1 + slot * k;
                let mut block = normal.view_mut((off, off), (k, k));
                block += &dtd;
            }
        }
        // relative ridge: keeps the factorization stable when a huge penalty
        // dominates the unpenalized constant direction of each smooth
        let scale = (0..p).map(|i| normal[(i, i)]).fold(1.0, f64::max);
        for i in 0..p {
            normal[(i, i)] += RIDGE * scale;
        }
        let y = DVector::from_iterator(n, points.iter().map(|(_, y)| *y));
        let rhs = design.tr_mul(&y);
        let beta = normal
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or(FitError::Singular)?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(FitError::Singular);
        }

        let mut intercept = beta[0];
        for (slot, &j) in active.iter().enumerate() {
            let off = 1 + slot * k;
            let coefs: Vec<f64> = beta.rows(off, k).iter().copied().collect();
            intercept -= coefs
                .iter()
                .zip(&col_means[off..off + k])
                .map(|(c, m)| c * m)
                .sum::<f64>();
            smooths[j].coefficients = coefs;
        }

        Ok(Self {
            intercept,
            smooths,
            config: *config,
        })
    }

    pub fn dim(&self) -> usize {
        self.smooths.len()
    }

    pub fn predict(&self, x: &ParamVector) -> Result<f64, FitError> {
        if x.len() != self.dim() {
            return Err(FitError::DimensionMismatch {
                index: 0,
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x.as_slice()))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .smooths
                .iter()
                .zip(x)
                .map(|(s, &v)| s.eval(v))
                .sum::<f64>()
    }

    /// Elementwise [`predict`](Self::predict), order-preserving. Runs on the
    /// rayon pool when the `parallel` feature is enabled.
    pub fn predict_batch(&self, xs: &[ParamVector]) -> Result<Vec<f64>, FitError> {
        parallel::map(xs, |x| self.predict(x)).into_iter().collect()
    }

    /// Sequential variant of [`predict_batch`](Self::predict_batch).
    pub fn predict_batch_seq(&self, xs: &[ParamVector]) -> Result<Vec<f64>, FitError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Debug dump: intercept plus per-dimension knots and coefficients.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("surrogate is always serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::gramacy_lee;

    fn pts1(xs: &[f64], f: impl Fn(f64) -> f64) -> Vec<(ParamVector, f64)> {
        xs.iter().map(|&x| (ParamVector(vec![x]), f(x))).collect()
    }

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn rss(m: &GamSurrogate, pts: &[(ParamVector, f64)]) -> f64 {
        pts.iter()
            .map(|(x, y)| (m.predict(x).unwrap() - y).powi(2))
            .sum()
    }

    #[test]
    fn basis_is_partition_of_unity() {
        let b = BSplineBasis::uniform(-1.0, 3.0, 25, 3);
        assert_eq!(b.knots().len(), 25 + 3 + 1);
        assert!(b.knots()[..4].iter().all(|&k| k == -1.0));
        assert!(b.knots()[25..].iter().all(|&k| k == 3.0));
        assert!(b.knots().windows(2).all(|w| w[0] <= w[1]));
        for x in grid(101, -1.0, 3.0) {
            let s: f64 = b.eval_dense(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x} sum={s}");
            assert!(b.eval_dense(x).iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn basis_matches_cox_de_boor() {
        // independent recursive definition
        fn cdb(knots: &[f64], i: usize, p: usize, x: f64, last: usize) -> f64 {
            if p == 0 {
                let inside = knots[i] <= x && x < knots[i + 1];
                let at_end = x == knots[knots.len() - 1] && i == last;
                return if inside || at_end { 1.0 } else { 0.0 };
            }
            let mut v = 0.0;
            let d1 = knots[i + p] - knots[i];
            if d1 > 0.0 {
                v += (x - knots[i]) / d1 * cdb(knots, i, p - 1, x, last);
            }
            let d2 = knots[i + p + 1] - knots[i + 1];
            if d2 > 0.0 {
                v += (knots[i + p + 1] - x) / d2 * cdb(knots, i + 1, p - 1, x, last);
            }
            v
        }
        let b = BSplineBasis::uniform(0.0, 1.0, 8, 3);
        let last = b.len() - 1; // last non-empty degree-0 span
        for x in grid(37, 0.0, 1.0) {
            let dense = b.eval_dense(x);
            for (i, &v) in dense.iter().enumerate() {
                let want = cdb(b.knots(), i, 3, x, last);
                assert!((v - want).abs() < 1e-12, "x={x} i={i} {v} vs {want}");
            }
        }
    }

    #[test]
    fn difference_matrix_orders() {
        let d1 = difference_matrix(4, 1);
        assert_eq!(d1.shape(), (3, 4));
        assert_eq!(d1.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, 0.0, 0.0]);
        let d2 = difference_matrix(4, 2);
        assert_eq!(d2.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, -2.0, 1.0]);
        let d3 = difference_matrix(5, 3);
        assert_eq!(d3.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 3.0, -3.0, 1.0, 0.0]);
    }

    #[test]
    fn linear_data_is_reproduced() {
        let pts = pts1(&grid(11, 0.0, 1.0), |x| 2.0 * x);
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        for (x, y) in &pts {
            assert!((m.predict(x).unwrap() - y).abs() < 1e-3);
        }
        let mid = m.predict(&ParamVector(vec![0.55])).unwrap();
        assert!((mid - 1.1).abs() < 1e-2, "{mid}");
    }

    #[test]
    fn constant_data_is_flat() {
        let pts = pts1(&grid(9, -2.0, 5.0), |_| 7.0);
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        for x in grid(50, -2.0, 5.0) {
            let v = m.predict(&ParamVector(vec![x])).unwrap();
            assert!((v - 7.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn beats_constant_fit_on_gramacy_lee() {
        let xs: Vec<f64> = (0..20).map(|i| 0.5 + 2.0 * ((i as f64 * 0.618_034) % 1.0)).collect();
        let pts = pts1(&xs, |x| gramacy_lee(x).unwrap());
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let const_rss: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
        assert!(rss(&m, &pts) < const_rss);
    }

    #[test]
    fn out_of_range_prediction_clamps() {
        let pts = pts1(&grid(15, 1.0, 2.0), |x| (3.0 * x).sin());
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        let at = |x: f64| m.predict(&ParamVector(vec![x])).unwrap();
        assert_eq!(at(-10.0), at(1.0));
        assert_eq!(at(5.0), at(2.0));
    }

    #[test]
    fn predict_batch_is_elementwise() {
        let pts = pts1(&grid(15, 0.0, 1.0), |x| x * x);
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        assert!(m.predict_batch(&[]).unwrap().is_empty());
        let x = ParamVector(vec![0.3]);
        assert_eq!(m.predict_batch(std::slice::from_ref(&x)).unwrap(), vec![m.predict(&x).unwrap()]);
        let xs: Vec<ParamVector> = grid(7, 0.0, 1.0).into_iter().map(|v| ParamVector(vec![v])).collect();
        let mut rev = xs.clone();
        rev.reverse();
        let mut a = m.predict_batch(&xs).unwrap();
        a.reverse();
        assert_eq!(a, m.predict_batch(&rev).unwrap());
        assert_eq!(m.predict_batch(&xs).unwrap(), m.predict_batch_seq(&xs).unwrap());
    }

    #[test]
    fn rss_non_decreasing_in_penalty() {
        let xs: Vec<f64> = (0..30).map(|i| 0.5 + 2.0 * ((i as f64 * 0.754_877) % 1.0)).collect();
        let pts = pts1(&xs, |x| gramacy_lee(x).unwrap());
        let mut prev = -1.0;
        for lambda in [0.0, 1e-4, 1.0, 1e4] {
            let m = GamSurrogate::fit(&pts, &GamConfig::default().with_penalty(lambda)).unwrap();
            let r = rss(&m, &pts);
            assert!(r >= prev * (1.0 - 1e-9), "lambda={lambda}: {r} < {prev}");
            prev = r;
        }
    }

    #[test]
    fn huge_penalty_flattens_differences() {
        let xs: Vec<f64> = (0..40).map(|i| 0.5 + 2.0 * ((i as f64 * 0.618_034) % 1.0)).collect();
        let pts = pts1(&xs, |x| gramacy_lee(x).unwrap());
        let d = difference_matrix(25, 2);
        let max_diff = |lambda: f64| {
            let m = GamSurrogate::fit(&pts, &GamConfig::default().with_penalty(lambda)).unwrap();
            let c = DVector::from_vec(m.smooths[0].coefficients.clone());
            (&d * c).amax()
        };
        let free = max_diff(0.0);
        let stiff = max_diff(1e12);
        assert!(stiff < 1e-3 * free, "{stiff} vs {free}");
    }

    #[test]
    fn prediction_is_lipschitz_on_sweep() {
        let xs: Vec<f64> = (0..25).map(|i| 0.5 + 2.0 * ((i as f64 * 0.618_034) % 1.0)).collect();
        let pts = pts1(&xs, |x| gramacy_lee(x).unwrap());
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        let h = 1e-4;
        let sweep = grid(20_001, 0.4, 2.6);
        let slopes: Vec<f64> = sweep
            .windows(2)
            .map(|w| {
                let a = m.predict(&ParamVector(vec![w[0]])).unwrap();
                let b = m.predict(&ParamVector(vec![w[1]])).unwrap();
                (a - b).abs() / (w[1] - w[0])
            })
            .collect();
        let lip = slopes.iter().cloned().fold(0.0, f64::max);
        assert!(lip.is_finite());
        // halving the step must not reveal a steeper slope than the sweep bound allows
        for x in grid(500, 0.5, 2.5) {
            let a = m.predict(&ParamVector(vec![x])).unwrap();
            let b = m.predict(&ParamVector(vec![x + h])).unwrap();
            assert!((a - b).abs() <= lip * h * 1.01 + 1e-12);
        }
    }

    #[test]
    fn fit_is_bitwise_deterministic() {
        let pts: Vec<(ParamVector, f64)> = (0..30)
            .map(|i| {
                let a = (i as f64 * 0.618_034) % 1.0;
                let b = (i as f64 * 0.414_214) % 1.0;
                (ParamVector(vec![a, b]), (a - 0.3).powi(2) + (5.0 * b).sin())
            })
            .collect();
        let m1 = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        let m2 = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        let bits = |m: &GamSurrogate| {
            m.smooths
                .iter()
                .flat_map(|s| s.coefficients.iter().map(|c| c.to_bits()))
                .chain(std::iter::once(m.intercept.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&m1), bits(&m2));
    }

    #[test]
    fn degenerate_dimension_is_inactive() {
        let pts: Vec<(ParamVector, f64)> = (0..10)
            .map(|i| (ParamVector(vec![i as f64, 3.0]), i as f64))
            .collect();
        let m = GamSurrogate::fit(&pts, &GamConfig::default()).unwrap();
        assert!(m.smooths[0].active);
        assert!(!m.smooths[1].active);
        let a = m.predict(&ParamVector(vec![4.0, 3.0])).unwrap();
        let b = m.predict(&ParamVector(vec![4.0, -100.0])).unwrap();
        assert_eq!(a, b);
        assert!((a - 4.0).abs() < 1e-3);
    }

    #[test]
    fn fit_errors() {
        let cfg = GamConfig::default();
        assert_eq!(
            GamSurrogate::fit(&[(ParamVector(vec![1.0]), 1.0)], &cfg),
            Err(FitError::TooFewPoints(1))
        );
        let mixed = vec![(ParamVector(vec![1.0]), 1.0), (ParamVector(vec![1.0, 2.0]), 1.0)];
        assert!(matches!(
            GamSurrogate::fit(&mixed, &cfg),
            Err(FitError::DimensionMismatch { .. })
        ));
        let nan = vec![(ParamVector(vec![1.0]), 1.0), (ParamVector(vec![2.0]), f64::NAN)];
        assert_eq!(GamSurrogate::fit(&nan, &cfg), Err(FitError::NonFiniteLoss(1)));
        let bad = GamConfig { n_splines: 3, ..cfg };
        assert!(matches!(
            GamSurrogate::fit(&pts1(&[0.0, 1.0], |x| x), &bad),
            Err(FitError::InvalidConfig(_))
        ));
        let m = GamSurrogate::fit(&pts1(&[0.0, 1.0], |x| x), &cfg).unwrap();
        assert!(m.predict(&ParamVector(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn dump_contains_knots_and_coefficients() {
        let m = GamSurrogate::fit(&pts1(&grid(5, 0.0, 1.0), |x| x), &GamConfig::default()).unwrap();
        let v = m.to_json();
        assert!(v["intercept"].is_number());
        assert_eq!(v["smooths"][0]["coefficients"].as_array().unwrap().len(), 25);
        assert_eq!(v["smooths"][0]["basis"]["knots"].as_array().unwrap().len(), 29);
    }
}
