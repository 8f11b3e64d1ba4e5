//! Simple regret traces and cross-seed improvement summaries.
//!
//! Regret at trial `t` is the best loss seen so far minus a reference
//! minimum. When comparing methods the reference is the lowest loss any run
//! reached, so every trace is non-negative and they share a baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub per_iteration: Vec<f64>,
    pub global_min: f64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        *self.per_iteration.last().expect("regret traces are non-empty")
    }

    pub fn area_under_curve(&self) -> f64 {
        area_under_curve(&self.per_iteration)
    }
}

/// `R_t = min(losses[..=t]) - global_min`, reported without clamping.
pub fn regret(losses: &[f64], global_min: f64) -> Result<RegretTrace, MetricsError> {
    if losses.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let per_iteration = losses
        .iter()
        .scan(f64::INFINITY, |best, &l| {
            *best = best.min(l);
            Some(*best - global_min)
        })
        .collect();
    Ok(RegretTrace {
        per_iteration,
        global_min,
    })
}

/// Smallest finite loss across all runs.
pub fn pooled_minimum<'a, I>(runs: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    runs.into_iter()
        .flatten()
        .copied()
        .filter(|l| l.is_finite())
        .reduce(f64::min)
}

/// Sum of per-trial regrets, i.e. the area under a unit-spaced step curve.
pub fn area_under_curve(trace: &[f64]) -> f64 {
    trace.iter().sum()
}

/// Elementwise mean of equal-length traces.
pub fn mean_trace(traces: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = traces.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    let n = traces.len() as f64;
    (0..len)
        .map(|t| traces.iter().map(|tr| tr[t]).sum::<f64>() / n)
        .collect()
}

/// Sample mean and standard error (`s / sqrt(n)`, 0 for a single value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSummary {
    pub percent_improvement: f64,
    pub standard_error: f64,
    pub n_seeds: usize,
    /// Seeds skipped because their baseline was zero.
    pub excluded: usize,
}

/// Mean over seeds of `100 (base_i - aug_i) / base_i`.
///
/// Seeds with a zero baseline are skipped and counted in `excluded`. The
/// ratio uses `|base_i|` so a negative baseline still reports a lower `aug`
/// as a positive improvement.
pub fn percent_improvement(base: &[f64], aug: &[f64]) -> Result<ImprovementSummary, MetricsError> {
    if base.len() != aug.len() {
        return Err(MetricsError::LengthMismatch {
            base: base.len(),
            aug: aug.len(),
        });
    }
    if base.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = base.iter().chain(aug).position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i % base.len()));
    }
    let per_seed: Vec<f64> = base
        .iter()
        .zip(aug)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, a)| 100.0 * (b - a) / b.abs())
        .collect();
    if per_seed.is_empty() {
        return Err(MetricsError::NoUsableSeeds);
    }
    let (mean, se) = mean_and_se(&per_seed);
    Ok(ImprovementSummary {
        percent_improvement: mean,
        standard_error: se,
        n_seeds: per_seed.len(),
        excluded: base.len() - per_seed.len(),
    })
}

/// One labelled series for [`regret_svg`].
pub struct SvgSeries<'a> {
    pub label: &'a str,
    pub mean: &'a [f64],
    pub se: &'a [f64],
}

/// Line chart of mean regret with a shaded standard-error band, log10 y axis.
pub fn regret_svg(series: &[SvgSeries<'_>]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let floor = 1e-12;
    let log = |v: f64| v.max(floor).log10();

    let len = series.iter().map(|s| s.mean.len()).max().unwrap_or(0).max(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (m, e) in s.mean.iter().zip(s.se) {
            lo = lo.min(log(m - e));
            hi = hi.max(log(m + e));
        }
    }
    if !lo.is_finite() || hi - lo < 1e-9 {
        lo = -1.0;
        hi = 1.0;
    }
    let px = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / (len - 1) as f64;
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * (log(v) - lo) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">trial</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(out, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">regret (log10)</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{lo:.1}</text>"#, PAD - 4.0, H - PAD);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{hi:.1}</text>"#, PAD - 4.0, PAD + 4.0);

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let upper = s.mean.iter().zip(s.se).enumerate().map(|(t, (m, e))| (px(t), py(m + e)));
        let lower = s.mean.iter().zip(s.se).enumerate().rev().map(|(t, (m, e))| (px(t), py(m - e)));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        if !band.is_empty() {
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15"/>"#, band.join(" "));
        }
        let line: Vec<String> = s.mean.iter().enumerate().map(|(t, m)| format!("{:.2},{:.2}", px(t), py(*m))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, line.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 140.0,
            PAD + 16.0 * (i as f64 + 1.0),
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
