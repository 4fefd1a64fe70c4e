//! Diagnostics for chaotic motion: delay embedding, largest Lyapunov
//! exponent (Rosenstein), Poincaré sections, bifurcation sweeps and scalar
//! signal metrics.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::dde_sim::{fmt_f64, simulate, Mode, ScenarioConfig, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChaosError {
    #[error("series too short: need {needed} samples, have {have}")]
    TooShort { needed: usize, have: usize },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("no neighbour outside the Theiler window")]
    NoNeighbours,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Every `stride`-th sample starting at the first.
pub fn downsample(x: &[f64], stride: usize) -> Vec<f64> {
    x.iter().step_by(stride.max(1)).copied().collect()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// `Σ |x[k+1] − x[k]|`.
pub fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Indices of local maxima: `x[i−1] < x[i]` and the next sample differing
/// from `x[i]` is smaller. A plateau peak is reported at its first sample.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i - 1] < x[i] {
            let mut k = i + 1;
            while k < x.len() && x[k] == x[i] {
                k += 1;
            }
            if k < x.len() && x[k] < x[i] {
                out.push(i);
            }
            i = k;
        } else {
            i += 1;
        }
    }
    out
}

/// Sample autocorrelation of the mean-removed series at `lag`.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum();
    cov / var
}

/// First lag in `1..=max_lag` where the autocorrelation is `≤ 0`.
pub fn autocorr_first_zero(x: &[f64], max_lag: usize) -> Option<usize> {
    (1..=max_lag.min(x.len().saturating_sub(1))).find(|&k| autocorrelation(x, k) <= 0.0)
}

/// Rows `[x[i], x[i+τ], …, x[i+(dim−1)τ]]`.
pub fn delay_embed(x: &[f64], dim: usize, tau: usize) -> Result<Vec<Vec<f64>>, ChaosError> {
    if dim == 0 || tau == 0 {
        return Err(ChaosError::BadParam(format!("dim and tau must be positive, got {dim}, {tau}")));
    }
    let span = (dim - 1) * tau;
    if x.len() <= span {
        return Err(ChaosError::TooShort { needed: span + 1, have: x.len() });
    }
    Ok((0..x.len() - span).map(|i| (0..dim).map(|k| x[i + k * tau]).collect()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovOptions {
    pub dim: usize,
    /// Embedding delay in samples; chosen from the autocorrelation when
    /// absent.
    pub tau: Option<usize>,
    /// Upper bound on the automatic delay, in samples.
    pub max_tau: usize,
    /// Minimum index separation of neighbour pairs.
    pub theiler: usize,
    /// Number of divergence steps to follow.
    pub horizon: usize,
}

impl LyapunovOptions {
    /// Defaults for a series sampled every `dt` seconds: dimension 4, delay
    /// capped at 5 s, Theiler window 4 s, divergence followed for 30 s.
    pub fn for_step(dt: f64) -> Self {
        Self {
            dim: 4,
            tau: None,
            max_tau: (5.0 / dt).round() as usize,
            theiler: (4.0 / dt).round() as usize,
            horizon: (30.0 / dt).round() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    /// Slope of the mean log divergence over the fit window, 1/s.
    pub lambda: f64,
    pub tau: usize,
    /// `(t, ⟨ln d(t)⟩)` for `t = k dt`.
    pub curve: Vec<(f64, f64)>,
    /// Fit window in seconds.
    pub fit_window: (f64, f64),
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Window of the divergence curve used for the slope: from where the curve
/// has completed 10% of its total rise to where it first reaches 90%. A curve
/// whose mean separation never doubles has no growth region and is fitted
/// over its whole length.
pub fn linear_region(curve: &[(f64, f64)]) -> (usize, usize) {
    let y0 = curve[0].1;
    let ymax = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let rise = ymax - y0;
    if !(rise >= std::f64::consts::LN_2) {
        return (0, curve.len() - 1);
    }
    let first_at = |frac: f64| curve.iter().position(|p| p.1 >= y0 + frac * rise).unwrap_or(0);
    let a = first_at(0.1);
    let b = first_at(0.9).max(a + 1).min(curve.len() - 1);
    (a, b)
}

/// Relative distance below which two embedded points count as the same point.
pub const COINCIDENT_REL: f64 = 1e-9;

/// Rosenstein estimate of the largest Lyapunov exponent of a scalar series
/// sampled every `dt` seconds.
pub fn max_lyapunov(x: &[f64], dt: f64, opts: &LyapunovOptions) -> Result<LyapunovEstimate, ChaosError> {
    if !(dt > 0.0) {
        return Err(ChaosError::BadParam(format!("dt must be positive, got {dt}")));
    }
    let tau = match opts.tau {
        Some(t) => t,
        None => autocorr_first_zero(x, opts.max_tau).unwrap_or(opts.max_tau.max(1)),
    };
    let emb = delay_embed(x, opts.dim, tau)?;
    let m = emb.len();
    if m <= opts.horizon + opts.theiler + 2 {
        return Err(ChaosError::TooShort { needed: opts.horizon + opts.theiler + 3, have: m });
    }
    let usable = m - opts.horizon;
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    // Neighbours closer than this are coincident up to round-off and carry
    // no divergence information.
    let scale2 = emb.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / m as f64;
    let floor = COINCIDENT_REL * COINCIDENT_REL * scale2;

    let pairs: Vec<(usize, usize)> = (0..usable)
        .into_par_iter()
        .filter_map(|i| {
            let mut best = f64::INFINITY;
            let mut arg = None;
            for j in 0..usable {
                if i.abs_diff(j) <= opts.theiler {
                    continue;
                }
                let d = dist2(&emb[i], &emb[j]);
                if d > floor && d < best {
                    best = d;
                    arg = Some(j);
                }
            }
            arg.map(|j| (i, j))
        })
        .collect();
    if pairs.is_empty() {
        return Err(ChaosError::NoNeighbours);
    }

    let curve: Vec<(f64, f64)> = (0..=opts.horizon)
        .map(|k| {
            let (sum, cnt) = pairs.iter().fold((0.0, 0usize), |(s, c), &(i, j)| {
                let d = dist2(&emb[i + k], &emb[j + k]);
                if d > 0.0 {
                    (s + 0.5 * d.ln(), c + 1)
                } else {
                    (s, c)
                }
            });
            (k as f64 * dt, if cnt > 0 { sum / cnt as f64 } else { f64::NEG_INFINITY })
        })
        .collect();

    let (a, b) = linear_region(&curve);
    let lambda = ls_slope(&curve[a..=b]);
    Ok(LyapunovEstimate { lambda, tau, fit_window: (curve[a].0, curve[b].0), curve })
}

/// Upward crossings of `θ1 = level` with `θ̇1 > 0`, returned as `(θ2, θ̇2)`
/// linearly interpolated to the crossing.
pub fn poincare_section(
    theta1: &[f64],
    theta2: &[f64],
    omega1: &[f64],
    omega2: &[f64],
    level: f64,
) -> Vec<(f64, f64)> {
    let n = theta1.len().min(theta2.len()).min(omega1.len()).min(omega2.len());
    let mut out = Vec::new();
    for k in 1..n {
        let (a, b) = (theta1[k - 1] - level, theta1[k] - level);
        if a < 0.0 && b >= 0.0 {
            let s = a / (a - b);
            let w1 = omega1[k - 1] + s * (omega1[k] - omega1[k - 1]);
            if w1 > 0.0 {
                out.push((
                    theta2[k - 1] + s * (theta2[k] - theta2[k - 1]),
                    omega2[k - 1] + s * (omega2[k] - omega2[k - 1]),
                ));
            }
        }
    }
    out
}

/// Greedy count of points at least `tol` apart (Euclidean).
pub fn distinct_points(points: &[(f64, f64)], tol: f64) -> usize {
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        if kept.iter().all(|q| (p.0 - q.0).hypot(p.1 - q.1) >= tol) {
            kept.push(p);
        }
    }
    kept.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationColumn {
    pub delay: f64,
    /// Local maxima of θ2 after the transient.
    pub maxima: Vec<f64>,
}

impl BifurcationColumn {
    pub fn spread(&self) -> f64 {
        let lo = self.maxima.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.maxima.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// Single-robot PD runs over a list of dead times, collecting the strict
/// local maxima of θ2 for `t ≥ discard`. Columns come back in input order.
pub fn bifurcation_sweep(
    base: &ScenarioConfig,
    delays: &[f64],
    discard: f64,
) -> Result<Vec<BifurcationColumn>, ChaosError> {
    if !(discard >= 0.0) || discard >= base.t_end {
        return Err(ChaosError::BadParam(format!("discard {discard} must lie in [0, t_end)")));
    }
    delays
        .par_iter()
        .map(|&l| {
            let cfg = ScenarioConfig { mode: Mode::SinglePd, l_slave: l, ..base.clone() };
            let out = simulate(&cfg)?;
            let theta2 = out.plant.theta(1);
            let start = out.plant.records.partition_point(|r| r.t < discard - 1e-9 * cfg.h);
            let maxima = local_maxima(&theta2)
                .into_iter()
                .filter(|&i| i >= start)
                .map(|i| theta2[i])
                .collect();
            Ok(BifurcationColumn { delay: l, maxima })
        })
        .collect()
}

pub fn write_bifurcation_csv<W: Write>(mut w: W, cols: &[BifurcationColumn]) -> io::Result<()> {
    writeln!(w, "L,theta2_max")?;
    for c in cols {
        for m in &c.maxima {
            writeln!(w, "{},{}", fmt_f64(c.delay), fmt_f64(*m))?;
        }
    }
    Ok(())
}

pub fn write_poincare_csv<W: Write>(mut w: W, points: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "theta2,omega2")?;
    for p in points {
        writeln!(w, "{},{}", fmt_f64(p.0), fmt_f64(p.1))?;
    }
    Ok(())
}

/// Divergence curve followed by a `# lambda=…` summary line.
pub fn write_lyapunov_csv<W: Write>(mut w: W, est: &LyapunovEstimate) -> io::Result<()> {
    writeln!(w, "t,mean_log_div")?;
    for p in &est.curve {
        writeln!(w, "{},{}", fmt_f64(p.0), fmt_f64(p.1))?;
    }
    writeln!(
        w,
        "# lambda={},tau={},fit_t0={},fit_t1={}",
        fmt_f64(est.lambda),
        est.tau,
        fmt_f64(est.fit_window.0),
        fmt_f64(est.fit_window.1)
    )
}

pub fn write_embedding_csv<W: Write>(mut w: W, rows: &[Vec<f64>]) -> io::Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_metrics() {
        assert_eq!(rms(&[]), 0.0);
        assert_eq!(rms(&[3.0, -3.0, 3.0]), 3.0);
        assert_eq!(total_variation(&[0.0, 1.0, -1.0, 2.0]), 6.0);
        assert_eq!(total_variation(&[5.0; 10]), 0.0);
        assert_eq!(total_variation(&[1.0]), 0.0);
    }

    #[test]
    fn maxima_and_plateaus() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.0, 2.0, 2.0, 0.0, 3.0, 1.0]), vec![1, 3, 6]);
        assert_eq!(local_maxima(&[0.0, 2.0, 2.0, 3.0, 1.0]), vec![3]);
        assert!(local_maxima(&[1.0, 2.0]).is_empty());
    }

    #[test]
    fn embedding_shape() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let e = delay_embed(&x, 3, 2).unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e[0], vec![0.0, 2.0, 4.0]);
        assert_eq!(e[5], vec![5.0, 7.0, 9.0]);
        assert!(matches!(delay_embed(&x, 4, 4), Err(ChaosError::TooShort { .. })));
        assert!(delay_embed(&x, 0, 1).is_err());
    }

    #[test]
    fn acf_zero_of_sine() {
        let dt = 0.01;
        let x: Vec<f64> = (0..10_000).map(|k| (k as f64 * dt).sin()).collect();
        // Quarter period of a unit-frequency sine.
        let z = autocorr_first_zero(&x, 1000).unwrap();
        assert!((z as f64 * dt - std::f64::consts::FRAC_PI_2).abs() < 0.05);
    }

    #[test]
    fn linear_region_of_ramp_then_plateau() {
        let curve: Vec<(f64, f64)> =
            (0..100).map(|k| (k as f64, if k < 50 { k as f64 } else { 50.0 })).collect();
        let (a, b) = linear_region(&curve);
        assert_eq!((a, b), (5, 45));
        assert!((ls_slope(&curve[a..=b]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poincare_crossing_interpolated() {
        let t1 = [0.0, 1.0, 0.0, 1.0];
        let t2 = [0.0, 2.0, 0.0, 4.0];
        let w1 = [1.0, 1.0, 0.5, 1.0];
        let w2 = [0.0, 0.0, 0.0, 0.0];
        let p = poincare_section(&t1, &t2, &w1, &w2, 0.5);
        assert_eq!(p, vec![(1.0, 0.0), (2.0, 0.0)]);
        let w1 = [-1.0, -1.0, -1.0, -1.0];
        assert!(poincare_section(&t1, &t2, &w1, &w2, 0.5).is_empty());
    }

    #[test]
    fn distinct_point_count() {
        let pts = [(0.0, 0.0), (0.0, 1e-4), (1.0, 0.0), (1.0, 0.5)];
        assert_eq!(distinct_points(&pts, 1e-3), 3);
    }

    #[test]
    fn periodic_signal_has_no_positive_exponent() {
        let dt = 0.01;
        let x: Vec<f64> =
            (0..12_000).map(|k| (k as f64 * dt).sin() + 0.5 * (2.0 * k as f64 * dt).sin()).collect();
        let opts = LyapunovOptions { horizon: 500, ..LyapunovOptions::for_step(dt) };
        let est = max_lyapunov(&x, dt, &opts).unwrap();
        assert!(est.lambda.abs() < 0.05, "lambda {}", est.lambda);
    }

    #[test]
    fn logistic_map_exponent() {
        // Fully chaotic logistic map: exponent ln 2 per iteration.
        let mut x = vec![0.3];
        for k in 0..5000 {
            let v: f64 = x[k];
            x.push(4.0 * v * (1.0 - v));
        }
        let opts = LyapunovOptions { dim: 1, tau: Some(1), max_tau: 1, theiler: 10, horizon: 8 };
        let est = max_lyapunov(&x[100..], 1.0, &opts).unwrap();
        assert!((est.lambda - std::f64::consts::LN_2).abs() < 0.15, "lambda {}", est.lambda);
    }
}
