//! Geometry-assisted delay design.
//!
//! The DDF is approximated by a two-piece linear function through the
//! origin with breakpoint `(a_x, a_y)` and end value `b` at `Δ = 2`. Each
//! candidate on a finite `(a_x, a_y, b)` grid is turned into TD delays by
//! sampling at the sub-array centers. The phases are recompensated and the
//! candidate is scored by the mean amplitude gain over measured subcarriers.

use std::fmt::Write as _;

use crate::channel::SystemConfig;
use crate::combiner::{recompensate_phases, CombinerConfig, PhaseCodebook};
use crate::geometry::ArrayGeometry;
use crate::sim::mean_amplitude;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Relative slack on the `(a_x, a_y, b)` bounds.
const BOUND_SLACK: f64 = 1e-12;

/// Subcarriers scored per candidate during the search.
pub const SEARCH_BINS: usize = 128;

/// Fewest subcarriers scored when decimating.
pub const MIN_SEARCH_BINS: usize = 16;

/// Two-piece linear DDF model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearApprox {
    pub ax: f64,
    pub ay: f64,
    pub b: f64,
}

impl LinearApprox {
    /// Checks `0 ≤ a_x ≤ 2`, `|a_y| ≤ (D/2)·a_x` and `|b| ≤ D`.
    pub fn new(ax: f64, ay: f64, b: f64, aperture: f64) -> Result<Self> {
        if !(ax.is_finite() && ay.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite("linear approximation"));
        }
        if !(0.0..=2.0).contains(&ax) {
            return Err(Error::OutOfRange {
                what: "a_x",
                value: ax,
                range: "[0, 2]".into(),
            });
        }
        let ay_max = 0.5 * aperture * ax;
        if ay.abs() > ay_max * (1.0 + BOUND_SLACK) {
            return Err(Error::OutOfRange {
                what: "a_y",
                value: ay,
                range: format!("[-{ay_max}, {ay_max}]"),
            });
        }
        if b.abs() > aperture * (1.0 + BOUND_SLACK) {
            return Err(Error::OutOfRange {
                what: "b",
                value: b,
                range: format!("[-{aperture}, {aperture}]"),
            });
        }
        Ok(Self { ax, ay, b })
    }

    /// Approximate DDF at `delta ∈ [0, 2]`, in meters.
    ///
    /// `a_x = 0` degenerates to the single line `(b/2)·Δ`; with `a_x = 2`
    /// only the first piece exists.
    pub fn eval(&self, delta: f64) -> Result<f64> {
        if !(0.0..=2.0).contains(&delta) {
            return Err(Error::OutOfRange {
                what: "relative coefficient",
                value: delta,
                range: "[0, 2]".into(),
            });
        }
        Ok(self.eval_unchecked(delta))
    }

    fn eval_unchecked(&self, delta: f64) -> f64 {
        if self.ax == 0.0 {
            0.5 * self.b * delta
        } else if delta <= self.ax {
            self.ay / self.ax * delta
        } else {
            (self.b - self.ay) / (2.0 - self.ax) * (delta - self.ax) + self.ay
        }
    }
}

pub fn linear_ddf(ap: &LinearApprox, delta: f64) -> Result<f64> {
    ap.eval(delta)
}

/// Grid sizes for `a_x`, `a_y | a_x` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayGrid {
    pub ax_points: usize,
    pub ay_points: usize,
    pub b_points: usize,
}

impl Default for DelayGrid {
    fn default() -> Self {
        Self {
            ax_points: 9,
            ay_points: 17,
            b_points: 17,
        }
    }
}

/// `n` evenly spaced points on `[lo, hi]`; a single point sits at the middle.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl DelayGrid {
    pub fn validate(&self) -> Result<()> {
        if self.ax_points == 0 || self.ay_points == 0 || self.b_points == 0 {
            return Err(Error::InvalidOption("delay grid sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// Enumeration order: `a_x` outermost, then `a_y`, then `b`. At
    /// `a_x = 0` the `a_y` range collapses to a single zero.
    pub fn candidates(&self, aperture: f64) -> Result<Vec<LinearApprox>> {
        self.validate()?;
        let mut out = Vec::new();
        for ax in linspace(0.0, 2.0, self.ax_points) {
            let half = 0.5 * aperture * ax;
            let ays = if ax == 0.0 {
                vec![0.0]
            } else {
                linspace(-half, half, self.ay_points)
            };
            for ay in ays {
                for b in linspace(-aperture, aperture, self.b_points) {
                    out.push(LinearApprox::new(ax, ay, b, aperture)?);
                }
            }
        }
        Ok(out)
    }

    pub fn len(&self, aperture: f64) -> usize {
        self.candidates(aperture).map(|c| c.len()).unwrap_or(0)
    }
}

/// Relative coefficient at the center of each sub-array,
/// `Δ_n = 1 - (α_first + α_last)/2`.
pub fn subarray_deltas(geom: &ArrayGeometry, num_td_units: usize, ps_per_td: usize) -> Result<Vec<f64>> {
    if num_td_units * ps_per_td != geom.len() || ps_per_td == 0 {
        return Err(Error::dims("sub-array layout", geom.len(), num_td_units * ps_per_td));
    }
    let a = geom.alphas();
    Ok((0..num_td_units)
        .map(|n| 1.0 - 0.5 * (a[n * ps_per_td] + a[(n + 1) * ps_per_td - 1]))
        .collect())
}

/// Delays from sampled DDF values (meters): divide by c, shift so the
/// smallest is zero, clip to `[0, τ_max]`.
pub fn delays_from_ddf(ddf_values: &[f64], tau_max: f64) -> Vec<f64> {
    let raw: Vec<f64> = ddf_values.iter().map(|d| d / SPEED_OF_LIGHT).collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    raw.iter().map(|t| (t - min).clamp(0.0, tau_max)).collect()
}

/// Delays for a linear approximation sampled at `deltas`.
pub fn delays_from_approx(ap: &LinearApprox, deltas: &[f64], tau_max: f64) -> Result<Vec<f64>> {
    let ddf = deltas.iter().map(|&d| ap.eval(d)).collect::<Result<Vec<_>>>()?;
    Ok(delays_from_ddf(&ddf, tau_max))
}

/// Evenly spaced subset of `0..k` used to score candidates: `SEARCH_BINS`
/// bins at the centers of equal groups, or every bin when
/// `k < SEARCH_BINS`.
pub fn decimated_bins(k: usize) -> Vec<usize> {
    if k <= SEARCH_BINS.max(MIN_SEARCH_BINS) {
        return (0..k).collect();
    }
    let step = k / SEARCH_BINS;
    let n = (k / step).max(MIN_SEARCH_BINS);
    (0..n).map(|i| i * step + step / 2).filter(|&b| b < k).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTraceRow {
    pub approx: LinearApprox,
    /// Mean amplitude gain over the measured subcarriers.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub tau: Vec<f64>,
    /// Recompensated phases that go with `tau`.
    pub theta: Vec<f64>,
    pub best: LinearApprox,
    pub best_score: f64,
    /// Score of `theta_star` with all delays zero.
    pub ps_only_score: f64,
    pub trace: Vec<SearchTraceRow>,
}

impl SearchResult {
    pub fn config(&self) -> CombinerConfig {
        CombinerConfig {
            theta: self.theta.clone(),
            tau: self.tau.clone(),
        }
    }

    /// CSV with columns `ax,ay,b,score_amplitude_mean,score_db_rel_ps_only`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("ax,ay,b,score_amplitude_mean,score_db_rel_ps_only\n");
        for row in &self.trace {
            let rel = 20.0 * (row.score / self.ps_only_score).log10();
            writeln!(
                out,
                "{:.6},{:.9},{:.9},{:e},{:.6}",
                row.approx.ax, row.approx.ay, row.approx.b, row.score, rel
            )
            .unwrap();
        }
        out
    }
}

/// Runs the three-step cycle over every grid candidate plus the zero-delay
/// candidate, which is evaluated first.
///
/// `measure` returns per-subcarrier powers for a configuration; the
/// subcarrier set is whatever the caller measures (typically
/// [`decimated_bins`]). Ties keep the earliest candidate.
pub fn search_delays<F>(
    theta_star: &[f64],
    mut measure: F,
    geom: &ArrayGeometry,
    cfg: &SystemConfig,
    cb: &PhaseCodebook,
    grid: &DelayGrid,
) -> Result<SearchResult>
where
    F: FnMut(&CombinerConfig) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    if theta_star.len() != cfg.num_antennas {
        return Err(Error::dims("theta", cfg.num_antennas, theta_star.len()));
    }
    let deltas = subarray_deltas(geom, cfg.num_td_units, cfg.ps_per_td)?;
    let aperture = geom.aperture();

    let zero = LinearApprox::new(0.0, 0.0, 0.0, aperture)?;
    let mut candidates = vec![zero];
    candidates.extend(grid.candidates(aperture)?);

    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, LinearApprox, Vec<f64>, Vec<f64>)> = None;
    for approx in candidates {
        let tau = delays_from_approx(&approx, &deltas, cfg.tau_max)?;
        let theta = recompensate_phases(theta_star, &tau, cfg, cb)?;
        let cc = CombinerConfig { theta, tau };
        let powers = measure(&cc)?;
        if powers.is_empty() {
            return Err(Error::Measurement("no subcarrier powers returned".into()));
        }
        let score = mean_amplitude(&powers);
        trace.push(SearchTraceRow { approx, score });
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, approx, cc.tau, cc.theta));
        }
    }

    let ps_only_score = trace[0].score;
    let (best_score, best, tau, theta) = best.expect("zero candidate is always evaluated");
    Ok(SearchResult {
        tau,
        theta,
        best,
        best_score,
        ps_only_score,
        trace,
    })
}
