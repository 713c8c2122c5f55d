//! End-to-end experiments: scenario construction, the learned TD-PS
//! pipeline, and position-grid gain maps.

use crate::baselines::{pdf_oracle, ps_only_oracle};
use crate::channel::{channel_at, near_field_channel, unit_rho, ChannelMatrix, SystemConfig};
use crate::combiner::{effective_combiner, CombinerConfig, PhaseCodebook};
use crate::geometry::{ArrayGeometry, UePosition};
use crate::ps_learner::{learn_phases, LearnOutcome, LearnerOptions};
use crate::sim::{gain_profile, inner, measure_power, GainProfile};
use crate::td_search::{decimated_bins, search_delays, DelayGrid, SearchResult};
use crate::{Error, Result};

/// UE location used by the reference scenario, meters.
pub const REFERENCE_UE: [f64; 2] = [2.0, -2.0];

/// How each power measurement is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Exact `(P_T/K)|w^H h|²`, regardless of `σ²`.
    Noiseless,
    /// Average of this many noisy snapshots.
    Snapshots(usize),
}

/// Array, user and the resulting channel over the full subcarrier grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub geom: ArrayGeometry,
    pub ue: UePosition,
    /// Per-subcarrier large-scale gain.
    pub rho: Vec<f64>,
    pub channel: ChannelMatrix,
}

impl Scenario {
    pub fn new(cfg: SystemConfig, geom: ArrayGeometry, ue: UePosition, rho: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let channel = near_field_channel(&geom, &ue, &cfg, &rho)?;
        Ok(Self {
            cfg,
            geom,
            ue,
            rho,
            channel,
        })
    }

    /// 256 randomly placed elements over a `255·λ_c/2` aperture with the
    /// user at [`REFERENCE_UE`] and `ρ = 1`.
    pub fn reference(num_td_units: usize, geometry_seed: u64) -> Result<Self> {
        let cfg = SystemConfig::reference(num_td_units)?;
        let geom = ArrayGeometry::random(cfg.num_antennas, cfg.default_aperture(), geometry_seed)?;
        let ue = UePosition::new(REFERENCE_UE[0], REFERENCE_UE[1])?;
        let rho = unit_rho(&cfg);
        Self::new(cfg, geom, ue, rho)
    }

    /// Same array and channel, regrouped into `num_td_units` sub-arrays.
    pub fn with_td_units(&self, num_td_units: usize) -> Result<Self> {
        let m = self.cfg.num_antennas;
        if num_td_units == 0 || !m.is_multiple_of(num_td_units) {
            return Err(Error::InvalidConfig(format!(
                "M = N·P violated ({m} antennas, {num_td_units} TD units)"
            )));
        }
        let mut out = self.clone();
        out.cfg.num_td_units = num_td_units;
        out.cfg.ps_per_td = m / num_td_units;
        Ok(out)
    }

    pub fn codebook(&self) -> PhaseCodebook {
        self.cfg.codebook()
    }

    pub fn center_bin(&self) -> usize {
        crate::channel::nearest_bin(self.channel.freqs(), self.cfg.center_freq)
    }

    pub fn gain_profile(&self, cc: &CombinerConfig) -> Result<GainProfile> {
        gain_profile(cc, &self.channel, &self.cfg)
    }

    pub fn ps_only_oracle(&self) -> Result<CombinerConfig> {
        ps_only_oracle(&self.channel, &self.cfg, &self.codebook())
    }

    pub fn pdf_oracle(&self) -> Result<CombinerConfig> {
        pdf_oracle(&self.geom, &self.ue, &self.channel, &self.cfg, &self.codebook())
    }
}

/// Power meter with one seed per measurement.
struct Meter<'a> {
    h: &'a ChannelMatrix,
    cfg: SystemConfig,
    snapshots: usize,
    seed: u64,
    count: u64,
}

impl<'a> Meter<'a> {
    fn new(h: &'a ChannelMatrix, cfg: &SystemConfig, noise: NoiseMode, seed: u64) -> Self {
        let (cfg, snapshots) = match noise {
            NoiseMode::Noiseless => (
                SystemConfig {
                    noise_power: 0.0,
                    ..cfg.clone()
                },
                1,
            ),
            NoiseMode::Snapshots(s) => (cfg.clone(), s),
        };
        Self {
            h,
            cfg,
            snapshots,
            seed,
            count: 0,
        }
    }

    fn power(&mut self, cc: &CombinerConfig, k: usize) -> Result<f64> {
        let seed = self.seed.wrapping_add(self.count);
        self.count += 1;
        measure_power(cc, self.h, &self.cfg, k, self.snapshots, seed)
    }
}

/// Learns PS phases from power measurements at the center subcarrier with
/// all delays at zero.
pub fn learn_center_phases(
    scn: &Scenario,
    opts: &LearnerOptions,
    noise: NoiseMode,
    seed: u64,
) -> Result<LearnOutcome> {
    let k = scn.center_bin();
    let n = scn.cfg.num_td_units;
    let mut meter = Meter::new(&scn.channel, &scn.cfg, noise, seed);
    learn_phases(
        |phases| meter.power(&CombinerConfig::phases_only(phases.to_vec(), n), k),
        scn.cfg.num_antennas,
        &scn.codebook(),
        opts,
    )
}

/// Delay search from `theta_star`, measuring on the decimated subcarrier set.
pub fn search_scenario_delays(
    scn: &Scenario,
    theta_star: &[f64],
    grid: &DelayGrid,
    noise: NoiseMode,
    seed: u64,
) -> Result<SearchResult> {
    let bins = decimated_bins(scn.channel.num_subcarriers());
    let h = scn.channel.select_bins(&bins)?;
    let mut meter = Meter::new(&h, &scn.cfg, noise, seed);
    search_delays(
        theta_star,
        |cc| (0..bins.len()).map(|k| meter.power(cc, k)).collect(),
        &scn.geom,
        &scn.cfg,
        &scn.codebook(),
        grid,
    )
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub learner: LearnerOptions,
    pub grid: DelayGrid,
    pub noise: NoiseMode,
    /// Seeds measurement noise; the learner has its own seed.
    pub seed: u64,
}

impl PipelineOptions {
    pub fn for_scenario(scn: &Scenario) -> Self {
        Self {
            learner: LearnerOptions::for_array(scn.cfg.num_antennas),
            grid: DelayGrid::default(),
            noise: NoiseMode::Noiseless,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub learn: LearnOutcome,
    pub search: SearchResult,
    pub config: CombinerConfig,
}

/// Learned phases followed by the delay search.
pub fn learned_pipeline(scn: &Scenario, opts: &PipelineOptions) -> Result<PipelineOutcome> {
    let learn = learn_center_phases(scn, &opts.learner, opts.noise, opts.seed)?;
    finish_pipeline(scn, learn, opts)
}

/// Delay search for an already learned phase vector. The learned phases do
/// not depend on `N`, so one learning run can serve several sub-array
/// layouts.
pub fn finish_pipeline(scn: &Scenario, learn: LearnOutcome, opts: &PipelineOptions) -> Result<PipelineOutcome> {
    let search = search_scenario_delays(
        scn,
        &learn.phases,
        &opts.grid,
        opts.noise,
        opts.seed.wrapping_add(1 << 32),
    )?;
    let config = search.config();
    Ok(PipelineOutcome { learn, search, config })
}

/// Rectangular grid of user positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: f64,
}

impl Default for PositionGrid {
    fn default() -> Self {
        Self {
            x_min: 0.5,
            x_max: 4.0,
            y_min: -4.0,
            y_max: 4.0,
            resolution: 0.05,
        }
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

impl PositionGrid {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.x_min, self.x_max, self.y_min, self.y_max, self.resolution];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("position grid"));
        }
        if self.x_min <= 0.0 {
            return Err(Error::InvalidOption("grid x_min must be > 0".into()));
        }
        if self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(Error::InvalidOption("grid ranges must be non-decreasing".into()));
        }
        if self.resolution <= 0.0 {
            return Err(Error::InvalidOption("grid resolution must be > 0".into()));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.resolution)
    }

    pub fn ys(&self) -> Vec<f64> {
        axis(self.y_min, self.y_max, self.resolution)
    }
}

/// `|w(f)^H h_f(q)|²` over a position grid; `values[iy][ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMap {
    pub freq: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Evaluates `cc` at `freq` for a user at every grid point. `rho` is the
/// large-scale gain at `freq`.
pub fn gain_map(
    cc: &CombinerConfig,
    geom: &ArrayGeometry,
    cfg: &SystemConfig,
    freq: f64,
    rho: f64,
    grid: &PositionGrid,
) -> Result<GainMap> {
    grid.validate()?;
    if geom.len() != cfg.num_antennas {
        return Err(Error::dims("geometry elements", cfg.num_antennas, geom.len()));
    }
    let w = effective_combiner(cc, cfg, freq);
    let xs = grid.xs();
    let ys = grid.ys();
    let values = ys
        .iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| {
                    let h = channel_at(geom, &UePosition::new(x, y)?, &[freq], &[rho])?;
                    Ok(inner(&w, (0..h.num_antennas()).map(|m| h.get(m, 0))).norm_sqr())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainMap { freq, xs, ys, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::three_db_bandwidth;

    fn small() -> Scenario {
        let mut cfg = SystemConfig::reference(4).unwrap();
        cfg.num_antennas = 16;
        cfg.ps_per_td = 4;
        cfg.num_subcarriers = 64;
        let geom = ArrayGeometry::random(16, cfg.default_aperture(), 3).unwrap();
        let ue = UePosition::new(0.1, -0.05).unwrap();
        let rho = unit_rho(&cfg);
        Scenario::new(cfg, geom, ue, rho).unwrap()
    }

    #[test]
    fn regrouping_keeps_channel() {
        let s = small();
        let t = s.with_td_units(8).unwrap();
        assert_eq!(t.cfg.ps_per_td, 2);
        assert_eq!(t.channel, s.channel);
        assert!(s.with_td_units(3).is_err());
        assert!(s.with_td_units(0).is_err());
    }

    #[test]
    fn single_point_map_matches_profile() {
        let s = small();
        let cc = s.pdf_oracle().unwrap();
        let gp = s.gain_profile(&cc).unwrap();
        for k in [0, 31, 63] {
            let grid = PositionGrid {
                x_min: s.ue.x(),
                x_max: s.ue.x(),
                y_min: s.ue.y(),
                y_max: s.ue.y(),
                resolution: 0.01,
            };
            let map = gain_map(&cc, &s.geom, &s.cfg, gp.freqs[k], s.rho[k], &grid).unwrap();
            assert_eq!(map.values.len(), 1);
            assert_eq!(map.values[0].len(), 1);
            let g = gp.per_subcarrier[k];
            assert!((map.values[0][0] - g).abs() <= 1e-12 * g);
        }
    }

    #[test]
    fn grid_axes() {
        let g = PositionGrid::default();
        assert_eq!(g.xs().len(), 71);
        assert_eq!(g.ys().len(), 161);
        assert!((g.ys().last().unwrap() - 4.0).abs() < 1e-9);
        assert!(PositionGrid { x_min: 0.0, ..g }.validate().is_err());
        assert!(PositionGrid { resolution: 0.0, ..g }.validate().is_err());
    }

    #[test]
    fn small_pipeline_runs_and_beats_ps_only() {
        let s = small();
        let mut opts = PipelineOptions::for_scenario(&s);
        opts.learner.total_measurements = 600;
        opts.learner.exploit_start = 200;
        opts.learner.critic_refit_period = 100;
        opts.learner.critic.train.iters = 100;
        let out = learned_pipeline(&s, &opts).unwrap();
        assert_eq!(out.learn.history.len(), 600);
        assert!(out.search.best_score >= out.search.ps_only_score);
        let gp = s.gain_profile(&out.config).unwrap();
        let bw = three_db_bandwidth(&gp, s.cfg.center_freq, s.cfg.bin_width());
        assert!(bw > 0.0);

        let again = learned_pipeline(&s, &opts).unwrap();
        assert_eq!(again.config, out.config);
    }

    #[test]
    fn noisy_measurements_are_seeded() {
        let mut s = small();
        s.cfg.noise_power = 1e-12;
        let mut opts = PipelineOptions::for_scenario(&s);
        opts.noise = NoiseMode::Snapshots(4);
        opts.learner.total_measurements = 300;
        opts.learner.exploit_start = 300;
        let a = learn_center_phases(&s, &opts.learner, opts.noise, 7).unwrap();
        let b = learn_center_phases(&s, &opts.learner, opts.noise, 7).unwrap();
        assert_eq!(a.phases, b.phases);
        assert_eq!(a.power, b.power);
    }
}
