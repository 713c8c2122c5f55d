//! Flat `section.key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use tdps_core::channel::{flat_magnitude_rho, unit_rho, SystemConfig};
use tdps_core::geometry::{ArrayGeometry, UePosition};
use tdps_core::pipeline::{NoiseMode, PipelineOptions, PositionGrid, Scenario};
use tdps_core::ps_learner::{CriticSettings, LearnerOptions};
use tdps_core::critic::TrainOptions;
use tdps_core::td_search::DelayGrid;
use tdps_core::SPEED_OF_LIGHT;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("`{key}`: {msg}")]
    Constraint { key: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Uniform,
    Random,
}

/// Large-scale gain model over the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoModel {
    /// `ρ_k = 1`
    Unit,
    /// `ρ_k = f_k / f_c`, flat channel magnitude
    Flat,
}

/// Which combiner a heatmap evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerSource {
    PsOnly,
    Pdf,
    Learned,
}

/// Heatmap frequency: a band landmark or an explicit value in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreqSel {
    Low,
    Center,
    High,
    Hz(f64),
}

impl FreqSel {
    pub fn label(&self) -> String {
        match self {
            FreqSel::Low => "low".into(),
            FreqSel::Center => "center".into(),
            FreqSel::High => "high".into(),
            FreqSel::Hz(f) => format!("{f}Hz"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_antennas: usize,
    pub num_td_units: usize,
    pub num_subcarriers: usize,
    pub center_freq: f64,
    pub bandwidth: f64,
    pub ps_bits: u32,
    /// `None`: `D/c`.
    pub tau_max: Option<f64>,
    pub tx_power: f64,
    pub noise_power: f64,
    pub rho: RhoModel,

    pub geometry: GeometryKind,
    pub geometry_seed: u64,
    /// `None`: `(M-1)·λ_c/2`.
    pub aperture: Option<f64>,

    pub ue: [f64; 2],

    pub total_measurements: usize,
    /// `None`: `M/4`.
    pub perturb_count: Option<usize>,
    pub refit_period: usize,
    pub exploit_start: usize,
    pub critic_rank: usize,
    pub critic_lr: f64,
    pub critic_iters: usize,
    pub critic_batch: usize,

    pub grid: DelayGrid,
    pub noise: NoiseMode,
    pub seed: u64,
    pub output_dir: PathBuf,

    pub n_sweep: Vec<usize>,
    pub oracle: bool,

    pub heatmap_grid: PositionGrid,
    pub heatmap_freqs: Vec<FreqSel>,
    pub heatmap_combiner: CombinerSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let learner = LearnerOptions::for_array(256);
        let train = TrainOptions::default();
        Self {
            num_antennas: 256,
            num_td_units: 16,
            num_subcarriers: 2048,
            center_freq: 100e9,
            bandwidth: 10e9,
            ps_bits: 3,
            tau_max: None,
            tx_power: 1.0,
            noise_power: 0.0,
            rho: RhoModel::Unit,
            geometry: GeometryKind::Random,
            geometry_seed: 1,
            aperture: None,
            ue: [2.0, -2.0],
            total_measurements: learner.total_measurements,
            perturb_count: None,
            refit_period: learner.critic_refit_period,
            exploit_start: learner.exploit_start,
            critic_rank: CriticSettings::default().rank,
            critic_lr: train.lr,
            critic_iters: train.iters,
            critic_batch: train.batch,
            grid: DelayGrid::default(),
            noise: NoiseMode::Noiseless,
            seed: 0,
            output_dir: PathBuf::from("out"),
            n_sweep: vec![0, 8, 16],
            oracle: false,
            heatmap_grid: PositionGrid::default(),
            heatmap_freqs: vec![FreqSel::Low, FreqSel::Center, FreqSel::High],
            heatmap_combiner: CombinerSource::Pdf,
        }
    }
}

/// Every key with its description, in emission order.
pub const KEYS: &[(&str, &str)] = &[
    ("system.M", "antenna elements"),
    ("system.N", "TD units; must divide M"),
    ("system.K", "subcarriers"),
    ("system.fc_hz", "center frequency"),
    ("system.bandwidth_hz", "total bandwidth"),
    ("system.ps_bits", "phase shifter resolution"),
    ("system.tau_max_s", "largest TD delay; auto = aperture / c"),
    ("system.tx_power_w", "transmit power, split over subcarriers"),
    ("system.noise_power_w", "noise power per subcarrier"),
    ("system.rho", "large-scale gain: unit | flat (f/fc)"),
    ("geometry.kind", "random | uniform"),
    ("geometry.seed", "seed for random element positions"),
    ("geometry.aperture_m", "array length; auto = (M-1) * lambda_c / 2"),
    ("ue.x", "user distance from the array axis, m"),
    ("ue.y", "user offset along the array axis, m"),
    ("learner.total_measurements", "power measurements for phase learning"),
    ("learner.perturb_count", "initial phases changed per exploration step; auto = M/4"),
    ("learner.refit_period", "measurements between critic refits"),
    ("learner.exploit_start", "measurement index of the first refit"),
    ("learner.critic_rank", "columns of the critic factor Q"),
    ("learner.critic_lr", "initial critic step size"),
    ("learner.critic_iters", "gradient steps per refit"),
    ("learner.critic_batch", "mini-batch size; the whole buffer when larger"),
    ("grid.ax_points", "breakpoint positions searched"),
    ("grid.ay_points", "breakpoint values searched per position"),
    ("grid.b_points", "end values searched"),
    ("noise.mode", "noiseless | snapshots"),
    ("noise.snapshots", "snapshots averaged per measurement in snapshots mode"),
    ("experiment.seed", "seed for learning and measurement noise"),
    ("output.dir", "directory for result files"),
    ("profile.n_sweep", "comma-separated TD unit counts; 0 = PS-only"),
    ("profile.oracle", "use the oracle combiners instead of learning"),
    ("heatmap.x_min", "m"),
    ("heatmap.x_max", "m"),
    ("heatmap.y_min", "m"),
    ("heatmap.y_max", "m"),
    ("heatmap.resolution", "grid spacing, m"),
    ("heatmap.freqs", "comma-separated: low | center | high | frequency in Hz"),
    ("heatmap.combiner", "ps_only | pdf | learned"),
];

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("auto".into(), |x| x.to_string())
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn parse_opt<T: std::str::FromStr>(v: &str) -> Result<Option<T>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if v.is_empty() {
        return Err("empty list".into());
    }
    v.split(',').map(|s| f(s.trim())).collect()
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

impl ExperimentConfig {
    /// Current value of `key` in config syntax.
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "system.M" => self.num_antennas.to_string(),
            "system.N" => self.num_td_units.to_string(),
            "system.K" => self.num_subcarriers.to_string(),
            "system.fc_hz" => self.center_freq.to_string(),
            "system.bandwidth_hz" => self.bandwidth.to_string(),
            "system.ps_bits" => self.ps_bits.to_string(),
            "system.tau_max_s" => fmt_opt(&self.tau_max),
            "system.tx_power_w" => self.tx_power.to_string(),
            "system.noise_power_w" => self.noise_power.to_string(),
            "system.rho" => match self.rho {
                RhoModel::Unit => "unit".into(),
                RhoModel::Flat => "flat".into(),
            },
            "geometry.kind" => match self.geometry {
                GeometryKind::Uniform => "uniform".into(),
                GeometryKind::Random => "random".into(),
            },
            "geometry.seed" => self.geometry_seed.to_string(),
            "geometry.aperture_m" => fmt_opt(&self.aperture),
            "ue.x" => self.ue[0].to_string(),
            "ue.y" => self.ue[1].to_string(),
            "learner.total_measurements" => self.total_measurements.to_string(),
            "learner.perturb_count" => fmt_opt(&self.perturb_count),
            "learner.refit_period" => self.refit_period.to_string(),
            "learner.exploit_start" => self.exploit_start.to_string(),
            "learner.critic_rank" => self.critic_rank.to_string(),
            "learner.critic_lr" => self.critic_lr.to_string(),
            "learner.critic_iters" => self.critic_iters.to_string(),
            "learner.critic_batch" => self.critic_batch.to_string(),
            "grid.ax_points" => self.grid.ax_points.to_string(),
            "grid.ay_points" => self.grid.ay_points.to_string(),
            "grid.b_points" => self.grid.b_points.to_string(),
            "noise.mode" => match self.noise {
                NoiseMode::Noiseless => "noiseless".into(),
                NoiseMode::Snapshots(_) => "snapshots".into(),
            },
            "noise.snapshots" => match self.noise {
                NoiseMode::Noiseless => "1".into(),
                NoiseMode::Snapshots(s) => s.to_string(),
            },
            "experiment.seed" => self.seed.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "profile.n_sweep" => join(&self.n_sweep, |n| n.to_string()),
            "profile.oracle" => self.oracle.to_string(),
            "heatmap.x_min" => self.heatmap_grid.x_min.to_string(),
            "heatmap.x_max" => self.heatmap_grid.x_max.to_string(),
            "heatmap.y_min" => self.heatmap_grid.y_min.to_string(),
            "heatmap.y_max" => self.heatmap_grid.y_max.to_string(),
            "heatmap.resolution" => self.heatmap_grid.resolution.to_string(),
            "heatmap.freqs" => join(&self.heatmap_freqs, |f| match f {
                FreqSel::Hz(hz) => hz.to_string(),
                other => other.label(),
            }),
            "heatmap.combiner" => match self.heatmap_combiner {
                CombinerSource::PsOnly => "ps_only".into(),
                CombinerSource::Pdf => "pdf".into(),
                CombinerSource::Learned => "learned".into(),
            },
            _ => return None,
        };
        Some(v)
    }

    /// Sets `key` from config syntax. `Ok(false)` for an unknown key.
    fn set(&mut self, key: &str, v: &str, snapshots: &mut Option<usize>) -> Result<bool, String> {
        match key {
            "system.M" => self.num_antennas = parse_num(v)?,
            "system.N" => self.num_td_units = parse_num(v)?,
            "system.K" => self.num_subcarriers = parse_num(v)?,
            "system.fc_hz" => self.center_freq = parse_num(v)?,
            "system.bandwidth_hz" => self.bandwidth = parse_num(v)?,
            "system.ps_bits" => self.ps_bits = parse_num(v)?,
            "system.tau_max_s" => self.tau_max = parse_opt(v)?,
            "system.tx_power_w" => self.tx_power = parse_num(v)?,
            "system.noise_power_w" => self.noise_power = parse_num(v)?,
            "system.rho" => {
                self.rho = match v {
                    "unit" => RhoModel::Unit,
                    "flat" => RhoModel::Flat,
                    _ => return Err(format!("expected unit or flat, got `{v}`")),
                }
            }
            "geometry.kind" => {
                self.geometry = match v {
                    "uniform" => GeometryKind::Uniform,
                    "random" => GeometryKind::Random,
                    _ => return Err(format!("expected random or uniform, got `{v}`")),
                }
            }
            "geometry.seed" => self.geometry_seed = parse_num(v)?,
            "geometry.aperture_m" => self.aperture = parse_opt(v)?,
            "ue.x" => self.ue[0] = parse_num(v)?,
            "ue.y" => self.ue[1] = parse_num(v)?,
            "learner.total_measurements" => self.total_measurements = parse_num(v)?,
            "learner.perturb_count" => self.perturb_count = parse_opt(v)?,
            "learner.refit_period" => self.refit_period = parse_num(v)?,
            "learner.exploit_start" => self.exploit_start = parse_num(v)?,
            "learner.critic_rank" => self.critic_rank = parse_num(v)?,
            "learner.critic_lr" => self.critic_lr = parse_num(v)?,
            "learner.critic_iters" => self.critic_iters = parse_num(v)?,
            "learner.critic_batch" => self.critic_batch = parse_num(v)?,
            "grid.ax_points" => self.grid.ax_points = parse_num(v)?,
            "grid.ay_points" => self.grid.ay_points = parse_num(v)?,
            "grid.b_points" => self.grid.b_points = parse_num(v)?,
            "noise.mode" => {
                self.noise = match v {
                    "noiseless" => NoiseMode::Noiseless,
                    "snapshots" => NoiseMode::Snapshots(1),
                    _ => return Err(format!("expected noiseless or snapshots, got `{v}`")),
                }
            }
            "noise.snapshots" => *snapshots = Some(parse_num(v)?),
            "experiment.seed" => self.seed = parse_num(v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "profile.n_sweep" => self.n_sweep = parse_list(v, parse_num)?,
            "profile.oracle" => self.oracle = parse_bool(v)?,
            "heatmap.x_min" => self.heatmap_grid.x_min = parse_num(v)?,
            "heatmap.x_max" => self.heatmap_grid.x_max = parse_num(v)?,
            "heatmap.y_min" => self.heatmap_grid.y_min = parse_num(v)?,
            "heatmap.y_max" => self.heatmap_grid.y_max = parse_num(v)?,
            "heatmap.resolution" => self.heatmap_grid.resolution = parse_num(v)?,
            "heatmap.freqs" => {
                self.heatmap_freqs = parse_list(v, |s| match s {
                    "low" => Ok(FreqSel::Low),
                    "center" => Ok(FreqSel::Center),
                    "high" => Ok(FreqSel::High),
                    _ => parse_num(s).map(FreqSel::Hz),
                })?
            }
            "heatmap.combiner" => {
                self.heatmap_combiner = match v {
                    "ps_only" => CombinerSource::PsOnly,
                    "pdf" => CombinerSource::Pdf,
                    "learned" => CombinerSource::Learned,
                    _ => return Err(format!("expected ps_only, pdf or learned, got `{v}`")),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Strict parse; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        let mut snapshots = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: body.into() });
            };
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                return Err(ConfigError::Syntax { line, text: body.into() });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            match cfg.set(key, value, &mut snapshots) {
                Ok(true) => {}
                Ok(false) => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                Err(msg) => return Err(ConfigError::Value { line, key: key.into(), msg }),
            }
        }
        if let NoiseMode::Snapshots(_) = cfg.noise {
            cfg.noise = NoiseMode::Snapshots(snapshots.unwrap_or(16));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// All keys in config syntax. With `docs`, each key is preceded by its
    /// description as a comment.
    pub fn emit(&self, docs: bool) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, doc) in KEYS {
            let sec = key.split('.').next().unwrap();
            if docs && sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = sec;
            }
            if docs {
                writeln!(out, "# {doc}").unwrap();
            }
            writeln!(out, "{key} = {}", self.get(key).unwrap()).unwrap();
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, msg: String| Err(ConfigError::Constraint { key, msg });
        if self.num_td_units == 0 || !self.num_antennas.is_multiple_of(self.num_td_units) {
            return bad(
                "system.N",
                format!(
                    "M = N·P violated (M = {}, N = {})",
                    self.num_antennas, self.num_td_units
                ),
            );
        }
        if let Err(e) = self.system().validate() {
            return bad("system", e.to_string());
        }
        if let Some(d) = self.aperture {
            if !(d.is_finite() && d > 0.0) {
                return bad("geometry.aperture_m", "must be > 0".into());
            }
        }
        if let Err(e) = UePosition::new(self.ue[0], self.ue[1]) {
            return bad("ue.x", e.to_string());
        }
        if let Err(e) = self.learner_options().validate() {
            return bad("learner", e.to_string());
        }
        if self.critic_batch == 0 || self.critic_iters == 0 {
            return bad("learner.critic_batch", "critic batch and iterations must be >= 1".into());
        }
        if !(self.critic_lr.is_finite() && self.critic_lr >= 0.0) {
            return bad("learner.critic_lr", "must be >= 0".into());
        }
        if let Err(e) = self.grid.validate() {
            return bad("grid", e.to_string());
        }
        if self.noise == NoiseMode::Snapshots(0) {
            return bad("noise.snapshots", "must be >= 1".into());
        }
        for &n in &self.n_sweep {
            if n != 0 && !self.num_antennas.is_multiple_of(n) {
                return bad(
                    "profile.n_sweep",
                    format!("M = N·P violated (M = {}, N = {n})", self.num_antennas),
                );
            }
        }
        if let Err(e) = self.heatmap_grid.validate() {
            return bad("heatmap", e.to_string());
        }
        Ok(())
    }

    fn resolved_aperture(&self) -> f64 {
        self.aperture.unwrap_or_else(|| {
            (self.num_antennas as f64 - 1.0) * 0.5 * SPEED_OF_LIGHT / self.center_freq
        })
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            num_antennas: self.num_antennas,
            num_td_units: self.num_td_units,
            ps_per_td: self.num_antennas / self.num_td_units.max(1),
            num_subcarriers: self.num_subcarriers,
            center_freq: self.center_freq,
            bandwidth: self.bandwidth,
            ps_bits: self.ps_bits,
            tau_max: self
                .tau_max
                .unwrap_or_else(|| self.resolved_aperture() / SPEED_OF_LIGHT),
            tx_power: self.tx_power,
            noise_power: self.noise_power,
        }
    }

    pub fn learner_options(&self) -> LearnerOptions {
        let defaults = LearnerOptions::for_array(self.num_antennas);
        LearnerOptions {
            total_measurements: self.total_measurements,
            perturb_count: self.perturb_count.unwrap_or(defaults.perturb_count),
            critic_refit_period: self.refit_period,
            exploit_start: self.exploit_start,
            seed: self.seed,
            critic: CriticSettings {
                rank: self.critic_rank,
                train: TrainOptions {
                    lr: self.critic_lr,
                    iters: self.critic_iters,
                    batch: self.critic_batch,
                    seed: 0,
                },
            },
            // the noise term of a measured power is subtracted before fitting
            noise_floor: match self.noise {
                NoiseMode::Noiseless => 0.0,
                NoiseMode::Snapshots(_) => self.noise_power,
            },
        }
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            learner: self.learner_options(),
            grid: self.grid,
            noise: self.noise,
            seed: self.seed,
        }
    }

    pub fn scenario(&self) -> tdps_core::Result<Scenario> {
        let cfg = self.system();
        let aperture = self.resolved_aperture();
        let geom = match self.geometry {
            GeometryKind::Uniform => ArrayGeometry::uniform(self.num_antennas, aperture)?,
            GeometryKind::Random => ArrayGeometry::random(self.num_antennas, aperture, self.geometry_seed)?,
        };
        let ue = UePosition::new(self.ue[0], self.ue[1])?;
        let rho = match self.rho {
            RhoModel::Unit => unit_rho(&cfg),
            RhoModel::Flat => flat_magnitude_rho(&cfg),
        };
        Scenario::new(cfg, geom, ue, rho)
    }

    /// Large-scale gain at an arbitrary frequency.
    pub fn rho_at(&self, freq: f64) -> f64 {
        match self.rho {
            RhoModel::Unit => 1.0,
            RhoModel::Flat => freq / self.center_freq,
        }
    }
}
