//! Subcommand implementations. Every output file starts with `#` lines
//! holding the resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tdps_core::combiner::{CombinerConfig, PhaseCodebook};
use tdps_core::pipeline::{
    finish_pipeline, gain_map, learn_center_phases, search_scenario_delays, Scenario,
};
use tdps_core::ps_learner::LearnOutcome;
use tdps_core::sim::{mean_amplitude, three_db_bandwidth, GainProfile};

use crate::config::{CombinerSource, ExperimentConfig, FreqSel};

pub struct Output {
    dir: PathBuf,
    stamp: String,
}

impl Output {
    pub fn new(cfg: &ExperimentConfig, command: &str) -> Result<Self> {
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut stamp = format!("# tdps {command}\n");
        for line in cfg.emit(false).lines() {
            writeln!(stamp, "# {line}").unwrap();
        }
        Ok(Self { dir, stamp })
    }

    fn write(&self, name: &str, extra_header: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = self.stamp.clone();
        text.push_str(extra_header);
        text.push_str(body);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn profile_csv(gp: &GainProfile, cfg: &ExperimentConfig) -> Result<String> {
    Ok(gp.to_csv(cfg.center_freq)?)
}

fn bandwidth(scn: &Scenario, gp: &GainProfile) -> f64 {
    three_db_bandwidth(gp, scn.cfg.center_freq, scn.cfg.bin_width())
}

fn learn(scn: &Scenario, cfg: &ExperimentConfig) -> Result<LearnOutcome> {
    let opts = cfg.pipeline_options();
    Ok(learn_center_phases(scn, &opts.learner, opts.noise, opts.seed)?)
}

/// One summary row: N, 3-dB bandwidth, average amplitude gain and the gap to
/// the oracle of the same architecture.
struct SweepRow {
    n: usize,
    bw: f64,
    amp: f64,
    gap_db: f64,
}

pub fn run_profile(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = Output::new(cfg, "profile")?;
    let base = cfg.scenario()?;
    let mut learned: Option<LearnOutcome> = None;
    let mut files = Vec::new();
    let mut rows = Vec::new();

    for &n in &cfg.n_sweep {
        // N = 0 is the PS-only architecture: one delay line, held at zero
        let scn = base.with_td_units(n.max(1))?;
        let oracle = if n == 0 { scn.ps_only_oracle()? } else { scn.pdf_oracle()? };
        let oracle_gp = scn.gain_profile(&oracle)?;
        let chosen = if cfg.oracle {
            oracle.clone()
        } else {
            if learned.is_none() {
                learned = Some(learn(&base, cfg)?);
            }
            let phases = learned.as_ref().unwrap();
            if n == 0 {
                CombinerConfig::phases_only(phases.phases.clone(), 1)
            } else {
                finish_pipeline(&scn, phases.clone(), &cfg.pipeline_options())?.config
            }
        };
        let gp = scn.gain_profile(&chosen)?;
        let amp = mean_amplitude(&gp.per_subcarrier);
        rows.push(SweepRow {
            n,
            bw: bandwidth(&scn, &gp),
            amp,
            gap_db: 20.0 * (amp / mean_amplitude(&oracle_gp.per_subcarrier)).log10(),
        });
        let header = format!("# N = {n}\n");
        files.push(out.write(&format!("profile_N{n}.csv"), &header, &profile_csv(&gp, cfg)?)?);
    }

    let mut body = String::from("N,bandwidth_3db_hz,avg_amplitude_gain,gap_to_oracle_db\n");
    for r in &rows {
        writeln!(body, "{},{},{:e},{:.6}", r.n, r.bw, r.amp, r.gap_db).unwrap();
    }
    let header = "# oracle: ps-only conjugate phases for N = 0, true-geometry delays otherwise\n";
    files.push(out.write("summary.csv", header, &body)?);
    Ok(files)
}

pub fn run_learn(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = Output::new(cfg, "learn")?;
    let scn = cfg.scenario()?;
    let cb = scn.codebook();
    let outcome = learn(&scn, cfg)?;
    let cc = CombinerConfig::phases_only(outcome.phases.clone(), scn.cfg.num_td_units);
    let oracle = scn.gain_profile(&scn.ps_only_oracle()?)?.per_subcarrier[scn.center_bin()];
    let sym_power = scn.cfg.tx_power / scn.cfg.num_subcarriers as f64;
    let header = format!(
        "# best power = {:e}, ps-only oracle power = {:e}, exploit cycles = {:?}\n",
        outcome.power,
        sym_power * oracle,
        outcome.exploit_cycles
    );
    Ok(vec![
        out.write("learn_history.csv", &header, &outcome.history_csv(&cb)?)?,
        out.write("combiner_learned.txt", &header, &cc.to_text(&cb)?)?,
    ])
}

fn read_combiner(path: &Path) -> Result<(CombinerConfig, PhaseCodebook)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CombinerConfig::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn run_search(cfg: &ExperimentConfig, phases: Option<&Path>) -> Result<Vec<PathBuf>> {
    let out = Output::new(cfg, "search-delays")?;
    let scn = cfg.scenario()?;
    let cb = scn.codebook();
    let theta = match phases {
        Some(path) => {
            let (cc, file_cb) = read_combiner(path)?;
            if file_cb != cb {
                bail!("{}: phase resolution does not match system.ps_bits", path.display());
            }
            cc.theta
        }
        None => learn(&scn, cfg)?.phases,
    };
    let opts = cfg.pipeline_options();
    let res = search_scenario_delays(&scn, &theta, &opts.grid, opts.noise, opts.seed.wrapping_add(1 << 32))?;
    let cc = res.config();
    let gp = scn.gain_profile(&cc)?;
    let header = format!(
        "# best ax = {}, ay = {}, b = {}, score = {:e}, ps-only score = {:e}\n",
        res.best.ax, res.best.ay, res.best.b, res.best_score, res.ps_only_score
    );
    let n = scn.cfg.num_td_units;
    Ok(vec![
        out.write("search_trace.csv", &header, &res.trace_csv())?,
        out.write("combiner_tdps.txt", &header, &cc.to_text(&cb)?)?,
        out.write(&format!("profile_N{n}.csv"), &header, &profile_csv(&gp, cfg)?)?,
    ])
}

fn heatmap_combiner(scn: &Scenario, cfg: &ExperimentConfig, file: Option<&Path>) -> Result<CombinerConfig> {
    if let Some(path) = file {
        let (cc, file_cb) = read_combiner(path)?;
        cc.validate(&scn.cfg, &file_cb)?;
        return Ok(cc);
    }
    Ok(match cfg.heatmap_combiner {
        CombinerSource::PsOnly => scn.ps_only_oracle()?,
        CombinerSource::Pdf => scn.pdf_oracle()?,
        CombinerSource::Learned => {
            let learned = learn(scn, cfg)?;
            finish_pipeline(scn, learned, &cfg.pipeline_options())?.config
        }
    })
}

pub fn run_heatmap(cfg: &ExperimentConfig, combiner: Option<&Path>) -> Result<Vec<PathBuf>> {
    let out = Output::new(cfg, "heatmap")?;
    let scn = cfg.scenario()?;
    let cc = heatmap_combiner(&scn, cfg, combiner)?;
    let freqs = scn.channel.freqs();
    let marker = format!("# ue = {},{}\n", cfg.ue[0], cfg.ue[1]);
    let mut files = Vec::new();
    for sel in &cfg.heatmap_freqs {
        let f = match sel {
            FreqSel::Low => freqs[0],
            FreqSel::Center => freqs[scn.center_bin()],
            FreqSel::High => freqs[freqs.len() - 1],
            FreqSel::Hz(hz) => *hz,
        };
        let map = gain_map(&cc, &scn.geom, &scn.cfg, f, cfg.rho_at(f), &cfg.heatmap_grid)?;
        let mut body = String::from("y_m\\x_m");
        for x in &map.xs {
            write!(body, ",{x}").unwrap();
        }
        body.push('\n');
        for (y, row) in map.ys.iter().zip(&map.values) {
            write!(body, "{y}").unwrap();
            for g in row {
                write!(body, ",{g:e}").unwrap();
            }
            body.push('\n');
        }
        let header = format!("{marker}# freq_hz = {f}\n# values: |w(f)^H h_f(x, y)|^2\n");
        files.push(out.write(&format!("heatmap_{}.csv", sel.label()), &header, &body)?);
    }
    files.push(out.write("ue_marker.csv", "", &format!("x_m,y_m\n{},{}\n", cfg.ue[0], cfg.ue[1]))?);
    Ok(files)
}
