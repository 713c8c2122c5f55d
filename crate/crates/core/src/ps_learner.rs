//! Online learning of the quantized phase vector from center-frequency
//! power measurements.
//!
//! The state is the current phase vector, an action is the next phase
//! vector (deterministic transition), and the reward is the measured power
//! difference. Exploration perturbs a few phases at a time. Every
//! `critic_refit_period` measurements after `exploit_start`, the Gram critic
//! is refit on all measured powers and an [`Actor`] picks the beam that
//! maximizes it, starting from the best beam seen so far. That beam is then
//! measured like any other.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combiner::PhaseCodebook;
use crate::critic::{train_critic, CriticModel, PowerDataset, TrainOptions};
use crate::{Error, Result};

/// Guard for the continuous-phase ascent, where improvements can shrink
/// without bound.
const MAX_ASCENT_CYCLES: usize = 10_000;

/// Power iterations for the critic's dominant direction.
const POWER_ITERATIONS: usize = 200;

/// Relative improvement below which a coordinate move is rejected.
const ASCENT_TOLERANCE: f64 = 1e-12;

pub fn reward(p_new: f64, p_old: f64) -> f64 {
    p_new - p_old
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticSettings {
    /// Columns of Q.
    pub rank: usize,
    pub train: TrainOptions,
}

impl Default for CriticSettings {
    fn default() -> Self {
        Self {
            rank: 4,
            train: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerOptions {
    /// Measurement budget, exploit evaluations included.
    pub total_measurements: usize,
    /// Phases reassigned per exploration step at the start; decays linearly
    /// to 1 over the budget.
    pub perturb_count: usize,
    pub critic_refit_period: usize,
    /// First measurement index at which the critic is fitted and exploited.
    pub exploit_start: usize,
    pub seed: u64,
    pub critic: CriticSettings,
    /// Subtracted from every measured power before regression.
    pub noise_floor: f64,
}

impl LearnerOptions {
    /// Defaults for an M-element array: 5000 measurements, `M/4` initial
    /// perturbations, refits every 200 measurements from the 1000th on.
    pub fn for_array(num_antennas: usize) -> Self {
        Self {
            total_measurements: 5000,
            perturb_count: (num_antennas / 4).max(1),
            critic_refit_period: 200,
            exploit_start: 1000,
            seed: 0,
            critic: CriticSettings::default(),
            noise_floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOption(msg.into()));
        if self.total_measurements == 0 {
            return bad("total_measurements must be >= 1");
        }
        if self.perturb_count == 0 {
            return bad("perturb_count must be >= 1");
        }
        if self.critic_refit_period == 0 {
            return bad("critic_refit_period must be >= 1");
        }
        if self.exploit_start == 0 || self.exploit_start > self.total_measurements {
            return bad("exploit_start must be in 1..=total_measurements");
        }
        if self.critic.rank == 0 {
            return bad("critic rank must be >= 1");
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return bad("noise_floor must be >= 0");
        }
        Ok(())
    }

    /// Perturbation count for measurement `t`.
    pub fn scheduled_perturb_count(&self, t: usize) -> usize {
        let frac = 1.0 - t as f64 / self.total_measurements as f64;
        let k = 1.0 + (self.perturb_count as f64 - 1.0) * frac.clamp(0.0, 1.0);
        (k.round() as usize).max(1)
    }
}

/// Learner bookkeeping: current state, best measured beam, data buffer.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub current: Vec<f64>,
    pub best_phases: Vec<f64>,
    pub best_power: f64,
    pub buffer: PowerDataset,
    pub iter: usize,
}

impl LearnerState {
    fn new(initial: Vec<f64>, power: f64) -> Self {
        Self {
            buffer: PowerDataset::new(initial.len()),
            best_phases: initial.clone(),
            current: initial,
            best_power: power,
            iter: 0,
        }
    }

    fn observe(&mut self, phases: Vec<f64>, power: f64) {
        if power > self.best_power {
            self.best_power = power;
            self.best_phases.clone_from(&phases);
        }
        self.current = phases;
        self.iter += 1;
    }
}

fn random_phase(cb: &PhaseCodebook, rng: &mut impl Rng) -> f64 {
    match cb.levels() {
        Some(l) => cb.value(rng.random_range(0..l)),
        None => PI - rng.random_range(0.0..2.0 * PI),
    }
}

/// Reassigns `count` distinct, uniformly chosen positions of `current` to
/// uniformly chosen codebook values.
pub fn propose_action(current: &[f64], count: usize, cb: &PhaseCodebook, rng: &mut impl Rng) -> Vec<f64> {
    let mut next = current.to_vec();
    let count = count.min(current.len());
    if count == 0 {
        return next;
    }
    for m in index::sample(rng, current.len(), count) {
        next[m] = random_phase(cb, rng);
    }
    next
}

/// Result of maximizing the critic over phase vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub phases: Vec<f64>,
    /// Full passes over the elements, the final no-change pass included.
    pub cycles: usize,
    pub predicted_power: f64,
}

/// Picks the phase vector to exploit given a fitted critic.
pub trait Actor {
    fn act(&self, model: &CriticModel, init: &[f64], cb: &PhaseCodebook) -> Result<Ascent>;
}

/// Cyclic coordinate ascent on `‖Q^H w‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoordinateAscent;

impl Actor for CoordinateAscent {
    fn act(&self, model: &CriticModel, init: &[f64], cb: &PhaseCodebook) -> Result<Ascent> {
        exploit_critic(model, init, cb)
    }
}

fn power_of(z: &[Complex64]) -> f64 {
    z.iter().map(|x| x.norm_sqr()).sum()
}

/// Cyclic coordinate ascent on the critic: for m = 1..M, sets θ_m to the
/// member maximizing the predicted power with the other phases fixed, and
/// repeats until a pass changes nothing.
///
/// Ascent runs twice, from `init` and from [`principal_seed`], and the
/// better end point is returned (ties keep the `init` run). A single start
/// can stall in a local optimum well below the best beam; the second start
/// is exact for a rank-1 critic. `cycles` is the longer of the two runs.
/// Never lowers the predicted power of `init`.
pub fn exploit_critic(model: &CriticModel, init: &[f64], cb: &PhaseCodebook) -> Result<Ascent> {
    let m_count = model.num_antennas();
    if init.len() != m_count {
        return Err(Error::dims("initial phases", m_count, init.len()));
    }
    let from_init = ascend(model, init, cb);
    let Some(seed) = principal_seed(model, cb)? else {
        return Ok(from_init);
    };
    let from_seed = ascend(model, &seed, cb);
    let cycles = from_init.cycles.max(from_seed.cycles);
    let mut best = if from_seed.predicted_power > from_init.predicted_power {
        from_seed
    } else {
        from_init
    };
    best.cycles = cycles;
    Ok(best)
}

/// Quantized phases of the critic's dominant direction `u = Q x`, where `x`
/// is the top eigenvector of `Q^H Q`.
///
/// Quantizing `arg u_m + φ` only changes at M values of the common rotation
/// φ within one codebook step, so every distinct quantization is tried and
/// the best kept. `None` when Q is zero.
pub fn principal_seed(model: &CriticModel, cb: &PhaseCodebook) -> Result<Option<Vec<f64>>> {
    let v = model.rank();
    let m_count = model.num_antennas();
    let mut gram = vec![Complex64::new(0.0, 0.0); v * v];
    for m in 0..m_count {
        let row = model.row(m);
        for i in 0..v {
            for j in 0..v {
                gram[i * v + j] += row[i].conj() * row[j];
            }
        }
    }
    let mut x: Vec<Complex64> = (0..v).map(|j| Complex64::new(1.0 + 0.1 * j as f64, 0.0)).collect();
    for _ in 0..POWER_ITERATIONS {
        let y: Vec<Complex64> = (0..v)
            .map(|i| (0..v).map(|j| gram[i * v + j] * x[j]).sum())
            .collect();
        let norm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(None);
        }
        x = y.into_iter().map(|c| c / norm).collect();
    }
    let args: Vec<f64> = (0..m_count)
        .map(|m| model.row(m).iter().zip(&x).map(|(q, xj)| q * xj).sum::<Complex64>().arg())
        .collect();

    let Some(levels) = cb.levels() else {
        return Ok(Some(args));
    };
    let step = 2.0 * PI / levels as f64;
    // rotations at which element m moves to the next codebook value
    let mut crossings: Vec<f64> = args.iter().map(|a| (0.5 * step - a).rem_euclid(step)).collect();
    crossings.sort_by(f64::total_cmp);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (i, &c) in crossings.iter().enumerate() {
        let next = crossings.get(i + 1).copied().unwrap_or(crossings[0] + step);
        let phi = 0.5 * (c + next);
        let phases = args.iter().map(|a| cb.quantize(a + phi)).collect::<Result<Vec<_>>>()?;
        let p = model.predict_phases(&phases)?;
        if best.as_ref().is_none_or(|b| p > b.0) {
            best = Some((p, phases));
        }
    }
    Ok(best.map(|b| b.1))
}

fn ascend(model: &CriticModel, init: &[f64], cb: &PhaseCodebook) -> Ascent {
    let m_count = model.num_antennas();
    let amp = 1.0 / (m_count as f64).sqrt();
    let candidates: Vec<(f64, Complex64)> = cb
        .values()
        .into_iter()
        .map(|t| (t, Complex64::from_polar(amp, -t)))
        .collect();

    let mut phases = init.to_vec();
    let mut conj_w: Vec<Complex64> = phases.iter().map(|&t| Complex64::from_polar(amp, -t)).collect();
    let w: Vec<Complex64> = conj_w.iter().map(|c| c.conj()).collect();
    let mut z = model.project(&w);
    let mut base = vec![Complex64::new(0.0, 0.0); model.rank()];
    let mut trial = base.clone();
    let mut cycles = 0;

    loop {
        cycles += 1;
        let mut changed = false;
        for m in 0..m_count {
            let row = model.row(m);
            for ((b, zj), q) in base.iter_mut().zip(&z).zip(row) {
                *b = zj - conj_w[m] * q;
            }
            let current = power_of(&z);

            let (best_theta, best_cw, best_val) = if cb.is_continuous() {
                // maximize Σ|base_j + e^{-jθ} q_j/√M|²: θ = arg Σ conj(base_j) q_j
                let s: Complex64 = base.iter().zip(row).map(|(b, q)| b.conj() * q).sum();
                if s.norm() == 0.0 {
                    continue;
                }
                let theta = s.arg();
                let cw = Complex64::from_polar(amp, -theta);
                for ((t, b), q) in trial.iter_mut().zip(&base).zip(row) {
                    *t = b + cw * q;
                }
                (theta, cw, power_of(&trial))
            } else {
                let mut best = (phases[m], conj_w[m], current);
                for &(theta, cw) in &candidates {
                    for ((t, b), q) in trial.iter_mut().zip(&base).zip(row) {
                        *t = b + cw * q;
                    }
                    let val = power_of(&trial);
                    if val > best.2 {
                        best = (theta, cw, val);
                    }
                }
                best
            };

            if best_val > current + ASCENT_TOLERANCE * current.abs().max(f64::MIN_POSITIVE)
                && best_theta != phases[m]
            {
                phases[m] = best_theta;
                conj_w[m] = best_cw;
                for ((zj, b), q) in z.iter_mut().zip(&base).zip(row) {
                    *zj = b + best_cw * q;
                }
                changed = true;
            }
        }
        if !changed || cycles >= MAX_ASCENT_CYCLES {
            break;
        }
    }

    Ascent {
        predicted_power: power_of(&z),
        phases,
        cycles,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Initial,
    Explore,
    Exploit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub iter: usize,
    pub kind: StepKind,
    pub phases: Vec<f64>,
    pub measured_power: f64,
    pub best_power: f64,
    /// Power difference to the previous state.
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    /// Best measured phase vector.
    pub phases: Vec<f64>,
    pub power: f64,
    pub history: Vec<HistoryEntry>,
    /// Ascent cycles of each exploit step.
    pub exploit_cycles: Vec<usize>,
    /// Critic after the last refit.
    pub critic: Option<CriticModel>,
}

impl LearnOutcome {
    /// CSV with columns `iter,measured_power,best_power,phase_indices`,
    /// phase indices written as one base-2^r digit per element.
    pub fn history_csv(&self, cb: &PhaseCodebook) -> Result<String> {
        let levels = cb
            .levels()
            .ok_or_else(|| Error::InvalidOption("phase indices need a quantized codebook".into()))?;
        if levels > 36 {
            return Err(Error::InvalidOption(format!(
                "cannot write {levels}-ary phase digits"
            )));
        }
        let mut out = String::from("iter,measured_power,best_power,phase_indices\n");
        for e in &self.history {
            let digits: String = e
                .phases
                .iter()
                .map(|&t| {
                    cb.index_of(t)
                        .and_then(|i| char::from_digit(i as u32, 36))
                        .ok_or(Error::OutOfRange {
                            what: "phase",
                            value: t,
                            range: "phase codebook".into(),
                        })
                })
                .collect::<Result<_>>()?;
            writeln!(out, "{},{:e},{:e},{}", e.iter, e.measured_power, e.best_power, digits).unwrap();
        }
        Ok(out)
    }
}

/// Runs the online loop with the coordinate-ascent actor.
pub fn learn_phases<F>(measure: F, num_antennas: usize, cb: &PhaseCodebook, opts: &LearnerOptions) -> Result<LearnOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    learn_phases_with(&CoordinateAscent, measure, num_antennas, cb, opts)
}

pub fn learn_phases_with<A, F>(
    actor: &A,
    mut measure: F,
    num_antennas: usize,
    cb: &PhaseCodebook,
    opts: &LearnerOptions,
) -> Result<LearnOutcome>
where
    A: Actor + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    opts.validate()?;
    if num_antennas == 0 {
        return Err(Error::InvalidOption("need at least one antenna".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let initial: Vec<f64> = (0..num_antennas).map(|_| random_phase(cb, &mut rng)).collect();
    let p0 = measure(&initial)?;
    let mut state = LearnerState::new(initial.clone(), p0);
    state.buffer.push_phases(&initial, p0 - opts.noise_floor)?;
    let mut history = vec![HistoryEntry {
        iter: 0,
        kind: StepKind::Initial,
        phases: initial,
        measured_power: p0,
        best_power: p0,
        reward: 0.0,
    }];
    state.iter = 1;

    let mut critic: Option<CriticModel> = None;
    let mut scale = None;
    let mut lr = opts.critic.train.lr;
    let mut refits = 0u64;
    let mut exploit_cycles = Vec::new();
    let mut last_power = p0;

    for t in 1..opts.total_measurements {
        let exploit = t >= opts.exploit_start && (t - opts.exploit_start).is_multiple_of(opts.critic_refit_period);
        let (action, kind) = if exploit {
            // powers are normalized once, at the first refit; later refits
            // warm-start from the previous Q in the same units
            let s = *scale.get_or_insert_with(|| {
                let mean = state.buffer.mean_power();
                if mean > 0.0 {
                    1.0 / mean
                } else {
                    1.0
                }
            });
            let data = state.buffer.scaled(s);
            let start = match critic.take() {
                Some(model) => model,
                None => CriticModel::init_scaled(num_antennas, opts.critic.rank, &data, opts.seed ^ 0x5eed)?,
            };
            let train = TrainOptions {
                lr,
                seed: opts.seed.wrapping_add(refits),
                ..opts.critic.train
            };
            let report = train_critic(&start, &data, &train)?;
            refits += 1;
            lr = report.final_lr * 2.0;
            let ascent = actor.act(&report.model, &state.best_phases, cb)?;
            exploit_cycles.push(ascent.cycles);
            critic = Some(report.model);
            (ascent.phases, StepKind::Exploit)
        } else {
            let k = opts.scheduled_perturb_count(t);
            (propose_action(&state.current, k, cb, &mut rng), StepKind::Explore)
        };

        let p = measure(&action)?;
        state.buffer.push_phases(&action, p - opts.noise_floor)?;
        state.observe(action.clone(), p);
        history.push(HistoryEntry {
            iter: t,
            kind,
            phases: action,
            measured_power: p,
            best_power: state.best_power,
            reward: reward(p, last_power),
        });
        last_power = p;
    }

    Ok(LearnOutcome {
        phases: state.best_phases,
        power: state.best_power,
        history,
        exploit_cycles,
        critic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::phase_beam;
    use rand_distr::StandardNormal;

    fn rand_channel(m: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }

    fn gain(h: &[Complex64], phases: &[f64]) -> f64 {
        phase_beam(phases)
            .iter()
            .zip(h)
            .map(|(w, h)| w.conj() * h)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// All `levels^M` quantized beams.
    fn all_beams(m: usize, cb: &PhaseCodebook) -> Vec<Vec<f64>> {
        let vals = cb.values();
        let l = vals.len();
        (0..l.pow(m as u32))
            .map(|mut code| {
                (0..m)
                    .map(|_| {
                        let v = vals[code % l];
                        code /= l;
                        v
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(2.0, 0.5), 1.5);
        assert_eq!(reward(0.7, 0.7), 0.0);
        assert_eq!(reward(0.2, 0.9), -reward(0.9, 0.2));
    }

    #[test]
    fn proposals() {
        let cb = PhaseCodebook::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let current: Vec<f64> = (0..16).map(|i| cb.value(i % 8)).collect();
        assert_eq!(propose_action(&current, 0, &cb, &mut rng), current);
        for trial in 0..200 {
            let k = trial % 6;
            let next = propose_action(&current, k, &cb, &mut rng);
            assert_eq!(next.len(), 16);
            assert!(next.iter().all(|t| cb.index_of(*t).is_some()));
            let diff = next.iter().zip(&current).filter(|(a, b)| a != b).count();
            assert!(diff <= k);
        }
        let full = propose_action(&current, 16, &cb, &mut rng);
        assert!(full.iter().all(|t| cb.index_of(*t).is_some()));
    }

    #[test]
    fn schedule_decays_to_one() {
        let opts = LearnerOptions::for_array(256);
        assert_eq!(opts.scheduled_perturb_count(0), 64);
        assert_eq!(opts.scheduled_perturb_count(opts.total_measurements), 1);
        assert!(opts.scheduled_perturb_count(2500) < 64);
    }

    #[test]
    fn options_validation() {
        let ok = LearnerOptions::for_array(8);
        assert!(ok.validate().is_ok());
        assert!(LearnerOptions { exploit_start: 6000, ..ok }.validate().is_err());
        assert!(LearnerOptions { critic_refit_period: 0, ..ok }.validate().is_err());
        assert!(LearnerOptions { total_measurements: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn ascent_single_element_keeps_init() {
        let model = CriticModel::from_channel(&[Complex64::from_polar(1.0, 0.7)]);
        let cb = PhaseCodebook::new(2);
        let a = exploit_critic(&model, &[PI / 2.0], &cb).unwrap();
        assert_eq!(a.phases, vec![PI / 2.0]);
        assert_eq!(a.cycles, 1);
    }

    #[test]
    fn ascent_equal_phases_gives_equal_output() {
        let h = vec![Complex64::from_polar(0.3, 0.0); 6];
        let model = CriticModel::from_channel(&h);
        let cb = PhaseCodebook::new(2);
        let init = [0.0, PI, -PI / 2.0, PI / 2.0, 0.0, PI];
        let a = exploit_critic(&model, &init, &cb).unwrap();
        assert!(a.phases.iter().all(|&t| t == a.phases[0]));
    }

    #[test]
    fn ascent_near_exhaustive_optimum() {
        let cb = PhaseCodebook::new(1);
        for seed in 0..20 {
            let h = rand_channel(4, seed);
            let model = CriticModel::from_channel(&h);
            let best = all_beams(4, &cb).iter().map(|b| gain(&h, b)).fold(0.0, f64::max);
            let init = vec![0.0; 4];
            let a = exploit_critic(&model, &init, &cb).unwrap();
            assert!(a.predicted_power >= model.predict_phases(&init).unwrap());
            assert!(gain(&h, &a.phases) >= 0.8 * best, "seed {seed}");
        }
    }

    #[test]
    fn ascent_with_perfect_critic_close_to_optimum() {
        for (m, bits) in [(4, 1), (4, 2), (6, 1), (8, 1), (5, 2), (8, 2)] {
            let cb = PhaseCodebook::new(bits);
            let beams = all_beams(m, &cb);
            for seed in 0..5 {
                let h = rand_channel(m, 100 + seed);
                let model = CriticModel::from_channel(&h);
                let best = beams.iter().map(|b| gain(&h, b)).fold(0.0, f64::max);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let init: Vec<f64> = (0..m).map(|_| random_phase(&cb, &mut rng)).collect();
                let a = exploit_critic(&model, &init, &cb).unwrap();
                assert!(gain(&h, &a.phases) >= 0.95 * best, "m={m} r={bits} seed={seed}");
            }
        }
    }

    #[test]
    fn rank_one_seed_is_exhaustive_optimum() {
        for (m, bits) in [(4, 1), (6, 2), (7, 1), (5, 3)] {
            let cb = PhaseCodebook::new(bits);
            let beams = all_beams(m, &cb);
            for seed in 0..10 {
                let h = rand_channel(m, 300 + seed);
                let model = CriticModel::from_channel(&h);
                let best = beams.iter().map(|b| gain(&h, b)).fold(0.0, f64::max);
                let p = principal_seed(&model, &cb).unwrap().unwrap();
                assert!(gain(&h, &p) >= best * (1.0 - 1e-12), "m={m} r={bits} seed={seed}");
            }
        }
        let zero = CriticModel::zeros(3, 2).unwrap();
        assert_eq!(principal_seed(&zero, &PhaseCodebook::new(2)).unwrap(), None);
    }

    #[test]
    fn ascent_continuous_phases_reaches_coherent_bound() {
        let h = rand_channel(7, 3);
        let model = CriticModel::from_channel(&h);
        let a = exploit_critic(&model, &[0.0; 7], &PhaseCodebook::continuous()).unwrap();
        let bound = h.iter().map(|z| z.norm()).sum::<f64>().powi(2) / 7.0;
        assert!((gain(&h, &a.phases) / bound - 1.0).abs() < 1e-9);
    }

    fn small_opts(seed: u64) -> LearnerOptions {
        LearnerOptions {
            total_measurements: 40,
            perturb_count: 1,
            critic_refit_period: 10,
            exploit_start: 20,
            seed,
            critic: CriticSettings {
                rank: 2,
                train: TrainOptions {
                    lr: 1.0,
                    iters: 200,
                    batch: 64,
                    seed: 0,
                },
            },
            noise_floor: 0.0,
        }
    }

    #[test]
    fn two_element_learning_hits_exhaustive_maximum() {
        let cb = PhaseCodebook::new(1);
        for seed in 0..10 {
            let h = rand_channel(2, seed + 50);
            let best = all_beams(2, &cb).iter().map(|b| gain(&h, b)).fold(0.0, f64::max);
            let out = learn_phases(|p| Ok(gain(&h, p)), 2, &cb, &small_opts(seed)).unwrap();
            assert!((out.power - best).abs() <= 1e-12 * best);
            assert!((gain(&h, &out.phases) - out.power).abs() <= 1e-12 * best);
        }
    }

    #[test]
    fn history_is_monotone_and_deterministic() {
        let cb = PhaseCodebook::new(2);
        let h = rand_channel(8, 9);
        let mut calls = Vec::new();
        let out = learn_phases(
            |p| {
                calls.push(p.to_vec());
                Ok(gain(&h, p))
            },
            8,
            &cb,
            &small_opts(4),
        )
        .unwrap();
        assert_eq!(calls.len(), 40);
        assert_eq!(out.history.len(), 40);
        assert!(out.history.windows(2).all(|w| w[1].best_power >= w[0].best_power));
        assert_eq!(out.exploit_cycles.len(), 2);

        let again = learn_phases(|p| Ok(gain(&h, p)), 8, &cb, &small_opts(4)).unwrap();
        assert_eq!(again.history, out.history);

        let csv = out.history_csv(&cb).unwrap();
        let first = csv.lines().nth(1).unwrap();
        assert_eq!(first.rsplit(',').next().unwrap().len(), 8);
    }

    #[test]
    fn callback_errors_propagate() {
        let cb = PhaseCodebook::new(1);
        let mut n = 0;
        let res = learn_phases(
            |_| {
                n += 1;
                if n > 3 {
                    Err(Error::Measurement("link down".into()))
                } else {
                    Ok(1.0)
                }
            },
            3,
            &cb,
            &small_opts(0),
        );
        assert!(matches!(res, Err(Error::Measurement(_))));
    }
}
