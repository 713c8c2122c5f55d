//! Gram-form critic.
//!
//! The critic predicts the received power of a beam `w` as
//! `w^H Q Q^H w = ‖Q^H w‖²` with `Q ∈ C^{M×v}`. A rank-1 `Q = h` reproduces
//! the true single-path gain exactly, and larger `v` over-parameterizes.
//! The value of a transition `(s, a)` is the predicted power difference
//! between the two beams.
//!
//! Training is least squares on measured powers:
//!
//! ```text
//! L(Q) = (1/n) Σ_i (‖Q^H w_i‖² - p_i)²
//! G    = ∂L/∂Re Q + j ∂L/∂Im Q = (4/n) Σ_i e_i · w_i (w_i^H Q)
//! ```
//!
//! so `Q ← Q - η G` is a descent step.

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::textfmt;
use crate::{Error, Result};

/// Largest deviation from unit norm accepted for a dataset beam.
const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Step halvings tried before an iteration gives up on a batch.
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticModel {
    num_antennas: usize,
    rank: usize,
    /// Row-major M×v.
    q: Vec<Complex64>,
}

impl CriticModel {
    pub fn new(num_antennas: usize, rank: usize, q: Vec<Complex64>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidOption("critic rank v must be >= 1".into()));
        }
        if q.len() != num_antennas * rank {
            return Err(Error::dims("critic parameters", num_antennas * rank, q.len()));
        }
        Ok(Self {
            num_antennas,
            rank,
            q,
        })
    }

    pub fn zeros(num_antennas: usize, rank: usize) -> Result<Self> {
        Self::new(num_antennas, rank, vec![Complex64::new(0.0, 0.0); num_antennas * rank])
    }

    /// Rank-1 model `Q = h`.
    pub fn from_channel(h: &[Complex64]) -> Self {
        Self {
            num_antennas: h.len(),
            rank: 1,
            q: h.to_vec(),
        }
    }

    /// i.i.d. `CN(0, 1)` entries rescaled so the mean predicted power over
    /// `data` equals the mean measured power.
    pub fn init_scaled(num_antennas: usize, rank: usize, data: &PowerDataset, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = (0..num_antennas * rank)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * s, im * s)
            })
            .collect();
        let mut model = Self::new(num_antennas, rank, q)?;
        model.check_data(data)?;
        let mean_pred =
            (0..data.len()).map(|i| model.predict_raw(data.beam(i))).sum::<f64>() / data.len() as f64;
        let mean_p = data.powers.iter().sum::<f64>() / data.len() as f64;
        if mean_pred > 0.0 && mean_p > 0.0 {
            let scale = (mean_p / mean_pred).sqrt();
            model.q.iter_mut().for_each(|z| *z *= scale);
        }
        Ok(model)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn params(&self) -> &[Complex64] {
        &self.q
    }

    pub fn params_mut(&mut self) -> &mut [Complex64] {
        &mut self.q
    }

    /// Row `m` of Q (length v).
    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.q[m * self.rank..(m + 1) * self.rank]
    }

    /// `w^H Q` as a length-v vector (the conjugate of `Q^H w`).
    pub fn project(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut z = vec![Complex64::new(0.0, 0.0); self.rank];
        self.project_into(w, &mut z);
        z
    }

    fn project_into(&self, w: &[Complex64], z: &mut [Complex64]) {
        z.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (wm, row) in w.iter().zip(self.q.chunks_exact(self.rank)) {
            let wc = wm.conj();
            for (zj, qj) in z.iter_mut().zip(row) {
                *zj += wc * qj;
            }
        }
    }

    fn predict_raw(&self, w: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.rank {
            let mut z = Complex64::new(0.0, 0.0);
            for (m, wm) in w.iter().enumerate() {
                z += wm.conj() * self.q[m * self.rank + j];
            }
            acc += z.norm_sqr();
        }
        acc
    }

    /// `‖Q^H w‖²`
    pub fn predict_power(&self, w: &[Complex64]) -> Result<f64> {
        if w.len() != self.num_antennas {
            return Err(Error::dims("beam", self.num_antennas, w.len()));
        }
        Ok(self.predict_raw(w))
    }

    /// Predicted power of the phase beam `e^{jθ}/√M`.
    pub fn predict_phases(&self, phases: &[f64]) -> Result<f64> {
        self.predict_power(&phase_beam(phases))
    }

    /// `f(s, a) = P(w_a) - P(w_s)`
    pub fn critic_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        if state.len() != action.len() {
            return Err(Error::dims("action", state.len(), action.len()));
        }
        Ok(self.predict_phases(action)? - self.predict_phases(state)?)
    }

    fn check_data(&self, data: &PowerDataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.num_antennas != self.num_antennas {
            return Err(Error::dims("dataset beams", self.num_antennas, data.num_antennas));
        }
        Ok(())
    }

    fn batch_loss(&self, data: &PowerDataset, idx: &[usize], z: &mut [Complex64]) -> f64 {
        let mut loss = 0.0;
        for &i in idx {
            self.project_into(data.beam(i), z);
            let e = z.iter().map(|x| x.norm_sqr()).sum::<f64>() - data.powers[i];
            loss += e * e;
        }
        loss / idx.len() as f64
    }

    fn batch_loss_and_gradient(
        &self,
        data: &PowerDataset,
        idx: &[usize],
        grad: &mut [Complex64],
        z: &mut [Complex64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
        let n = idx.len() as f64;
        let mut loss = 0.0;
        for &i in idx {
            let w = data.beam(i);
            self.project_into(w, z);
            let e = z.iter().map(|x| x.norm_sqr()).sum::<f64>() - data.powers[i];
            loss += e * e;
            let c = 4.0 * e / n;
            for (wm, grow) in w.iter().zip(grad.chunks_exact_mut(self.rank)) {
                let a = wm * c;
                for (g, zj) in grow.iter_mut().zip(z.iter()) {
                    *g += a * zj;
                }
            }
        }
        loss / n
    }

    /// Text form: an `M v` header followed by M rows of v `re:im` entries.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_antennas, self.rank);
        for row in self.q.chunks_exact(self.rank) {
            let cells: Vec<String> = row.iter().map(|&z| textfmt::fmt_complex(z)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = textfmt::content_lines(text);
        let (ln, header) = textfmt::expect_line(&mut lines, "`M v` header")?;
        let (m, v) = textfmt::parse_dims(ln, header)?;
        let mut q = Vec::with_capacity(m * v);
        for _ in 0..m {
            let (ln, row) = textfmt::expect_line(&mut lines, "critic row")?;
            q.extend(textfmt::parse_complex_row(ln, row, v)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing content".into(),
            });
        }
        Self::new(m, v, q)
    }
}

/// `e^{jθ}/√M`
pub fn phase_beam(phases: &[f64]) -> Vec<Complex64> {
    let amp = 1.0 / (phases.len() as f64).sqrt();
    phases.iter().map(|&t| Complex64::from_polar(amp, t)).collect()
}

/// Training buffer of (unit-norm beam, measured power) pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerDataset {
    num_antennas: usize,
    beams: Vec<Complex64>,
    powers: Vec<f64>,
}

impl PowerDataset {
    pub fn new(num_antennas: usize) -> Self {
        Self {
            num_antennas,
            beams: Vec::new(),
            powers: Vec::new(),
        }
    }

    pub fn push(&mut self, beam: &[Complex64], power: f64) -> Result<()> {
        if beam.len() != self.num_antennas {
            return Err(Error::dims("beam", self.num_antennas, beam.len()));
        }
        let norm: f64 = beam.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::InvalidOption(format!("beam norm {norm} is not 1")));
        }
        if !power.is_finite() {
            return Err(Error::NonFinite("power"));
        }
        self.beams.extend_from_slice(beam);
        self.powers.push(power);
        Ok(())
    }

    pub fn push_phases(&mut self, phases: &[f64], power: f64) -> Result<()> {
        self.push(&phase_beam(phases), power)
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn beam(&self, i: usize) -> &[Complex64] {
        &self.beams[i * self.num_antennas..(i + 1) * self.num_antennas]
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn mean_power(&self) -> f64 {
        self.powers.iter().sum::<f64>() / self.powers.len().max(1) as f64
    }

    /// Copy with every power multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            num_antennas: self.num_antennas,
            beams: self.beams.clone(),
            powers: self.powers.iter().map(|p| p * factor).collect(),
        }
    }
}

/// Full-dataset loss and gradient.
pub fn critic_loss_and_gradient(model: &CriticModel, data: &PowerDataset) -> Result<(f64, Vec<Complex64>)> {
    model.check_data(data)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![Complex64::new(0.0, 0.0); model.q.len()];
    let mut z = vec![Complex64::new(0.0, 0.0); model.rank];
    let loss = model.batch_loss_and_gradient(data, &idx, &mut grad, &mut z);
    Ok((loss, grad))
}

/// Mean squared power error over the whole dataset.
pub fn critic_loss(model: &CriticModel, data: &PowerDataset) -> Result<f64> {
    model.check_data(data)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut z = vec![Complex64::new(0.0, 0.0); model.rank];
    Ok(model.batch_loss(data, &idx, &mut z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Initial step size; halved whenever a step would raise the batch loss.
    pub lr: f64,
    pub iters: usize,
    /// Mini-batch size; the whole dataset when `batch >= len`.
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lr: 1.0,
            iters: 600,
            batch: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: CriticModel,
    /// Mini-batch loss after each iteration.
    pub losses: Vec<f64>,
    pub initial_loss: f64,
    /// Full-dataset loss of the returned model; never above `initial_loss`.
    pub final_loss: f64,
    /// Step size in effect at the end, useful for warm restarts.
    pub final_lr: f64,
}

/// Mini-batch gradient descent with halving-on-increase backtracking.
pub fn train_critic(model: &CriticModel, data: &PowerDataset, opts: &TrainOptions) -> Result<TrainReport> {
    model.check_data(data)?;
    if !(opts.lr.is_finite() && opts.lr >= 0.0) {
        return Err(Error::InvalidOption(format!("learning rate must be >= 0, got {}", opts.lr)));
    }
    if opts.iters == 0 {
        return Err(Error::InvalidOption("iters must be >= 1".into()));
    }
    if opts.batch == 0 {
        return Err(Error::InvalidOption("batch must be >= 1".into()));
    }

    let n = data.len();
    let batch = opts.batch.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current = model.clone();
    let mut candidate = model.clone();
    let mut grad = vec![Complex64::new(0.0, 0.0); model.q.len()];
    let mut z = vec![Complex64::new(0.0, 0.0); model.rank];
    let all: Vec<usize> = (0..n).collect();
    let mut idx = all.clone();
    let mut lr = opts.lr;
    let initial_loss = model.batch_loss(data, &all, &mut z);
    let mut losses = Vec::with_capacity(opts.iters);

    for _ in 0..opts.iters {
        if batch < n {
            idx = index::sample(&mut rng, n, batch).into_vec();
        }
        let loss = current.batch_loss_and_gradient(data, &idx, &mut grad, &mut z);
        let mut accepted = loss;
        if lr > 0.0 {
            for _ in 0..MAX_HALVINGS {
                for ((c, q), g) in candidate.q.iter_mut().zip(&current.q).zip(&grad) {
                    *c = q - g * lr;
                }
                let trial = candidate.batch_loss(data, &idx, &mut z);
                if trial <= loss {
                    std::mem::swap(&mut current, &mut candidate);
                    accepted = trial;
                    break;
                }
                lr *= 0.5;
            }
        }
        losses.push(accepted);
    }

    let mut final_loss = current.batch_loss(data, &all, &mut z);
    if final_loss > initial_loss {
        current = model.clone();
        final_loss = initial_loss;
    }
    Ok(TrainReport {
        model: current,
        losses,
        initial_loss,
        final_loss,
        final_lr: lr,
    })
}
