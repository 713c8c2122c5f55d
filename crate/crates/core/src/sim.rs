//! Measurement oracle.
//!
//! Learners never see the channel; they only get powers from
//! [`measure_power`] (or the noiseless [`gain_profile`]).

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{nearest_bin, ChannelMatrix, SystemConfig};
use crate::combiner::{effective_combiner, CombinerConfig};
use crate::{Error, Result};

/// Per-subcarrier power gain `|w_k^H h_k|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainProfile {
    pub per_subcarrier: Vec<f64>,
    pub freqs: Vec<f64>,
}

impl GainProfile {
    pub fn len(&self) -> usize {
        self.per_subcarrier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_subcarrier.is_empty()
    }

    /// CSV with columns `freq_hz,gain_linear,gain_db_rel_center`.
    pub fn to_csv(&self, center_freq: f64) -> Result<String> {
        let db = normalized_gain_db(self, center_freq)?;
        let mut out = String::from("freq_hz,gain_linear,gain_db_rel_center\n");
        for ((f, g), d) in self.freqs.iter().zip(&self.per_subcarrier).zip(&db) {
            writeln!(out, "{f:.6},{g:e},{d:.6}").unwrap();
        }
        Ok(out)
    }
}

/// One set of measured powers for a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub config: CombinerConfig,
    pub powers: Vec<f64>,
    pub snapshots: usize,
    pub seed: u64,
}

/// `w^H h` for a single subcarrier.
pub fn inner(w: &[Complex64], h: impl Iterator<Item = Complex64>) -> Complex64 {
    w.iter().zip(h).map(|(w, h)| w.conj() * h).sum()
}

fn check_dims(cc: &CombinerConfig, h: &ChannelMatrix, cfg: &SystemConfig) -> Result<()> {
    if h.num_antennas() != cfg.num_antennas {
        return Err(Error::dims("channel antennas", cfg.num_antennas, h.num_antennas()));
    }
    if cc.theta.len() != cfg.num_antennas {
        return Err(Error::dims("theta", cfg.num_antennas, cc.theta.len()));
    }
    if cc.tau.len() != cfg.num_td_units {
        return Err(Error::dims("tau", cfg.num_td_units, cc.tau.len()));
    }
    Ok(())
}

fn subcarrier_gain(cc: &CombinerConfig, h: &ChannelMatrix, cfg: &SystemConfig, k: usize) -> f64 {
    let w = effective_combiner(cc, cfg, h.freqs()[k]);
    inner(&w, (0..h.num_antennas()).map(|m| h.get(m, k))).norm_sqr()
}

/// Noiseless power gain at every subcarrier of `h` (which may be a
/// decimated subset of the full grid).
pub fn gain_profile(cc: &CombinerConfig, h: &ChannelMatrix, cfg: &SystemConfig) -> Result<GainProfile> {
    check_dims(cc, h, cfg)?;
    let per_subcarrier = (0..h.num_subcarriers())
        .map(|k| subcarrier_gain(cc, h, cfg, k))
        .collect();
    Ok(GainProfile {
        per_subcarrier,
        freqs: h.freqs().to_vec(),
    })
}

/// Mean amplitude gain `(1/K) Σ |w_k^H h_k|`.
pub fn avg_amplitude_gain(cc: &CombinerConfig, h: &ChannelMatrix, cfg: &SystemConfig) -> Result<f64> {
    Ok(mean_amplitude(&gain_profile(cc, h, cfg)?.per_subcarrier))
}

/// Mean of square roots of power gains.
pub fn mean_amplitude(powers: &[f64]) -> f64 {
    powers.iter().map(|p| p.max(0.0).sqrt()).sum::<f64>() / powers.len() as f64
}

fn snapshot_seed(seed: u64, k: usize) -> u64 {
    // splitmix64 finalizer over (seed, k)
    let mut z = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Average received power `|y_k|²` over `snapshots` draws at subcarrier `k`
/// of `h`.
///
/// Symbols are constant-modulus with power `P_T/K` (K from `cfg`) and a
/// uniform random phase; the combined noise `w^H n_k` is `CN(0, σ_k²)` since
/// `‖w‖ = 1`. The expectation is `(P_T/K)·|w_k^H h_k|² + σ_k²`. Randomness
/// depends only on `(seed, k, snapshot)`.
pub fn measure_power(
    cc: &CombinerConfig,
    h: &ChannelMatrix,
    cfg: &SystemConfig,
    k: usize,
    snapshots: usize,
    seed: u64,
) -> Result<f64> {
    check_dims(cc, h, cfg)?;
    if k >= h.num_subcarriers() {
        return Err(Error::dims("subcarrier index", h.num_subcarriers(), k));
    }
    if snapshots == 0 {
        return Err(Error::InvalidOption("snapshots must be >= 1".into()));
    }
    let w = effective_combiner(cc, cfg, h.freqs()[k]);
    let signal = inner(&w, (0..h.num_antennas()).map(|m| h.get(m, k)));
    let sym_power = cfg.tx_power / cfg.num_subcarriers as f64;
    if cfg.noise_power == 0.0 {
        return Ok(sym_power * signal.norm_sqr());
    }
    let amp = sym_power.sqrt();
    let noise_std = (0.5 * cfg.noise_power).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(snapshot_seed(seed, k));
    let mut acc = 0.0;
    for _ in 0..snapshots {
        let s = Complex64::from_polar(amp, rng.random_range(0.0..2.0 * PI));
        let nr: f64 = rng.sample(StandardNormal);
        let ni: f64 = rng.sample(StandardNormal);
        let y = signal * s + Complex64::new(nr, ni) * noise_std;
        acc += y.norm_sqr();
    }
    Ok(acc / snapshots as f64)
}

/// Measured powers at every subcarrier of `h`.
pub fn measure_profile(
    cc: &CombinerConfig,
    h: &ChannelMatrix,
    cfg: &SystemConfig,
    snapshots: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    let powers = (0..h.num_subcarriers())
        .map(|k| measure_power(cc, h, cfg, k, snapshots, seed))
        .collect::<Result<_>>()?;
    Ok(MeasurementRecord {
        config: cc.clone(),
        powers,
        snapshots,
        seed,
    })
}

/// Width of the contiguous run of bins around the bin nearest `center_freq`
/// whose gain is at least half the center gain, as `count · bin_width`.
pub fn three_db_bandwidth(gp: &GainProfile, center_freq: f64, bin_width: f64) -> f64 {
    if gp.is_empty() {
        return 0.0;
    }
    let c = nearest_bin(&gp.freqs, center_freq);
    let g = &gp.per_subcarrier;
    let threshold = 0.5 * g[c];
    let mut lo = c;
    while lo > 0 && g[lo - 1] >= threshold {
        lo -= 1;
    }
    let mut hi = c;
    while hi + 1 < g.len() && g[hi + 1] >= threshold {
        hi += 1;
    }
    (hi - lo + 1) as f64 * bin_width
}

/// Gain in dB relative to the bin nearest `center_freq`.
pub fn normalized_gain_db(gp: &GainProfile, center_freq: f64) -> Result<Vec<f64>> {
    if gp.is_empty() {
        return Ok(Vec::new());
    }
    let g0 = gp.per_subcarrier[nearest_bin(&gp.freqs, center_freq)];
    if g0 <= 0.0 {
        return Err(Error::ZeroCenterGain);
    }
    Ok(gp
        .per_subcarrier
        .iter()
        .map(|g| 10.0 * (g / g0).log10())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::channel_at;
    use crate::combiner::PhaseCodebook;
    use crate::geometry::{ArrayGeometry, UePosition};
    use rand::Rng;

    fn cfg(m: usize, n: usize, k: usize) -> SystemConfig {
        SystemConfig {
            num_antennas: m,
            num_td_units: n,
            ps_per_td: m / n,
            num_subcarriers: k,
            center_freq: 100e9,
            bandwidth: 10e9,
            ps_bits: 3,
            tau_max: 1e-9,
            tx_power: 2.0,
            noise_power: 0.0,
        }
    }

    fn scenario(m: usize, k: usize, seed: u64) -> (SystemConfig, ChannelMatrix) {
        let c = cfg(m, m.min(2), k);
        let geom = ArrayGeometry::random(m.max(2), 0.02, seed).unwrap();
        let geom = if m == 1 {
            ArrayGeometry::new(vec![0.3], 0.02).unwrap()
        } else {
            geom
        };
        let ue = UePosition::new(0.5, -0.2).unwrap();
        let h = channel_at(&geom, &ue, &c.subcarrier_frequencies(), &vec![1.0; k]).unwrap();
        (c, h)
    }

    fn profile(vals: &[f64]) -> GainProfile {
        let n = vals.len();
        GainProfile {
            per_subcarrier: vals.to_vec(),
            freqs: (0..n).map(|i| 95.0 + (i as f64 + 0.5) * 10.0 / n as f64).collect(),
        }
    }

    #[test]
    fn single_antenna_profile_is_channel_power() {
        let (c, h) = scenario(1, 3, 1);
        let cc = CombinerConfig::phases_only(vec![0.0], 1);
        let gp = gain_profile(&cc, &h, &c).unwrap();
        for k in 0..3 {
            assert!((gp.per_subcarrier[k] - h.get(0, k).norm_sqr()).abs() < 1e-24);
        }
    }

    #[test]
    fn matched_phases_reach_coherent_bound() {
        let mut c = cfg(6, 2, 1);
        c.bandwidth = 0.0;
        let geom = ArrayGeometry::random(6, 0.05, 4).unwrap();
        let ue = UePosition::new(0.4, 0.1).unwrap();
        let h = channel_at(&geom, &ue, &c.subcarrier_frequencies(), &[1.0]).unwrap();
        let theta: Vec<f64> = h.column(0).iter().map(|z| z.arg()).collect();
        let cc = CombinerConfig::phases_only(theta, 2);
        let gp = gain_profile(&cc, &h, &c).unwrap();
        let bound = h.column(0).iter().map(|z| z.norm()).sum::<f64>().powi(2) / 6.0;
        assert!((gp.per_subcarrier[0] / bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_matches_direct_inner_product() {
        let (c, h) = scenario(4, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cb = PhaseCodebook::new(3);
        let theta: Vec<f64> = (0..4).map(|_| cb.value(rng.random_range(0..8))).collect();
        let cc = CombinerConfig {
            theta: theta.clone(),
            tau: vec![1.1e-11, 3.9e-11],
        };
        let gp = gain_profile(&cc, &h, &c).unwrap();
        for k in 0..2 {
            let f = h.freqs()[k];
            let mut re = 0.0;
            let mut im = 0.0;
            for (m, t) in theta.iter().enumerate() {
                let ph = t - 2.0 * PI * f * cc.tau[m / 2];
                // conj(w) h with w = e^{j ph}/2
                let (hr, hi) = (h.get(m, k).re, h.get(m, k).im);
                let (wr, wi) = (ph.cos() / 2.0, -ph.sin() / 2.0);
                re += wr * hr - wi * hi;
                im += wr * hi + wi * hr;
            }
            let want = re * re + im * im;
            assert!((gp.per_subcarrier[k] / want - 1.0).abs() < 1e-12);
        }

        let amp = avg_amplitude_gain(&cc, &h, &c).unwrap();
        let want = gp.per_subcarrier.iter().map(|g| g.sqrt()).sum::<f64>() / 2.0;
        assert!((amp / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_gain_examples() {
        let (c, h) = scenario(4, 1, 2);
        let cc = CombinerConfig::phases_only(vec![0.0; 4], 2);
        let gp = gain_profile(&cc, &h, &c).unwrap();
        assert!((avg_amplitude_gain(&cc, &h, &c).unwrap() - gp.per_subcarrier[0].sqrt()).abs() < 1e-18);
        assert_eq!(mean_amplitude(&[4.0, 4.0, 4.0]), 2.0);
    }

    #[test]
    fn dimension_mismatch() {
        let (c, h) = scenario(4, 2, 2);
        let cc = CombinerConfig::phases_only(vec![0.0; 3], 2);
        assert!(gain_profile(&cc, &h, &c).is_err());
        let cc = CombinerConfig::phases_only(vec![0.0; 4], 1);
        assert!(gain_profile(&cc, &h, &c).is_err());
        let cc = CombinerConfig::phases_only(vec![0.0; 4], 2);
        assert!(measure_power(&cc, &h, &c, 2, 1, 0).is_err());
        assert!(measure_power(&cc, &h, &c, 0, 0, 0).is_err());
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let (c, h) = scenario(4, 2, 5);
        let cc = CombinerConfig {
            theta: vec![0.0, PI, PI / 2.0, 0.0],
            tau: vec![0.0, 2e-11],
        };
        let gp = gain_profile(&cc, &h, &c).unwrap();
        for k in 0..2 {
            for snaps in [1, 7] {
                let p = measure_power(&cc, &h, &c, k, snaps, 42).unwrap();
                assert_eq!(p, c.tx_power / 2.0 * gp.per_subcarrier[k]);
            }
        }
    }

    #[test]
    fn noisy_measurement() {
        let (mut c, h) = scenario(4, 2, 5);
        c.noise_power = 3e-3;
        let zero = ChannelMatrix::from_parts(4, vec![Complex64::new(0.0, 0.0); 8], h.freqs().to_vec()).unwrap();
        let cc = CombinerConfig::phases_only(vec![0.0; 4], 2);
        let p = measure_power(&cc, &zero, &c, 1, 10_000, 9).unwrap();
        assert!((p / c.noise_power - 1.0).abs() < 0.05);
        assert_eq!(p, measure_power(&cc, &zero, &c, 1, 10_000, 9).unwrap());
        assert_ne!(p, measure_power(&cc, &zero, &c, 1, 10_000, 10).unwrap());

        let rec = measure_profile(&cc, &zero, &c, 100, 1).unwrap();
        assert_eq!(rec.powers.len(), 2);
        assert!(rec.powers.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(three_db_bandwidth(&profile(&[1.0; 5]), 100.0, 2.0), 10.0);
        assert_eq!(three_db_bandwidth(&profile(&[0.1, 0.2, 1.0, 0.3, 0.4]), 100.0, 2.0), 2.0);
        // the run containing the center covers bins 1..=4 of 5
        assert_eq!(
            three_db_bandwidth(&profile(&[1.0, 0.6, 1.0, 0.6, 0.1]), 100.0, 2.0),
            8.0
        );
        assert_eq!(
            three_db_bandwidth(&profile(&[1.0, 0.4, 1.0, 0.6, 0.1]), 100.0, 2.0),
            4.0
        );
    }

    #[test]
    fn normalized_db_examples() {
        let db = normalized_gain_db(&profile(&[2.0; 3]), 100.0).unwrap();
        assert!(db.iter().all(|d| d.abs() < 1e-15));
        let db = normalized_gain_db(&profile(&[0.1, 1.0, 0.01]), 100.0).unwrap();
        assert!((db[0] + 10.0).abs() < 1e-12);
        assert!((db[2] + 20.0).abs() < 1e-12);
        assert!(normalized_gain_db(&profile(&[1.0, 0.0, 1.0]), 100.0).is_err());
    }

    #[test]
    fn profile_csv() {
        let csv = profile(&[0.5, 1.0, 0.25]).to_csv(100.0).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "freq_hz,gain_linear,gain_db_rel_center");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with(",0.000000"));
    }
}
