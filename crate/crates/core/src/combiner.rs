//! Quantized phase shifters, the TD-PS effective combiner and phase
//! recompensation.
//!
//! The combiner at frequency `f` is
//! `w(f)_m = exp(j(θ_m - 2π f τ_{n(m)})) / √M`, where TD unit `n(m)` feeds
//! the `P` consecutive elements `m ∈ {(n-1)P+1, …, nP}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::SystemConfig;
use crate::textfmt;
use crate::{Error, Result};

/// Two angular distances closer than this are a tie.
const TIE_TOLERANCE: f64 = 1e-12;

/// Wraps an angle into (-π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI); // [0, 2π)
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Phase shifter alphabet `Ψ = {-π + i·2π/2^r : i = 1..2^r}`, so both 0
/// and π are members. `continuous()` models an unquantized shifter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseCodebook {
    bits: Option<u32>,
}

impl PhaseCodebook {
    pub fn new(bits: u32) -> Self {
        assert!((1..=16).contains(&bits), "phase bits must be in 1..=16");
        Self { bits: Some(bits) }
    }

    pub fn continuous() -> Self {
        Self { bits: None }
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn is_continuous(&self) -> bool {
        self.bits.is_none()
    }

    /// Number of levels, `2^r`; `None` when continuous.
    pub fn levels(&self) -> Option<usize> {
        self.bits.map(|b| 1usize << b)
    }

    fn step(levels: usize) -> f64 {
        2.0 * PI / levels as f64
    }

    /// Value of the zero-based index `i`, i.e. `-π + (i+1)·2π/2^r`.
    pub fn value(&self, index: usize) -> f64 {
        let levels = self.levels().expect("continuous codebook has no indices");
        assert!(index < levels);
        if index + 1 == levels {
            PI
        } else {
            -PI + (index + 1) as f64 * Self::step(levels)
        }
    }

    /// All members in increasing order. Empty for a continuous codebook.
    pub fn values(&self) -> Vec<f64> {
        match self.levels() {
            Some(l) => (0..l).map(|i| self.value(i)).collect(),
            None => Vec::new(),
        }
    }

    /// Index of the member `theta` (within 1e-9 rad), if any.
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        let levels = self.levels()?;
        let idx = self.nearest_index(theta, levels);
        (angular_distance(self.value(idx), theta) < 1e-9).then_some(idx)
    }

    fn nearest_index(&self, phi: f64, levels: usize) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        // increasing values: a later member within tolerance wins the tie
        for i in 0..levels {
            let dist = angular_distance(self.value(i), phi);
            if dist < best_dist - TIE_TOLERANCE || (dist - best_dist).abs() <= TIE_TOLERANCE {
                best = i;
                best_dist = best_dist.min(dist);
            }
        }
        best
    }

    /// Nearest member by wrapped angular distance; ties go to the larger
    /// member. A continuous codebook only wraps to (-π, π].
    pub fn quantize(&self, phi: f64) -> Result<f64> {
        if !phi.is_finite() {
            return Err(Error::NonFinite("quantize_phase"));
        }
        Ok(match self.levels() {
            Some(levels) => self.value(self.nearest_index(phi, levels)),
            None => wrap_phase(phi),
        })
    }

    /// Like [`quantize`](Self::quantize) but returns the index.
    pub fn quantize_index(&self, phi: f64) -> Result<usize> {
        if !phi.is_finite() {
            return Err(Error::NonFinite("quantize_phase"));
        }
        let levels = self
            .levels()
            .ok_or_else(|| Error::InvalidOption("continuous codebook has no indices".into()))?;
        Ok(self.nearest_index(phi, levels))
    }
}

/// `|wrap(a - b)|`
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

pub fn quantize_phase(phi: f64, cb: &PhaseCodebook) -> Result<f64> {
    cb.quantize(phi)
}

/// Phase vector θ (radians, one per element) and delay vector τ (seconds,
/// one per TD unit).
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerConfig {
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
}

impl CombinerConfig {
    /// Checks dimensions, codebook membership of θ and `τ ∈ [0, τ_max]`.
    pub fn new(theta: Vec<f64>, tau: Vec<f64>, cfg: &SystemConfig, cb: &PhaseCodebook) -> Result<Self> {
        let cc = Self { theta, tau };
        cc.validate(cfg, cb)?;
        Ok(cc)
    }

    /// PS-only configuration: all delays zero.
    pub fn phases_only(theta: Vec<f64>, num_td_units: usize) -> Self {
        Self {
            theta,
            tau: vec![0.0; num_td_units],
        }
    }

    pub fn validate(&self, cfg: &SystemConfig, cb: &PhaseCodebook) -> Result<()> {
        if self.theta.len() != cfg.num_antennas {
            return Err(Error::dims("theta", cfg.num_antennas, self.theta.len()));
        }
        if self.tau.len() != cfg.num_td_units {
            return Err(Error::dims("tau", cfg.num_td_units, self.tau.len()));
        }
        for &t in &self.theta {
            if !t.is_finite() {
                return Err(Error::NonFinite("theta"));
            }
            if !cb.is_continuous() && cb.index_of(t).is_none() {
                return Err(Error::OutOfRange {
                    what: "phase",
                    value: t,
                    range: "phase codebook".into(),
                });
            }
        }
        for &t in &self.tau {
            if !(0.0..=cfg.tau_max).contains(&t) {
                return Err(Error::OutOfRange {
                    what: "delay",
                    value: t,
                    range: format!("[0, {:e}]", cfg.tau_max),
                });
            }
        }
        Ok(())
    }

    /// Text form with phases as codebook indices and delays in picoseconds
    /// (6 decimals). Continuous phases are written in radians instead.
    pub fn to_text(&self, cb: &PhaseCodebook) -> Result<String> {
        let mut out = String::new();
        match cb.bits() {
            Some(bits) => {
                out.push_str(&format!("bits {bits}\n"));
                let idx: Vec<String> = self
                    .theta
                    .iter()
                    .map(|&t| {
                        cb.index_of(t).map(|i| i.to_string()).ok_or(Error::OutOfRange {
                            what: "phase",
                            value: t,
                            range: "phase codebook".into(),
                        })
                    })
                    .collect::<Result<_>>()?;
                out.push_str(&format!("theta {}\n", idx.join(" ")));
            }
            None => {
                out.push_str("bits continuous\n");
                let rad: Vec<String> = self.theta.iter().map(|t| format!("{t:e}")).collect();
                out.push_str(&format!("theta_rad {}\n", rad.join(" ")));
            }
        }
        let ps: Vec<String> = self.tau.iter().map(|t| format!("{:.6}", t * 1e12)).collect();
        out.push_str(&format!("tau_ps {}\n", ps.join(" ")));
        Ok(out)
    }

    /// Parses [`to_text`](Self::to_text) output, returning the codebook it
    /// was written with.
    pub fn from_text(text: &str) -> Result<(Self, PhaseCodebook)> {
        let mut cb = None;
        let mut theta = None;
        let mut tau = None;
        for (ln, line) in textfmt::content_lines(text) {
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "bits" => {
                    let rest = rest.trim();
                    cb = Some(if rest == "continuous" {
                        PhaseCodebook::continuous()
                    } else {
                        let b = textfmt::parse_usize(rest, ln)?;
                        if !(1..=16).contains(&b) {
                            return Err(Error::Parse {
                                line: ln,
                                msg: format!("phase bits {b} not in 1..=16"),
                            });
                        }
                        PhaseCodebook::new(b as u32)
                    });
                }
                "theta" => {
                    let cb = cb.ok_or_else(|| Error::Parse {
                        line: ln,
                        msg: "`bits` must precede `theta`".into(),
                    })?;
                    let levels = cb.levels().ok_or_else(|| Error::Parse {
                        line: ln,
                        msg: "index phases need a quantized codebook".into(),
                    })?;
                    let vals = rest
                        .split_whitespace()
                        .map(|t| {
                            let i = textfmt::parse_usize(t, ln)?;
                            if i >= levels {
                                return Err(Error::Parse {
                                    line: ln,
                                    msg: format!("phase index {i} >= {levels}"),
                                });
                            }
                            Ok(cb.value(i))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    theta = Some(vals);
                }
                "theta_rad" => {
                    theta = Some(
                        rest.split_whitespace()
                            .map(|t| textfmt::parse_f64(t, ln))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                "tau_ps" => {
                    tau = Some(
                        rest.split_whitespace()
                            .map(|t| textfmt::parse_f64(t, ln).map(|ps| ps * 1e-12))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                other => {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            msg: format!("missing `{what}` line"),
        };
        Ok((
            Self {
                theta: theta.ok_or_else(|| missing("theta"))?,
                tau: tau.ok_or_else(|| missing("tau_ps"))?,
            },
            cb.ok_or_else(|| missing("bits"))?,
        ))
    }
}

/// Effective combiner `w(f)` for a configuration; unit norm by construction.
pub fn effective_combiner(cc: &CombinerConfig, cfg: &SystemConfig, freq: f64) -> Vec<Complex64> {
    let m = cc.theta.len();
    let p = cfg.ps_per_td;
    let amp = 1.0 / (m as f64).sqrt();
    cc.theta
        .iter()
        .enumerate()
        .map(|(i, &th)| Complex64::from_polar(amp, th - 2.0 * PI * freq * cc.tau[i / p]))
        .collect()
}

/// Re-quantizes `θ*_m + 2π f_c τ_n` for every element of sub-array `n`, so
/// the center-frequency beam is unchanged (up to quantization) once delays
/// are applied.
pub fn recompensate_phases(
    theta_star: &[f64],
    tau: &[f64],
    cfg: &SystemConfig,
    cb: &PhaseCodebook,
) -> Result<Vec<f64>> {
    if theta_star.len() != cfg.num_antennas {
        return Err(Error::dims("theta", cfg.num_antennas, theta_star.len()));
    }
    if tau.len() != cfg.num_td_units {
        return Err(Error::dims("tau", cfg.num_td_units, tau.len()));
    }
    let p = cfg.ps_per_td;
    theta_star
        .iter()
        .enumerate()
        .map(|(m, &th)| cb.quantize(th + 2.0 * PI * cfg.center_freq * tau[m / p]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(m: usize, n: usize) -> SystemConfig {
        SystemConfig {
            num_antennas: m,
            num_td_units: n,
            ps_per_td: m / n,
            num_subcarriers: 4,
            center_freq: 100e9,
            bandwidth: 10e9,
            ps_bits: 3,
            tau_max: 1e-9,
            tx_power: 1.0,
            noise_power: 0.0,
        }
    }

    #[test]
    fn codebook_members() {
        let cb = PhaseCodebook::new(2);
        assert_eq!(cb.values(), vec![-PI / 2.0, 0.0, PI / 2.0, PI]);
        let cb3 = PhaseCodebook::new(3);
        assert_eq!(cb3.values().len(), 8);
        assert!(cb3.values().contains(&0.0));
        assert_eq!(*cb3.values().last().unwrap(), PI);
        assert_eq!(cb3.index_of(PI / 4.0), Some(4));
        assert_eq!(cb3.index_of(0.3), None);
    }

    #[test]
    fn quantize_examples() {
        let cb = PhaseCodebook::new(2);
        assert_eq!(cb.quantize(0.1).unwrap(), 0.0);
        assert_eq!(cb.quantize(-3.10).unwrap(), PI);
        assert_eq!(cb.quantize(PI / 4.0).unwrap(), PI / 2.0);
        // r = 1: ±π/2 are both ties between 0 and π
        let cb1 = PhaseCodebook::new(1);
        assert_eq!(cb1.quantize(PI / 2.0).unwrap(), PI);
        assert_eq!(cb1.quantize(-PI / 2.0).unwrap(), PI);
        assert!(cb.quantize(f64::NAN).is_err());
        assert!(cb.quantize(f64::INFINITY).is_err());

        let cont = PhaseCodebook::continuous();
        assert!((cont.quantize(3.0 * PI / 2.0).unwrap() + PI / 2.0).abs() < 1e-15);
        assert_eq!(cont.quantize(-PI).unwrap(), PI);
    }

    #[test]
    fn combiner_examples() {
        let c = cfg(4, 1);
        let cc = CombinerConfig::phases_only(vec![0.0; 4], 1);
        for f in [95e9, 100e9, 105e9] {
            for w in effective_combiner(&cc, &c, f) {
                assert!((w - Complex64::new(0.5, 0.0)).norm() < 1e-15);
            }
        }

        let c = cfg(2, 2);
        let f = 100e9;
        let cc = CombinerConfig {
            theta: vec![0.0; 2],
            tau: vec![0.0, 1.0 / (2.0 * f)],
        };
        let w = effective_combiner(&cc, &c, f);
        let s = 1.0 / 2f64.sqrt();
        assert!((w[0] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!((w[1] - Complex64::new(-s, 0.0)).norm() < 1e-15);

        let c = cfg(4, 2);
        let cc = CombinerConfig {
            theta: vec![0.0; 4],
            tau: vec![0.0, 3.7e-11],
        };
        let w = effective_combiner(&cc, &c, 101e9);
        assert_eq!(w[0], w[1]);
        assert_eq!(w[2], w[3]);
        assert_ne!(w[1], w[2]);
    }

    #[test]
    fn recompensation_examples() {
        let c = cfg(4, 2);
        let cb = PhaseCodebook::new(3);
        let theta: Vec<f64> = [0, 3, 5, 7].iter().map(|&i| cb.value(i)).collect();
        assert_eq!(recompensate_phases(&theta, &[0.0, 0.0], &c, &cb).unwrap(), theta);

        let full_turn = 1.0 / c.center_freq;
        let out = recompensate_phases(&[0.0; 4], &[0.0, full_turn], &c, &cb).unwrap();
        assert_eq!(out, vec![0.0; 4]);

        let tau = 0.4 / (2.0 * PI * c.center_freq);
        let out = recompensate_phases(&[0.0; 4], &[0.0, tau], &c, &cb).unwrap();
        assert_eq!(out, vec![0.0, 0.0, PI / 4.0, PI / 4.0]);

        assert!(recompensate_phases(&[0.0; 3], &[0.0, 0.0], &c, &cb).is_err());
    }

    #[test]
    fn config_validation() {
        let c = cfg(4, 2);
        let cb = PhaseCodebook::new(3);
        assert!(CombinerConfig::new(vec![0.0; 4], vec![0.0, 1e-10], &c, &cb).is_ok());
        assert!(CombinerConfig::new(vec![0.1; 4], vec![0.0, 0.0], &c, &cb).is_err());
        assert!(CombinerConfig::new(vec![0.0; 4], vec![0.0, 2e-9], &c, &cb).is_err());
        assert!(CombinerConfig::new(vec![0.0; 4], vec![-1e-12, 0.0], &c, &cb).is_err());
        assert!(CombinerConfig::new(vec![0.0; 3], vec![0.0, 0.0], &c, &cb).is_err());
    }

    #[test]
    fn text_round_trip() {
        let cb = PhaseCodebook::new(3);
        let cc = CombinerConfig {
            theta: (0..8).map(|i| cb.value(i)).collect(),
            tau: vec![0.0, 1.234567e-12],
        };
        let text = cc.to_text(&cb).unwrap();
        assert!(text.contains("theta 0 1 2 3 4 5 6 7"));
        assert!(text.contains("tau_ps 0.000000 1.234567"));
        let (back, cb_back) = CombinerConfig::from_text(&text).unwrap();
        assert_eq!(cb_back, cb);
        assert_eq!(back.theta, cc.theta);
        for (a, b) in back.tau.iter().zip(&cc.tau) {
            assert!((a - b).abs() < 1e-18);
        }

        let cont = PhaseCodebook::continuous();
        let cc = CombinerConfig {
            theta: vec![0.123, -2.5],
            tau: vec![0.0],
        };
        let (back, cb_back) = CombinerConfig::from_text(&cc.to_text(&cont).unwrap()).unwrap();
        assert!(cb_back.is_continuous());
        assert_eq!(back.theta, cc.theta);

        assert!(CombinerConfig::from_text("bits 2\ntheta 4\ntau_ps 0\n").is_err());
        assert!(CombinerConfig::from_text("theta 0\nbits 2\ntau_ps 0\n").is_err());
        assert!(CombinerConfig::from_text("bits 2\ntheta 0\n").is_err());
    }

    proptest! {
        #[test]
        fn unit_norm(theta in prop::collection::vec(-PI..PI, 8), tau in prop::collection::vec(0.0..1e-9f64, 4), f in 1e9..2e11f64) {
            let c = cfg(8, 4);
            let cc = CombinerConfig { theta, tau };
            let norm: f64 = effective_combiner(&cc, &c, f).iter().map(|w| w.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }

        #[test]
        fn quantize_idempotent_and_periodic(x in -50.0..50.0f64, bits in 1u32..6) {
            let cb = PhaseCodebook::new(bits);
            let q = cb.quantize(x).unwrap();
            prop_assert_eq!(cb.quantize(q).unwrap(), q);
            prop_assert!(cb.index_of(q).is_some());
            let step = 2.0 * PI / (1u32 << bits) as f64;
            // away from decision boundaries, shifting by 2π lands on the same member
            let frac = ((x + PI) / step).fract().abs();
            if (frac - 0.5).abs() > 1e-9 {
                prop_assert_eq!(cb.quantize(x + 2.0 * PI).unwrap(), q);
            }
            prop_assert!(angular_distance(q, x) <= step / 2.0 + 1e-12);
        }
    }
}
