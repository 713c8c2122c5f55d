//! System parameters, subcarrier grid and the near-field LOS channel
//!
//! `[h_k]_m = ρ_k λ_k / (4π d_m) · exp(-j 2π d_m / λ_k)`

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::combiner::PhaseCodebook;
use crate::geometry::{ArrayGeometry, UePosition};
use crate::textfmt;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// M
    pub num_antennas: usize,
    /// N
    pub num_td_units: usize,
    /// P, phase shifters behind each TD unit.
    pub ps_per_td: usize,
    /// K
    pub num_subcarriers: usize,
    /// f_c, Hz
    pub center_freq: f64,
    /// B, Hz
    pub bandwidth: f64,
    /// r, phase shifter resolution in bits.
    pub ps_bits: u32,
    /// Largest delay a TD unit supports, seconds.
    pub tau_max: f64,
    /// P_T, watts, split evenly over subcarriers.
    pub tx_power: f64,
    /// σ_k², watts per subcarrier.
    pub noise_power: f64,
}

impl SystemConfig {
    /// 256-element array at 100 GHz with 10 GHz of bandwidth, 3-bit phase
    /// shifters and `num_td_units` TD units. `tau_max` is set to `D/c` for
    /// the `(M-1)λ_c/2` aperture.
    pub fn reference(num_td_units: usize) -> Result<Self> {
        let num_antennas = 256;
        if num_td_units == 0 || num_antennas % num_td_units != 0 {
            return Err(Error::InvalidConfig(format!(
                "{num_td_units} TD units do not divide {num_antennas} antennas"
            )));
        }
        let mut cfg = Self {
            num_antennas,
            num_td_units,
            ps_per_td: num_antennas / num_td_units,
            num_subcarriers: 2048,
            center_freq: 100e9,
            bandwidth: 10e9,
            ps_bits: 3,
            tau_max: 0.0,
            tx_power: 1.0,
            noise_power: 0.0,
        };
        cfg.tau_max = cfg.default_aperture() / SPEED_OF_LIGHT;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_antennas == 0 || self.num_td_units == 0 || self.ps_per_td == 0 {
            return bad("M, N and P must be positive".into());
        }
        if self.num_td_units * self.ps_per_td != self.num_antennas {
            return bad(format!(
                "M = N·P violated ({} != {}·{})",
                self.num_antennas, self.num_td_units, self.ps_per_td
            ));
        }
        if self.num_subcarriers == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.bandwidth.is_finite() && self.bandwidth >= 0.0) {
            return bad(format!("bandwidth must be >= 0, got {}", self.bandwidth));
        }
        if !(self.center_freq.is_finite() && self.center_freq > 0.5 * self.bandwidth) {
            return bad(format!(
                "center frequency {} must exceed B/2 = {}",
                self.center_freq,
                0.5 * self.bandwidth
            ));
        }
        if !(self.tau_max.is_finite() && self.tau_max >= 0.0) {
            return bad(format!("tau_max must be >= 0, got {}", self.tau_max));
        }
        if self.ps_bits == 0 || self.ps_bits > 16 {
            return bad(format!("ps_bits must be in 1..=16, got {}", self.ps_bits));
        }
        if !(self.tx_power.is_finite() && self.tx_power >= 0.0) {
            return bad(format!("tx_power must be >= 0, got {}", self.tx_power));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return bad(format!("noise_power must be >= 0, got {}", self.noise_power));
        }
        Ok(())
    }

    pub fn center_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_freq
    }

    /// `(M-1)·λ_c/2`, the aperture of a half-wavelength ULA with M elements.
    pub fn default_aperture(&self) -> f64 {
        (self.num_antennas.saturating_sub(1)) as f64 * 0.5 * self.center_wavelength()
    }

    pub fn codebook(&self) -> PhaseCodebook {
        PhaseCodebook::new(self.ps_bits)
    }

    /// Index of the bin whose center is nearest `f_c` (lower index on ties).
    pub fn center_bin(&self) -> usize {
        nearest_bin(&self.subcarrier_frequencies(), self.center_freq)
    }

    /// Bin centers `f_k = f_c - B/2 + (k - 1/2)·B/K`, k = 1..K.
    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        let k = self.num_subcarriers as f64;
        let spacing = self.bandwidth / k;
        let start = self.center_freq - 0.5 * self.bandwidth;
        (0..self.num_subcarriers)
            .map(|i| start + (i as f64 + 0.5) * spacing)
            .collect()
    }

    /// Width of one subcarrier bin, `B/K`.
    pub fn bin_width(&self) -> f64 {
        self.bandwidth / self.num_subcarriers as f64
    }
}

pub(crate) fn nearest_bin(freqs: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (k, f) in freqs.iter().enumerate() {
        let dist = (f - target).abs();
        if dist < best_dist {
            best = k;
            best_dist = dist;
        }
    }
    best
}

/// M×K channel, row-major by antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    num_antennas: usize,
    coeffs: Vec<Complex64>,
    freqs: Vec<f64>,
}

impl ChannelMatrix {
    pub fn from_parts(num_antennas: usize, coeffs: Vec<Complex64>, freqs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != num_antennas * freqs.len() {
            return Err(Error::dims(
                "channel coefficients",
                num_antennas * freqs.len(),
                coeffs.len(),
            ));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "channel frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            num_antennas,
            coeffs,
            freqs,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.coeffs[m * self.freqs.len() + k]
    }

    /// Channel vector `h_k` across antennas.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        let stride = self.freqs.len();
        (0..self.num_antennas)
            .map(|m| self.coeffs[m * stride + k])
            .collect()
    }

    /// Sub-matrix restricted to the given subcarrier indices (in order).
    pub fn select_bins(&self, bins: &[usize]) -> Result<Self> {
        let k_all = self.freqs.len();
        if let Some(&bad) = bins.iter().find(|&&b| b >= k_all) {
            return Err(Error::dims("subcarrier index", k_all, bad));
        }
        let freqs = bins.iter().map(|&b| self.freqs[b]).collect();
        let mut coeffs = Vec::with_capacity(self.num_antennas * bins.len());
        for m in 0..self.num_antennas {
            coeffs.extend(bins.iter().map(|&b| self.coeffs[m * k_all + b]));
        }
        Self::from_parts(self.num_antennas, coeffs, freqs)
    }

    /// Text form: an `M K` header, M rows of K `re:im` entries, then one
    /// line of K frequencies in Hz.
    pub fn to_text(&self) -> String {
        let k = self.freqs.len();
        let mut out = format!("{} {}\n", self.num_antennas, k);
        for m in 0..self.num_antennas {
            let row: Vec<String> = self.coeffs[m * k..(m + 1) * k]
                .iter()
                .map(|&z| textfmt::fmt_complex(z))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let freqs: Vec<String> = self.freqs.iter().map(|f| format!("{f:e}")).collect();
        out.push_str(&freqs.join(" "));
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = textfmt::content_lines(text);
        let (ln, header) = textfmt::expect_line(&mut lines, "`M K` header")?;
        let (m, k) = textfmt::parse_dims(ln, header)?;
        let mut coeffs = Vec::with_capacity(m * k);
        for _ in 0..m {
            let (ln, row) = textfmt::expect_line(&mut lines, "channel row")?;
            coeffs.extend(textfmt::parse_complex_row(ln, row, k)?);
        }
        let (ln, fline) = textfmt::expect_line(&mut lines, "frequency line")?;
        let freqs: Vec<f64> = fline
            .split_whitespace()
            .map(|t| textfmt::parse_f64(t, ln))
            .collect::<Result<_>>()?;
        if freqs.len() != k {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {k} frequencies, got {}", freqs.len()),
            });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing content".into(),
            });
        }
        Self::from_parts(m, coeffs, freqs)
    }
}

/// Channel over the configured subcarrier grid. `rho` holds one positive
/// gain per subcarrier.
pub fn near_field_channel(
    geom: &ArrayGeometry,
    ue: &UePosition,
    cfg: &SystemConfig,
    rho: &[f64],
) -> Result<ChannelMatrix> {
    if geom.len() != cfg.num_antennas {
        return Err(Error::dims("geometry elements", cfg.num_antennas, geom.len()));
    }
    channel_at(geom, ue, &cfg.subcarrier_frequencies(), rho)
}

/// Channel at arbitrary (strictly increasing) frequencies.
pub fn channel_at(
    geom: &ArrayGeometry,
    ue: &UePosition,
    freqs: &[f64],
    rho: &[f64],
) -> Result<ChannelMatrix> {
    if rho.len() != freqs.len() {
        return Err(Error::dims("rho", freqs.len(), rho.len()));
    }
    if let Some(r) = rho.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::OutOfRange {
            what: "rho",
            value: *r,
            range: "(0, inf)".into(),
        });
    }
    let dists = geom.distances(ue)?;
    let k = freqs.len();
    let mut coeffs = Vec::with_capacity(dists.len() * k);
    for &d in &dists {
        for (&f, &r) in freqs.iter().zip(rho) {
            let lambda = SPEED_OF_LIGHT / f;
            let amp = r * lambda / (4.0 * PI * d);
            coeffs.push(Complex64::from_polar(amp, -2.0 * PI * d / lambda));
        }
    }
    ChannelMatrix::from_parts(dists.len(), coeffs, freqs.to_vec())
}

/// `ρ_k = 1` for every subcarrier.
pub fn unit_rho(cfg: &SystemConfig) -> Vec<f64> {
    vec![1.0; cfg.num_subcarriers]
}

/// `ρ_k = f_k / f_c`, which cancels the `λ_k` amplitude slope so `|h_k|`
/// is flat across the band.
pub fn flat_magnitude_rho(cfg: &SystemConfig) -> Vec<f64> {
    cfg.subcarrier_frequencies()
        .iter()
        .map(|f| f / cfg.center_freq)
        .collect()
}
