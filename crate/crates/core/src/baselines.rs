//! Oracle combiners that use channel or geometry knowledge.

use crate::channel::{ChannelMatrix, SystemConfig};
use crate::combiner::{recompensate_phases, CombinerConfig, PhaseCodebook};
use crate::geometry::{ArrayGeometry, UePosition};
use crate::td_search::{delays_from_ddf, subarray_deltas};
use crate::{Error, Result};

fn check(h: &ChannelMatrix, cfg: &SystemConfig) -> Result<()> {
    cfg.validate()?;
    if h.num_antennas() != cfg.num_antennas {
        return Err(Error::dims("channel antennas", cfg.num_antennas, h.num_antennas()));
    }
    if h.num_subcarriers() == 0 {
        return Err(Error::dims("channel subcarriers", 1, 0));
    }
    Ok(())
}

/// Conjugate phases of the channel at the bin nearest `f_c`, quantized;
/// all delays zero.
pub fn ps_only_oracle(h: &ChannelMatrix, cfg: &SystemConfig, cb: &PhaseCodebook) -> Result<CombinerConfig> {
    check(h, cfg)?;
    let k = crate::channel::nearest_bin(h.freqs(), cfg.center_freq);
    let theta = h
        .column(k)
        .iter()
        .map(|z| cb.quantize(z.arg()))
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinerConfig::phases_only(theta, cfg.num_td_units))
}

/// Delays from the exact DDF at the sub-array centers, with the PS-only
/// phases recompensated for them.
pub fn pdf_oracle(
    geom: &ArrayGeometry,
    ue: &UePosition,
    h: &ChannelMatrix,
    cfg: &SystemConfig,
    cb: &PhaseCodebook,
) -> Result<CombinerConfig> {
    let base = ps_only_oracle(h, cfg, cb)?;
    let deltas = subarray_deltas(geom, cfg.num_td_units, cfg.ps_per_td)?;
    let ddf = deltas
        .iter()
        .map(|&d| geom.ddf(d, ue))
        .collect::<Result<Vec<_>>>()?;
    let tau = delays_from_ddf(&ddf, cfg.tau_max);
    let theta = recompensate_phases(&base.theta, &tau, cfg, cb)?;
    Ok(CombinerConfig { theta, tau })
}
