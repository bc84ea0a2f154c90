use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// Independent uniform noise in `[-m, m]·range` per masked pixel.
    Noise,
    /// Every masked pixel moved by `+m·range`.
    Farther,
    /// Every masked pixel moved by `-m·range`.
    Nearer,
}

/// Distorts `d` inside `mask`, scaled by the depth range over the masked
/// valid pixels. Unmasked and invalid pixels are untouched.
pub fn perturb_depth(
    d: &DepthMap,
    mask: &Mask,
    mode: PerturbMode,
    magnitude: f64,
    seed: u64,
) -> Result<DepthMap> {
    mask.check_size("mask", d.width(), d.height())?;
    if !(magnitude >= 0.0) || !magnitude.is_finite() {
        return Err(Error::Validation(format!(
            "perturbation magnitude must be finite and non-negative, got {magnitude}"
        )));
    }
    let Some((lo, hi)) = d.range(Some(mask)) else {
        warn!("perturbation mask covers no valid depth; leaving depth unchanged");
        return Ok(d.clone());
    };
    let amount = magnitude * (hi - lo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    for i in 0..d.len() {
        if !mask.get_index(i) {
            continue;
        }
        let Some(v) = d.get_index(i) else { continue };
        let delta = match mode {
            PerturbMode::Noise if amount > 0.0 => rng.random_range(-amount..=amount),
            PerturbMode::Noise => 0.0,
            PerturbMode::Farther => amount,
            PerturbMode::Nearer => -amount,
        };
        out.set_index(i, Some(v + delta));
    }
    Ok(out)
}
