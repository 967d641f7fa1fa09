//! Mel scale conversions (HTK form), used to place initial knot frequencies.

use crate::error::{Error, Result};

/// Hz → mel, `2595 · log10(1 + f/700)`.
pub fn hz_to_mel(f: f64) -> Result<f64> {
    if f.is_nan() || f < 0.0 {
        return Err(Error::precondition(format!(
            "hz_to_mel requires f >= 0, got {f}"
        )));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

/// Mel → Hz, exact inverse of [`hz_to_mel`].
pub fn mel_to_hz(m: f64) -> Result<f64> {
    if m.is_nan() || m < 0.0 {
        return Err(Error::precondition(format!(
            "mel_to_hz requires m >= 0, got {m}"
        )));
    }
    Ok(700.0 * (10.0_f64.powf(m / 2595.0) - 1.0))
}
