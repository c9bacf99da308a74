use crate::corpus::{LabelRange, TaskManifest};
use thiserror::Error;

/// Uniform binning of a numeric label range into `levels + 1` integer bins
/// `0..=levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningSpec {
    pub min: f64,
    pub max: f64,
    pub levels: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BinError {
    #[error("binning needs finite min < max and levels >= 1")]
    BadSpec,
    #[error("label is NaN")]
    NotANumber,
    #[error("bin {0} outside 0..={1}")]
    OutOfRange(i64, u32),
}

impl BinningSpec {
    pub fn new(min: f64, max: f64, levels: u32) -> Result<Self, BinError> {
        if min.is_finite() && max.is_finite() && min < max && levels >= 1 {
            Ok(BinningSpec { min, max, levels })
        } else {
            Err(BinError::BadSpec)
        }
    }

    /// `None` unless the manifest carries a fixed label range.
    pub fn from_manifest(m: &TaskManifest) -> Option<Self> {
        match m.label_range {
            Some(LabelRange::Fixed { min, max }) => BinningSpec::new(min, max, m.levels).ok(),
            _ => None,
        }
    }

    pub fn midpoint_bin(&self) -> u32 {
        self.levels / 2
    }
}

/// Zero-padded to three digits; the top bin of the default spec prints as "1000".
pub fn render_bin(bin: u32) -> String {
    format!("{bin:03}")
}

pub fn bin_label(y: f64, spec: &BinningSpec) -> Result<(u32, String), BinError> {
    if y.is_nan() {
        return Err(BinError::NotANumber);
    }
    let clamped = y.clamp(spec.min, spec.max);
    let frac = (clamped - spec.min) / (spec.max - spec.min);
    let bin = (spec.levels as f64 * frac).round() as u32;
    Ok((bin, render_bin(bin)))
}

pub fn unbin_label(bin: i64, spec: &BinningSpec) -> Result<f64, BinError> {
    if bin < 0 || bin > spec.levels as i64 {
        return Err(BinError::OutOfRange(bin, spec.levels));
    }
    Ok(spec.min + (bin as f64 / spec.levels as f64) * (spec.max - spec.min))
}
