//! Preprocessing: silence trimming, framing, maximum normalization.

use crate::data::{Corpus, FrameBatch, Split, Utterance};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub window_ms: f64,
    /// Frame step by default; when `hop_is_overlap` is set this value is the
    /// overlap between consecutive frames instead (hop = window − overlap).
    pub hop_ms: f64,
    pub hop_is_overlap: bool,
    /// Energy-trim threshold relative to the utterance peak, in dB (< 0).
    pub trim_threshold_db: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            window_ms: 200.0,
            hop_ms: 10.0,
            hop_is_overlap: false,
            trim_threshold_db: -40.0,
        }
    }
}

impl FrameConfig {
    pub fn window_samples(&self, sample_rate: f64) -> usize {
        (self.window_ms * sample_rate / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: f64) -> Result<usize> {
        let step_or_overlap = (self.hop_ms * sample_rate / 1000.0).round() as usize;
        let hop = if self.hop_is_overlap {
            let w = self.window_samples(sample_rate);
            if step_or_overlap >= w {
                return Err(Error::config(format!(
                    "overlap {step_or_overlap} must be smaller than window {w}"
                )));
            }
            w - step_or_overlap
        } else {
            step_or_overlap
        };
        if hop == 0 {
            return Err(Error::config("hop must be at least one sample"));
        }
        Ok(hop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_ms.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || self.hop_ms.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return Err(Error::config("window_ms and hop_ms must be positive"));
        }
        if self.trim_threshold_db.is_nan() || self.trim_threshold_db >= 0.0 {
            return Err(Error::precondition(
                "trim threshold must be negative dB relative to peak",
            ));
        }
        Ok(())
    }
}

/// Remove leading/trailing regions whose 10 ms RMS falls below
/// `peak + threshold_db`. Returns `None` for fully silent utterances.
pub fn trim_silence(utt: &Utterance, threshold_db: f64) -> Result<Option<Utterance>> {
    if threshold_db.is_nan() || threshold_db >= 0.0 {
        return Err(Error::precondition(format!(
            "threshold must be negative dB relative to peak, got {threshold_db}"
        )));
    }
    let peak = utt.samples.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(None);
    }
    let block = ((utt.sample_rate * 0.010).round() as usize).max(1);
    let floor = peak * 10f64.powf(threshold_db / 20.0);
    let n_blocks = utt.samples.len().div_ceil(block);
    let block_loud = |i: usize| -> bool {
        let lo = i * block;
        let hi = ((i + 1) * block).min(utt.samples.len());
        let seg = &utt.samples[lo..hi];
        let rms = (seg.iter().map(|&v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
        rms >= floor
    };
    let first = (0..n_blocks).find(|&i| block_loud(i));
    let last = (0..n_blocks).rev().find(|&i| block_loud(i));
    match (first, last) {
        (Some(f), Some(l)) => {
            let lo = f * block;
            let hi = ((l + 1) * block).min(utt.samples.len());
            Ok(Some(Utterance {
                samples: utt.samples[lo..hi].to_vec(),
                ..utt.clone()
            }))
        }
        _ => Ok(None),
    }
}

/// Start offsets for frames of `window` samples every `hop` samples, no
/// padding: count = floor((len − window)/hop) + 1.
pub fn frame_starts(len: usize, window: usize, hop: usize) -> Vec<usize> {
    if len < window {
        return Vec::new();
    }
    (0..=(len - window)).step_by(hop).collect()
}

/// Divide by the max absolute value; all-zero frames pass through unchanged.
pub fn max_normalize(frame: &[f64]) -> Vec<f64> {
    let peak = frame.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if peak == 0.0 {
        return frame.to_vec();
    }
    frame.iter().map(|&v| v / peak).collect()
}

/// Trim, frame, and normalize every utterance of a split.
pub fn frame_batch(corpus: &Corpus, split: Split, cfg: &FrameConfig) -> Result<FrameBatch> {
    cfg.validate()?;
    let indices = corpus.split_indices(split);
    let mut rows: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut utterance_of = Vec::new();
    let mut skipped = 0;
    let mut window = 0;
    for &idx in &indices {
        let utt = &corpus.utterances[idx];
        let w = cfg.window_samples(utt.sample_rate);
        let hop = cfg.hop_samples(utt.sample_rate)?;
        if window == 0 {
            window = w;
        } else if window != w {
            return Err(Error::config(
                "mixed sample rates produce differing frame widths",
            ));
        }
        let trimmed = match trim_silence(utt, cfg.trim_threshold_db)? {
            Some(t) => t,
            None => {
                skipped += 1;
                continue;
            }
        };
        let starts = frame_starts(trimmed.samples.len(), w, hop);
        if starts.is_empty() {
            skipped += 1;
            continue;
        }
        for s in starts {
            rows.extend(max_normalize(&trimmed.samples[s..s + w]));
            labels.push(utt.class_id);
            utterance_of.push(idx);
        }
    }
    if labels.is_empty() {
        return Err(Error::Data(format!(
            "split {} produced no frames ({skipped} utterances skipped)",
            split.name()
        )));
    }
    let frames = Tensor::from_vec(&[labels.len(), 1, window], rows)?;
    Ok(FrameBatch {
        frames,
        labels,
        utterance_of,
        skipped_utterances: skipped,
    })
}
