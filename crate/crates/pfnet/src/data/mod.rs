//! Corpora: synthetic generation, WAV ingestion, and preprocessing into
//! labeled frame batches.

pub mod manifest;
pub mod preprocess;
pub mod synth;
pub mod wav;

pub use manifest::{load_manifest, write_corpus};
pub use preprocess::{frame_batch, frame_starts, max_normalize, trim_silence, FrameConfig};
pub use synth::{make_trial_list, synth_corpus, SynthSpec};
pub use wav::{wav_read, wav_write};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Enroll,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Enroll => "enroll",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "enroll" => Ok(Split::Enroll),
            other => Err(Error::format("split", format!("unknown split '{other}'"))),
        }
    }
}

/// One labeled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    /// Samples in [−1, 1].
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub class_id: usize,
    pub split: Split,
    pub utt_id: String,
    /// Seed of the per-utterance stream for synthetic data (0 for loaded WAVs).
    pub source_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub num_classes: usize,
}

impl Corpus {
    /// Indices of utterances in the given split, in corpus order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.utterances
            .iter()
            .enumerate()
            .filter(|(_, u)| u.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 1 || self.utterances.is_empty() {
            return Err(Error::Data("empty corpus".into()));
        }
        for u in &self.utterances {
            if u.class_id >= self.num_classes {
                return Err(Error::Data(format!(
                    "utterance {} has class {} >= {}",
                    u.utt_id, u.class_id, self.num_classes
                )));
            }
            if !u.samples.iter().all(|v| v.is_finite()) {
                return Err(Error::Data(format!(
                    "utterance {} has non-finite samples",
                    u.utt_id
                )));
            }
        }
        Ok(())
    }
}

/// Preprocessed frames ready for the network.
#[derive(Debug, Clone)]
pub struct FrameBatch {
    /// `[N, 1, W]`, every frame max-normalized.
    pub frames: Tensor,
    pub labels: Vec<usize>,
    /// Frame → index into the corpus utterance list.
    pub utterance_of: Vec<usize>,
    /// Utterances dropped because they were silent or shorter than a window.
    pub skipped_utterances: usize,
}

impl FrameBatch {
    pub fn num_frames(&self) -> usize {
        self.labels.len()
    }

    pub fn frame_len(&self) -> usize {
        self.frames.dim(2)
    }

    /// Gather rows into a `[B, 1, W]` batch tensor.
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let w = self.frame_len();
        let mut out = Tensor::zeros(&[indices.len(), 1, w]);
        for (row, &idx) in indices.iter().enumerate() {
            out.lane_mut(row, 0)
                .copy_from_slice(self.frames.lane(idx, 0));
        }
        out
    }
}
