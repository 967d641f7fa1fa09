//! Corpus manifest: CSV `utt_id,class_id,split,path_or_inline,seed` plus
//! materialized WAV files.

use std::path::{Path, PathBuf};

use crate::data::wav::{wav_read, wav_write};
use crate::data::{Corpus, Split, Utterance};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "utt_id,class_id,split,path_or_inline,seed";

/// Materialize a corpus: WAVs under `dir/wav/`, manifest at
/// `dir/manifest.csv`. Returns the manifest path.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    corpus.validate()?;
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir)?;
    let mut lines = vec![MANIFEST_HEADER.to_string()];
    for utt in &corpus.utterances {
        let rel = format!("wav/{}.wav", utt.utt_id);
        wav_write(&dir.join(&rel), &utt.samples, utt.sample_rate)?;
        lines.push(format!(
            "{},{},{},{},{}",
            utt.utt_id,
            utt.class_id,
            utt.split.name(),
            rel,
            utt.source_seed
        ));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, lines.join("\n") + "\n")?;
    Ok(path)
}

/// Load a manifest and its WAV files (paths resolved relative to the
/// manifest's directory).
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != MANIFEST_HEADER {
        return Err(Error::format(
            "manifest_header",
            format!("expected '{MANIFEST_HEADER}', got '{header}'"),
        ));
    }
    let mut utterances = Vec::new();
    let mut max_class = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::format(
                "manifest_row",
                format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 2,
                    fields.len()
                ),
            ));
        }
        let class_id: usize = fields[1]
            .parse()
            .map_err(|e| Error::format("class_id", format!("line {}: {e}", lineno + 2)))?;
        let split = Split::parse(fields[2])?;
        let seed: u64 = fields[4]
            .parse()
            .map_err(|e| Error::format("seed", format!("line {}: {e}", lineno + 2)))?;
        let (samples, sample_rate) = wav_read(&base.join(fields[3]))?;
        max_class = max_class.max(class_id);
        utterances.push(Utterance {
            samples,
            sample_rate,
            class_id,
            split,
            utt_id: fields[0].to_string(),
            source_seed: seed,
        });
    }
    let corpus = Corpus {
        utterances,
        num_classes: max_class + 1,
    };
    corpus.validate()?;
    Ok(corpus)
}
