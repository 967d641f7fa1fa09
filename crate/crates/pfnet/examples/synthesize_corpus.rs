//! Generate a deterministic synthetic speaker corpus and materialize it as
//! WAV files plus a manifest.
//!
//!     cargo run --release --example synthesize_corpus

use pfnet::data::synth::{class_latents, synth_corpus, SynthSpec};
use pfnet::data::{write_corpus, Split};

fn main() -> pfnet::Result<()> {
    let spec = SynthSpec {
        n_classes: 6,
        utterances_per_class: 4,
        duration_range: (0.4, 0.8),
        sample_rate: 8000.0,
        seed: 21,
        train_per_class: 3,
    };

    println!("class   resonances (Hz)           pitch (Hz)");
    for (i, latent) in class_latents(&spec)?.iter().enumerate() {
        println!(
            "{i:>5}   {:>5.0} {:>5.0} {:>5.0}         {:>5.1}",
            latent.resonances_hz[0],
            latent.resonances_hz[1],
            latent.resonances_hz[2],
            latent.pitch_hz
        );
    }

    let corpus = synth_corpus(&spec)?;
    let train = corpus.split_indices(Split::Train).len();
    let test = corpus.split_indices(Split::Test).len();
    println!(
        "\n{} utterances ({train} train / {test} test)",
        corpus.utterances.len()
    );

    let out = std::path::Path::new("synth-corpus-out");
    let manifest = write_corpus(&corpus, out)?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
