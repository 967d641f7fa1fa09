//! Deterministic synthetic multi-class "speaker" corpus.
//!
//! Class identity lives in the spectral envelope: each class carries three
//! resonance center frequencies with bandwidths plus a pitch, all drawn from
//! the corpus seed. An utterance is a pulse train at the class pitch
//! (jittered per utterance) run through the resonator cascade, with white
//! noise 30 dB below the signal, scaled to peak 0.9. Every utterance is
//! generated from its own RNG stream derived from (seed, utterance index),
//! so generation order cannot change the output.

use std::f64::consts::PI;

use crate::data::{Corpus, Split, Utterance};
use crate::error::{Error, Result};
use crate::metrics::{Trial, TrialList};
use crate::seeds::{derive_seed, derive_seed_indexed};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Resonance bands as fractions of the sample rate.
const BAND_LO: [f64; 3] = [0.05, 0.19, 0.33];
const BAND_HI: [f64; 3] = [0.17, 0.31, 0.46];
/// Minimum pairwise class separation: some resonance differs by this many Hz.
const MIN_SEPARATION_HZ: f64 = 100.0;
const LATENT_ATTEMPTS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub utterances_per_class: usize,
    /// Seconds, inclusive range.
    pub duration_range: (f64, f64),
    pub sample_rate: f64,
    pub seed: u64,
    pub train_per_class: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_classes: 20,
            utterances_per_class: 10,
            duration_range: (0.3, 0.6),
            sample_rate: 4000.0,
            seed: 1,
            train_per_class: 8,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        if self.utterances_per_class < 2
            || self.train_per_class == 0
            || self.train_per_class >= self.utterances_per_class
        {
            return Err(Error::config(
                "need utterances_per_class >= 2 with 1 <= train_per_class < utterances_per_class",
            ));
        }
        let (lo, hi) = self.duration_range;
        if lo.is_nan() || hi.is_nan() || lo <= 0.0 || hi < lo {
            return Err(Error::config("duration_range must satisfy 0 < lo <= hi"));
        }
        // lowest resonance band must clear 50 Hz
        if self.sample_rate.is_nan() || self.sample_rate * BAND_LO[0] <= 50.0 {
            return Err(Error::config(format!(
                "sample_rate {} too low for resonances above 50 Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ClassLatent {
    pub resonances_hz: [f64; 3],
    pub bandwidths_hz: [f64; 3],
    pub pitch_hz: f64,
}

/// Per-class latents, rejection-sampled against the separation invariant.
pub fn class_latents(spec: &SynthSpec) -> Result<Vec<ClassLatent>> {
    spec.validate()?;
    let fs = spec.sample_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "class-latents"));
    let mut latents: Vec<ClassLatent> = Vec::with_capacity(spec.n_classes);
    for class in 0..spec.n_classes {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > LATENT_ATTEMPTS {
                return Err(Error::config(format!(
                    "could not place class {class}: too many classes for the \
                     {MIN_SEPARATION_HZ} Hz resonance separation constraint"
                )));
            }
            let mut res = [0.0; 3];
            for j in 0..3 {
                res[j] = fs * rng.gen_range(BAND_LO[j]..BAND_HI[j]);
            }
            let separated = latents.iter().all(|prev| {
                res.iter()
                    .zip(&prev.resonances_hz)
                    .any(|(&a, &b)| (a - b).abs() >= MIN_SEPARATION_HZ)
            });
            if !separated {
                continue;
            }
            let mut bw = [0.0; 3];
            for b in &mut bw {
                *b = fs * rng.gen_range(0.010..0.022);
            }
            latents.push(ClassLatent {
                resonances_hz: res,
                bandwidths_hz: bw,
                pitch_hz: rng.gen_range(80.0..220.0),
            });
            break;
        }
    }
    Ok(latents)
}

/// Two-pole resonator applied in place.
fn resonate(x: &mut [f64], center_hz: f64, bandwidth_hz: f64, fs: f64) {
    let r = (-PI * bandwidth_hz / fs).exp();
    let a1 = 2.0 * r * (2.0 * PI * center_hz / fs).cos();
    let a2 = -r * r;
    let b0 = 1.0 - r;
    let mut y1 = 0.0;
    let mut y2 = 0.0;
    for v in x.iter_mut() {
        let y = b0 * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|&v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn synth_corpus(spec: &SynthSpec) -> Result<Corpus> {
    let latents = class_latents(spec)?;
    let fs = spec.sample_rate;
    let mut utterances = Vec::with_capacity(spec.n_classes * spec.utterances_per_class);
    for (class, latent) in latents.iter().enumerate() {
        for u in 0..spec.utterances_per_class {
            let index = (class * spec.utterances_per_class + u) as u64;
            let utt_seed = derive_seed_indexed(spec.seed, "utterance", index);
            let mut rng = ChaCha8Rng::seed_from_u64(utt_seed);

            let (dlo, dhi) = spec.duration_range;
            let duration = if dhi > dlo {
                rng.gen_range(dlo..dhi)
            } else {
                dlo
            };
            let len = (duration * fs).round() as usize;
            let pitch = latent.pitch_hz * (1.0 + rng.gen_range(-0.05..0.05));
            let period = ((fs / pitch).round() as usize).max(2);

            let mut x = vec![0.0; len];
            let mut t = 0;
            while t < len {
                x[t] = 1.0;
                t += period;
            }
            for j in 0..3 {
                resonate(&mut x, latent.resonances_hz[j], latent.bandwidths_hz[j], fs);
            }

            let signal_rms = rms(&x);
            let noise: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise_rms = rms(&noise).max(1e-12);
            // exactly −30 dB relative to the signal
            let scale = signal_rms * 10f64.powf(-30.0 / 20.0) / noise_rms;
            for (v, n) in x.iter_mut().zip(&noise) {
                *v += scale * n;
            }
            let peak = x.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1e-12);
            let gain = 0.9 / peak;
            for v in &mut x {
                *v *= gain;
            }

            utterances.push(Utterance {
                samples: x,
                sample_rate: fs,
                class_id: class,
                split: if u < spec.train_per_class {
                    Split::Train
                } else {
                    Split::Test
                },
                utt_id: format!("c{class:03}_u{u:03}"),
                source_seed: utt_seed,
            });
        }
    }
    let corpus = Corpus {
        utterances,
        num_classes: spec.n_classes,
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Verification trials over the test split: one target trial per test
/// utterance plus `nontargets_per_target` distinct impostor claims.
///
/// `Trial::utterance` indexes the test utterances in corpus order.
pub fn make_trial_list(
    corpus: &Corpus,
    nontargets_per_target: usize,
    seed: u64,
) -> Result<TrialList> {
    if corpus.num_classes < 2 {
        return Err(Error::Data("trial list needs at least 2 classes".into()));
    }
    let test = corpus.split_indices(Split::Test);
    if test.is_empty() {
        return Err(Error::Data("no test utterances for trials".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "trial-list"));
    let mut trials = Vec::new();
    for (test_idx, &utt_idx) in test.iter().enumerate() {
        let true_class = corpus.utterances[utt_idx].class_id;
        trials.push(Trial {
            claimed_class: true_class,
            utterance: test_idx,
            is_target: true,
        });
        let mut impostors = Vec::new();
        while impostors.len() < nontargets_per_target.min(corpus.num_classes - 1) {
            let claim = rng.gen_range(0..corpus.num_classes);
            if claim != true_class && !impostors.contains(&claim) {
                impostors.push(claim);
            }
        }
        for claim in impostors {
            trials.push(Trial {
                claimed_class: claim,
                utterance: test_idx,
                is_target: false,
            });
        }
    }
    let list = TrialList { trials };
    list.validate(corpus.num_classes, test.len())?;
    Ok(list)
}
