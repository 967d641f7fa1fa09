//! The training loop: seeded mini-batch RMSprop over frame cross-entropy,
//! periodic evaluation, metrics logging, and checkpointing.
//!
//! Everything stochastic draws from streams derived from the experiment seed
//! ((seed, "shuffle", epoch) for batch order), so a resumed run consumes the
//! same randomness as an uninterrupted one and two runs with the same config
//! produce bitwise-identical logs and checkpoints.

use std::path::PathBuf;
use std::time::Instant;

use crate::data::preprocess::frame_batch;
use crate::data::synth::{make_trial_list, synth_corpus};
use crate::data::{load_manifest, Corpus, FrameBatch, Split};
use crate::error::{Error, Result};
use crate::experiment::checkpoint::Checkpoint;
use crate::experiment::config::ExperimentConfig;
use crate::metrics::{
    classification_error_rate, eer, frame_error_rate, sentence_vote, MetricsReport, TrialList,
};
use crate::nn::loss::{softmax, softmax_cross_entropy};
use crate::nn::model::SpeakerNet;
use crate::seeds::derive_seed_indexed;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Frame accuracy (percent) at which "epochs to threshold" is recorded.
pub const FRAME_ACC_THRESHOLD_PERCENT: f64 = 95.0;

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub front_end: String,
    pub reports: Vec<MetricsReport>,
    pub loss_trajectory: Vec<f64>,
    /// First evaluated epoch with frame accuracy ≥ 95% on the test split.
    pub epochs_to_threshold: Option<usize>,
    pub checkpoint_path: Option<PathBuf>,
    pub metrics_log_path: Option<PathBuf>,
}

impl RunRecord {
    pub fn final_report(&self) -> Option<&MetricsReport> {
        self.reports.last()
    }
}

/// Training output for in-process callers: the record plus the trained model
/// and the evaluation fixtures it was scored on.
pub struct TrainOutput {
    pub record: RunRecord,
    pub model: SpeakerNet,
    pub corpus: Corpus,
    pub test_frames: FrameBatch,
    pub trials: Option<TrialList>,
}

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    match (&cfg.data.manifest, &cfg.data.synth) {
        (Some(path), None) => load_manifest(path),
        (None, Some(spec)) => synth_corpus(spec),
        _ => Err(Error::config("exactly one data source must be set")),
    }
}

/// Mean posterior row per test utterance, in corpus test order.
pub struct EvalScores {
    pub fer_percent: f64,
    pub cer_percent: f64,
    pub eer_percent: Option<f64>,
    pub mean_posteriors: Vec<Vec<f64>>,
    pub utterance_labels: Vec<usize>,
}

/// Eval-mode scoring of the test split; EER comes from the softmax posterior
/// of the claimed identity, averaged over an utterance's frames.
pub fn evaluate(
    model: &mut SpeakerNet,
    test: &FrameBatch,
    trials: Option<&TrialList>,
) -> Result<EvalScores> {
    let n = test.num_frames();
    let classes = model.classes;
    let mut posteriors = Tensor::zeros(&[n, classes]);
    let chunk = 256;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x = test.gather(&idx);
        let logits = model.forward(&x, false)?;
        let p = softmax(&logits)?;
        posteriors.data_mut()[start * classes..end * classes].copy_from_slice(p.data());
        start = end;
    }
    let fer = frame_error_rate(&posteriors, &test.labels)?;

    // group frames by source utterance (frames of one utterance are contiguous)
    let mut utt_order: Vec<usize> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, &u) in test.utterance_of.iter().enumerate() {
        match utt_order.last() {
            Some(&last) if last == u => spans.last_mut().unwrap().1 = i + 1,
            _ => {
                utt_order.push(u);
                spans.push((i, i + 1));
            }
        }
    }
    let mut predictions = Vec::with_capacity(spans.len());
    let mut labels = Vec::with_capacity(spans.len());
    let mut mean_posteriors = Vec::with_capacity(spans.len());
    for (&(lo, hi), _) in spans.iter().zip(&utt_order) {
        let rows = hi - lo;
        let sub = Tensor::from_vec(
            &[rows, classes],
            posteriors.data()[lo * classes..hi * classes].to_vec(),
        )?;
        predictions.push(sentence_vote(&sub)?);
        labels.push(test.labels[lo]);
        let mut mean = vec![0.0; classes];
        for r in 0..rows {
            for (m, &p) in mean.iter_mut().zip(sub.row(r)) {
                *m += p;
            }
        }
        for m in &mut mean {
            *m /= rows as f64;
        }
        mean_posteriors.push(mean);
    }
    let cer = classification_error_rate(&predictions, &labels)?;

    let eer_percent = match trials {
        Some(list) => {
            let mut scores = Vec::with_capacity(list.trials.len());
            let mut flags = Vec::with_capacity(list.trials.len());
            for t in &list.trials {
                let row = mean_posteriors.get(t.utterance).ok_or_else(|| {
                    Error::Data(format!(
                        "trial references unknown test utterance {}",
                        t.utterance
                    ))
                })?;
                scores.push(row[t.claimed_class]);
                flags.push(t.is_target);
            }
            Some(eer(&scores, &flags)?)
        }
        None => None,
    };

    Ok(EvalScores {
        fer_percent: fer,
        cer_percent: cer,
        eer_percent,
        mean_posteriors,
        utterance_labels: labels,
    })
}

pub fn train_loop(cfg: &ExperimentConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let hash = cfg.hash();
    let corpus = load_corpus(cfg)?;
    // no resampling: the corpus must already be at the configured rate
    if let Some(bad) = corpus
        .utterances
        .iter()
        .find(|u| u.sample_rate != cfg.filter.sample_rate)
    {
        return Err(Error::config(format!(
            "utterance {} is at {} Hz but the filter bank is configured for {} Hz",
            bad.utt_id, bad.sample_rate, cfg.filter.sample_rate
        )));
    }
    let train = frame_batch(&corpus, Split::Train, &cfg.frames)?;
    let test = frame_batch(&corpus, Split::Test, &cfg.frames)?;
    let trials = if corpus.num_classes >= 2 {
        make_trial_list(&corpus, cfg.verification.nontargets_per_target, cfg.seed).ok()
    } else {
        None
    };

    let mut model = SpeakerNet::new(
        &cfg.front_end_config(),
        &cfg.head,
        corpus.num_classes,
        train.frame_len(),
        cfg.seed,
    )?;

    let setup_hash = cfg.setup_hash();
    let mut start_epoch = 0usize;
    if let Some(resume) = &cfg.resume {
        let ckpt = Checkpoint::load(resume)?;
        if ckpt.config_hash != setup_hash {
            return Err(Error::config(format!(
                "resume checkpoint was produced by setup {} but this config's setup hashes to {setup_hash}",
                ckpt.config_hash
            )));
        }
        ckpt.apply(&mut model)?;
        start_epoch = ckpt.epoch as usize;
        if start_epoch > cfg.epochs {
            return Err(Error::config(format!(
                "checkpoint is at epoch {start_epoch}, beyond the configured {} epochs",
                cfg.epochs
            )));
        }
    }

    let started = Instant::now();
    let mut reports = Vec::new();
    let mut loss_trajectory = Vec::new();
    let mut epochs_to_threshold = None;

    let eval_and_record = |model: &mut SpeakerNet,
                           epoch: usize,
                           train_loss: f64,
                           reports: &mut Vec<MetricsReport>,
                           epochs_to_threshold: &mut Option<usize>|
     -> Result<()> {
        let scores = evaluate(model, &test, trials.as_ref())?;
        if epochs_to_threshold.is_none()
            && 100.0 - scores.fer_percent >= FRAME_ACC_THRESHOLD_PERCENT
            && epoch > 0
        {
            *epochs_to_threshold = Some(epoch);
        }
        reports.push(MetricsReport {
            epoch,
            train_loss,
            fer_percent: scores.fer_percent,
            cer_percent: scores.cer_percent,
            eer_percent: scores.eer_percent,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        Ok(())
    };

    if cfg.epochs == start_epoch {
        eval_and_record(
            &mut model,
            start_epoch,
            f64::NAN,
            &mut reports,
            &mut epochs_to_threshold,
        )?;
    }

    let n_frames = train.num_frames();
    for epoch in start_epoch + 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n_frames).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed_indexed(cfg.seed, "shuffle", epoch as u64));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut frames_seen = 0usize;
        for (batch_index, batch) in order.chunks(cfg.optimizer.batch_size).enumerate() {
            if batch.len() < 2 {
                // batch norm needs at least two samples; drop the remainder
                continue;
            }
            let x = train.gather(batch);
            let y: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let logits = model.forward(&x, true)?;
            let (loss, dlogits, _) = softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "epoch {epoch} batch {batch_index}: loss {loss}"
                )));
            }
            model.zero_grads();
            model.backward(&dlogits)?;
            model.step(&cfg.optimizer).map_err(|e| {
                Error::Divergence(format!("epoch {epoch} batch {batch_index}: {e}"))
            })?;
            loss_sum += loss * batch.len() as f64;
            frames_seen += batch.len();
        }
        let mean_loss = loss_sum / frames_seen.max(1) as f64;
        loss_trajectory.push(mean_loss);

        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            eval_and_record(
                &mut model,
                epoch,
                mean_loss,
                &mut reports,
                &mut epochs_to_threshold,
            )?;
        }
    }

    // persist outputs
    let mut checkpoint_path = None;
    let mut metrics_log_path = None;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        let ckpt_path = dir.join("checkpoint.bin");
        Checkpoint::capture(&mut model, cfg.epochs as u64, &setup_hash).save(&ckpt_path)?;
        let log_path = dir.join("metrics.log");
        let mut log = String::new();
        for r in &reports {
            log.push_str(&r.log_line());
            log.push('\n');
        }
        std::fs::write(&log_path, log)?;
        checkpoint_path = Some(ckpt_path);
        metrics_log_path = Some(log_path);
    }

    Ok(TrainOutput {
        record: RunRecord {
            config_hash: hash,
            front_end: cfg.front_end.name().to_string(),
            reports,
            loss_trajectory,
            epochs_to_threshold,
            checkpoint_path,
            metrics_log_path,
        },
        model,
        corpus,
        test_frames: test,
        trials,
    })
}
