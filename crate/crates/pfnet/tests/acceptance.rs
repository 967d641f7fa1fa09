//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//!     cargo test --test acceptance -- --nocapture
//!
//! Criteria 4–6 share one training grid (3 seeds × 3 front ends over the
//! same 20-class synthetic corpus), built once behind a lock.

use std::sync::OnceLock;

use pfnet::data::synth::SynthSpec;
use pfnet::experiment::bench::{run_bench, BenchConfig};
use pfnet::experiment::config::ExperimentConfig;
use pfnet::experiment::train::{train_loop, TrainOutput};
use pfnet::filterbank::{
    response_fidelity, sinc_bandpass_kernel, synthesize_kernel, FrequencyKnots,
};
use pfnet::metrics::{classification_error_rate, eer, frame_error_rate, sentence_vote};
use pfnet::nn::gradcheck::{gradient_check_suite, GradCheckConfig};
use pfnet::nn::loss::softmax;
use pfnet::nn::model::FrontEndKind;
use pfnet::tensor::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. SincNet reduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_sincnet_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let kernel_len = 251;
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let f_beg = rng.gen_range(0.0..0.40);
        let f_end = rng.gen_range(f_beg + 0.02..0.5);
        let reference = sinc_bandpass_kernel(f_beg, f_end, kernel_len).unwrap();
        for s in [1usize, 3, 5] {
            // random interior knots, strictly increasing, heights all 1
            let mut cuts: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..0.95)).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut freqs = vec![f_beg];
            freqs.extend(cuts.iter().map(|&c| f_beg + c * (f_end - f_beg)));
            freqs.push(f_end);
            freqs.dedup_by(|b, a| (*b - *a).abs() < 1e-6);
            let heights = vec![1.0; freqs.len()];
            let knots = FrequencyKnots::new(freqs, heights).unwrap();
            let kernel = synthesize_kernel(&knots, kernel_len).unwrap();
            let diff = kernel
                .taps()
                .iter()
                .zip(reference.taps())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            worst = worst.max(diff);
        }
    }
    verdict(
        1,
        "sincnet reduction",
        worst <= 1e-12,
        &format!("max |tap diff| {worst:.3e} over 50 cutoff pairs x S in {{1,3,5}} (bound 1e-12)"),
    );
}

// ---------------------------------------------------------------------------
// 2. Spectral fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_spectral_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let lengths = [251usize, 511, 1023, 2047];
    let grid = 4 * 2047 + 1;
    let mut max_final = 0.0_f64;
    let mut monotone = true;
    let mut endpoints_ordered = true;
    let mut detail = String::new();
    for set in 0..20 {
        // random valid knot set with S = 5
        let f0 = rng.gen_range(0.05..0.15);
        let width = rng.gen_range(0.15..0.3);
        let mut cuts: Vec<f64> = (0..5).map(|_| rng.gen_range(0.05..0.95)).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut freqs = vec![f0];
        freqs.extend(cuts.iter().map(|&c| f0 + c * width));
        freqs.push(f0 + width);
        let heights: Vec<f64> = (0..freqs.len())
            .map(|_| 1.0 + rng.gen_range(-0.1..0.1))
            .collect();
        let knots = match FrequencyKnots::new(freqs, heights) {
            Ok(k) => k,
            Err(_) => continue, // duplicate cut, measure-zero; skip
        };
        let errs: Vec<f64> = lengths
            .iter()
            .map(|&len| {
                let kernel = synthesize_kernel(&knots, len).unwrap();
                response_fidelity(&kernel, &knots, grid).unwrap()
            })
            .collect();
        for pair in errs.windows(2) {
            if pair[1] > pair[0] * 1.1 {
                monotone = false;
                detail = format!("set {set}: fidelity rose {:.4} -> {:.4}", pair[0], pair[1]);
            }
        }
        if errs[3] >= errs[0] {
            endpoints_ordered = false;
        }
        max_final = max_final.max(errs[3]);
    }
    let pass = max_final < 0.05 && monotone && endpoints_ordered;
    verdict(
        2,
        "spectral fidelity",
        pass,
        &format!(
            "worst rel L2 at L=2047: {max_final:.4} (< 0.05); monotone within 10%: {monotone}; \
             error(251) > error(2047): {endpoints_ordered} {detail}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Gradient suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_gradient_suite() {
    let report = gradient_check_suite(&GradCheckConfig::default()).unwrap();
    let worst = report
        .entries
        .iter()
        .map(|e| e.max_rel_err)
        .fold(0.0_f64, f64::max);
    verdict(
        3,
        "gradient suite",
        report.all_pass() && worst < 1e-4,
        &format!(
            "all {} groups within thresholds, worst rel err {worst:.3e} (< 1e-4)",
            report.entries.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Shared training grid for criteria 4–6
// ---------------------------------------------------------------------------

const GRID_EPOCHS: usize = 12;
const GRID_SEEDS: [u64; 3] = [1, 2, 3];

struct Grid {
    /// outputs[front][seed]
    pfnet: Vec<TrainOutput>,
    sincnet: Vec<TrainOutput>,
    raw_fir: Vec<TrainOutput>,
}

fn grid_config(front: FrontEndKind, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.front_end = front;
    cfg.epochs = GRID_EPOCHS;
    cfg.eval_every = 1;
    cfg.seed = seed;
    if front == FrontEndKind::Sincnet {
        cfg.filter.num_deform_points = 0;
    }
    cfg.data.synth = Some(SynthSpec {
        n_classes: 20,
        utterances_per_class: 10,
        train_per_class: 8,
        seed,
        ..SynthSpec::default()
    });
    cfg
}

fn grid() -> &'static Grid {
    static GRID: OnceLock<Grid> = OnceLock::new();
    GRID.get_or_init(|| {
        let run = |front: FrontEndKind| -> Vec<TrainOutput> {
            GRID_SEEDS
                .iter()
                .map(|&seed| train_loop(&grid_config(front, seed)).expect("grid run"))
                .collect()
        };
        Grid {
            pfnet: run(FrontEndKind::Pfnet),
            sincnet: run(FrontEndKind::Sincnet),
            raw_fir: run(FrontEndKind::RawFir),
        }
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

/// Epochs to 95% frame accuracy, censored at epochs + 1 when never reached.
fn epochs_to_threshold(out: &TrainOutput) -> f64 {
    out.record
        .epochs_to_threshold
        .map(|e| e as f64)
        .unwrap_or((GRID_EPOCHS + 1) as f64)
}

fn final_cer(out: &TrainOutput) -> f64 {
    out.record.final_report().unwrap().cer_percent
}

#[test]
fn criterion_4_convergence_ordering() {
    let g = grid();
    let mut pf: Vec<f64> = g.pfnet.iter().map(epochs_to_threshold).collect();
    let mut raw: Vec<f64> = g.raw_fir.iter().map(epochs_to_threshold).collect();
    let pf_median = median(&mut pf);
    let raw_median = median(&mut raw);
    verdict(
        4,
        "convergence ordering",
        pf_median < raw_median,
        &format!(
            "median epochs to 95% frame accuracy: pfnet {pf_median} vs raw_fir {raw_median} \
             (censored at {} when never reached; per-seed pfnet {:?}, raw_fir {:?})",
            GRID_EPOCHS + 1,
            g.pfnet.iter().map(epochs_to_threshold).collect::<Vec<_>>(),
            g.raw_fir
                .iter()
                .map(epochs_to_threshold)
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_5_accuracy_ordering() {
    let g = grid();
    let mut pf: Vec<f64> = g.pfnet.iter().map(final_cer).collect();
    let mut sinc: Vec<f64> = g.sincnet.iter().map(final_cer).collect();
    let mut raw: Vec<f64> = g.raw_fir.iter().map(final_cer).collect();
    let pf_m = median(&mut pf);
    let sinc_m = median(&mut sinc);
    let raw_m = median(&mut raw);
    let pass = pf_m <= raw_m && pf_m <= sinc_m + 0.5;
    verdict(
        5,
        "accuracy ordering",
        pass,
        &format!(
            "median final CER: pfnet {pf_m}% <= raw_fir {raw_m}% and pfnet within 0.5pp of \
             sincnet {sinc_m}%"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. EER machinery
// ---------------------------------------------------------------------------

/// Exhaustive brute-force threshold sweep, independent of the library path:
/// for every candidate threshold count FAR/FRR directly, walk the polyline,
/// interpolate the diagonal crossing linearly.
fn eer_bruteforce_oracle(scores: &[f64], flags: &[bool]) -> f64 {
    let n_t = flags.iter().filter(|&&t| t).count() as f64;
    let n_n = flags.len() as f64 - n_t;
    let mut uniq = scores.to_vec();
    uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    uniq.dedup();
    let mut points = vec![(1.0_f64, 0.0_f64)];
    for &theta in &uniq {
        let far = scores
            .iter()
            .zip(flags)
            .filter(|(&s, &t)| !t && s > theta)
            .count() as f64
            / n_n;
        let frr = scores
            .iter()
            .zip(flags)
            .filter(|(&s, &t)| t && s <= theta)
            .count() as f64
            / n_t;
        points.push((far, frr));
    }
    let mut prev = points[0];
    let mut prev_d = prev.0 - prev.1;
    if prev_d <= 0.0 {
        return 100.0 * (prev.0 + prev.1) / 2.0;
    }
    for &p in &points[1..] {
        let d = p.0 - p.1;
        if d == 0.0 {
            return 100.0 * (p.0 + p.1) / 2.0;
        }
        if d < 0.0 {
            let t = prev_d / (prev_d - d);
            let far = prev.0 + t * (p.0 - prev.0);
            let frr = prev.1 + t * (p.1 - prev.1);
            return 100.0 * (far + frr) / 2.0;
        }
        prev = p;
        prev_d = d;
    }
    100.0 * (prev.0 + prev.1) / 2.0
}

#[test]
fn criterion_6_eer_machinery() {
    // part 1: implementation equals the brute-force oracle on 1000 trial sets
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let mut checked = 0;
    let mut worst = 0.0_f64;
    while checked < 1000 {
        let n = rng.gen_range(4..120);
        let mut scores = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for _ in 0..n {
            let t = rng.gen_bool(0.5);
            let s = if rng.gen_bool(0.8) {
                // overlapping score ranges
                if t {
                    rng.gen_range(0.2..1.0)
                } else {
                    rng.gen_range(0.0..0.8)
                }
            } else {
                rng.gen_range(0.0..1.0)
            };
            scores.push(s);
            flags.push(t);
        }
        if !flags.iter().any(|&t| t) || flags.iter().all(|&t| t) {
            continue;
        }
        let fast = eer(&scores, &flags).unwrap();
        let slow = eer_bruteforce_oracle(&scores, &flags);
        worst = worst.max((fast - slow).abs());
        checked += 1;
    }
    let oracle_ok = worst <= 1e-9;

    // part 2: the trained pfnet models separate the verification trials
    let g = grid();
    let mut eers: Vec<f64> = g
        .pfnet
        .iter()
        .map(|o| {
            o.record
                .final_report()
                .unwrap()
                .eer_percent
                .expect("trials exist")
        })
        .collect();
    let eer_median = median(&mut eers);
    let model_ok = eer_median < 10.0;

    verdict(
        6,
        "eer machinery",
        oracle_ok && model_ok,
        &format!(
            "oracle agreement over 1000 trial sets: max |diff| {worst:.2e} (<= 1e-9); \
             trained pfnet median EER {eer_median}% (< 10%, chance ~50%)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Metric identities
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_metric_identities() {
    // FER
    let p = Tensor::from_vec(&[4, 2], vec![0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7]).unwrap();
    let fer_ok = frame_error_rate(&p, &[0, 1, 0, 1]).unwrap() == 0.0
        && frame_error_rate(&p, &[1, 0, 1, 0]).unwrap() == 100.0
        && frame_error_rate(&p, &[0, 1, 0, 0]).unwrap() == 25.0;

    // vote
    let v = Tensor::from_vec(&[3, 2], vec![0.6, 0.4, 0.2, 0.8, 0.55, 0.45]).unwrap();
    let vote_ok = sentence_vote(&v).unwrap() == 1
        && sentence_vote(&Tensor::from_vec(&[1, 2], vec![0.7, 0.3]).unwrap()).unwrap() == 0;

    // CER
    let cer_ok = classification_error_rate(&[0, 1, 2], &[0, 1, 2]).unwrap() == 0.0
        && classification_error_rate(&[0; 10], &[0, 0, 0, 0, 0, 0, 0, 1, 1, 1]).unwrap() == 30.0;

    // EER trivial cases
    let eer_ok = eer(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false])
        .unwrap()
        .abs()
        < 1e-12
        && (eer(&[0.1, 0.9], &[true, false]).unwrap() - 100.0).abs() < 1e-12;

    // posterior rows sum to 1 ± 1e-12 across an entire evaluation run
    let g = grid();
    let out = &g.pfnet[0];
    let mut model = out.model.clone();
    let mut max_row_err = 0.0_f64;
    let n = out.test_frames.num_frames();
    let mut start = 0;
    while start < n {
        let end = (start + 256).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x = out.test_frames.gather(&idx);
        let logits = model.forward(&x, false).unwrap();
        let posts = softmax(&logits).unwrap();
        for b in 0..end - start {
            let s: f64 = posts.row(b).iter().sum();
            max_row_err = max_row_err.max((s - 1.0).abs());
        }
        start = end;
    }
    let rows_ok = max_row_err <= 1e-12;

    verdict(
        7,
        "metric identities",
        fer_ok && vote_ok && cer_ok && eer_ok && rows_ok,
        &format!(
            "FER {fer_ok}, vote {vote_ok}, CER {cer_ok}, EER {eer_ok}; \
             posterior row-sum deviation {max_row_err:.2e} over {n} frames (<= 1e-12)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_determinism() {
    let base = std::env::temp_dir().join("pfnet-acceptance-determinism");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();

    let mut cfg = ExperimentConfig::default();
    cfg.epochs = 3;
    cfg.seed = 11;
    cfg.data.synth = Some(SynthSpec {
        n_classes: 6,
        utterances_per_class: 6,
        train_per_class: 4,
        seed: 11,
        ..SynthSpec::default()
    });

    let mut run_a = cfg.clone();
    run_a.output_dir = Some(base.join("a"));
    let mut run_b = cfg.clone();
    run_b.output_dir = Some(base.join("b"));
    let a = train_loop(&run_a).unwrap();
    let b = train_loop(&run_b).unwrap();

    let log_a = std::fs::read(a.record.metrics_log_path.as_ref().unwrap()).unwrap();
    let log_b = std::fs::read(b.record.metrics_log_path.as_ref().unwrap()).unwrap();
    let ckpt_a = std::fs::read(a.record.checkpoint_path.as_ref().unwrap()).unwrap();
    let ckpt_b = std::fs::read(b.record.checkpoint_path.as_ref().unwrap()).unwrap();

    verdict(
        8,
        "determinism",
        log_a == log_b && ckpt_a == ckpt_b,
        &format!(
            "metrics logs identical: {} ({} bytes); checkpoints identical: {} ({} bytes)",
            log_a == log_b,
            log_a.len(),
            ckpt_a == ckpt_b,
            ckpt_a.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Symmetry speedup
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_symmetry_speedup() {
    let report = run_bench(&BenchConfig {
        num_filters: 80,
        kernel_len: 251,
        num_deform_points: 5,
        batch: 128,
        frame_len: 400,
        reps: 5,
        seed: 42,
    })
    .unwrap();
    let pass = report.forward_speedup >= 1.3 && report.max_rel_diff < 1e-9;
    verdict(
        9,
        "symmetry speedup",
        pass,
        &format!(
            "forward speedup {:.2}x (>= 1.3x) at F=80 L=251 batch 128; \
             {:.0} vs {:.0} frames/s; paths agree to {:.2e}",
            report.forward_speedup,
            report.frames_per_s_symmetric,
            report.frames_per_s_naive,
            report.max_rel_diff
        ),
    );
}
