//! Throughput benchmark: symmetric-kernel paths against naive ones.
//!
//! The symmetric forward path folds each input window once — the fold is
//! shared across every filter of the bank — and synthesizes only half of
//! each even-symmetric kernel; the naive path synthesizes all taps and runs
//! a plain full-length dot product per filter. Both produce the same outputs
//! (up to summation order), so the reported speedup measures the symmetry
//! exploit alone.

use std::time::Instant;

use crate::error::Result;
use crate::filterbank::{
    init_filterbank, synthesize_kernel_half, synthesize_kernel_naive, FilterLayer,
    FilterLayerOptions, FilterSpec,
};
use crate::tensor::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub num_filters: usize,
    pub kernel_len: usize,
    pub num_deform_points: usize,
    pub batch: usize,
    pub frame_len: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            num_filters: 80,
            kernel_len: 251,
            num_deform_points: 5,
            batch: 128,
            frame_len: 400,
            reps: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub config: BenchConfig,
    /// Batch forward wall time, seconds (median of reps).
    pub forward_symmetric_s: f64,
    pub forward_naive_s: f64,
    pub forward_speedup: f64,
    pub frames_per_s_symmetric: f64,
    pub frames_per_s_naive: f64,
    /// Full-bank kernel synthesis wall time, seconds (median of reps).
    pub synth_symmetric_s: f64,
    pub synth_naive_s: f64,
    pub synth_speedup: f64,
    /// Largest relative element difference between the two forward paths.
    pub max_rel_diff: f64,
}

impl BenchReport {
    pub fn render(&self) -> String {
        format!(
            "filter bank: F={} L={} S={} | batch {} x {} samples\n\
             kernel synthesis : symmetric {:>9.3} ms | naive {:>9.3} ms | speedup {:.2}x\n\
             forward (batch)  : symmetric {:>9.3} ms | naive {:>9.3} ms | speedup {:.2}x\n\
             throughput       : symmetric {:>9.0} frames/s | naive {:>9.0} frames/s\n\
             path agreement   : max relative difference {:.3e}",
            self.config.num_filters,
            self.config.kernel_len,
            self.config.num_deform_points,
            self.config.batch,
            self.config.frame_len,
            self.synth_symmetric_s * 1e3,
            self.synth_naive_s * 1e3,
            self.synth_speedup,
            self.forward_symmetric_s * 1e3,
            self.forward_naive_s * 1e3,
            self.forward_speedup,
            self.frames_per_s_symmetric,
            self.frames_per_s_naive,
            self.max_rel_diff
        )
    }
}

fn median_time<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let t0 = Instant::now();
            f();
            t0.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times[times.len() / 2]
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let spec = FilterSpec::new(
        cfg.num_filters,
        cfg.kernel_len,
        cfg.num_deform_points,
        4000.0,
    );
    let bank = init_filterbank(&spec, cfg.seed)?;
    let mut layer = FilterLayer::new(spec.clone(), bank, FilterLayerOptions::default())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = Tensor::from_vec(
        &[cfg.batch, 1, cfg.frame_len],
        (0..cfg.batch * cfg.frame_len)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )?;

    // correctness first: both paths must agree
    let fast = layer.forward(&x)?;
    let slow = layer.forward_naive(&x)?;
    let mut max_rel_diff = 0.0_f64;
    for (a, b) in fast.data().iter().zip(slow.data()) {
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-9);
        max_rel_diff = max_rel_diff.max(rel);
    }

    // warmup already done; time the paths
    let forward_symmetric_s = median_time(cfg.reps, || {
        let _ = layer.forward(&x).unwrap();
    });
    let forward_naive_s = median_time(cfg.reps, || {
        let _ = layer.forward_naive(&x).unwrap();
    });

    let knots: Vec<_> = (0..cfg.num_filters).map(|i| layer.resolve(i)).collect();
    let synth_symmetric_s = median_time(cfg.reps.max(10), || {
        for k in &knots {
            let half = synthesize_kernel_half(k, cfg.kernel_len).unwrap();
            std::hint::black_box(&half);
        }
    });
    let synth_naive_s = median_time(cfg.reps.max(10), || {
        for k in &knots {
            let kernel = synthesize_kernel_naive(k, cfg.kernel_len).unwrap();
            std::hint::black_box(&kernel);
        }
    });

    Ok(BenchReport {
        config: cfg.clone(),
        forward_symmetric_s,
        forward_naive_s,
        forward_speedup: forward_naive_s / forward_symmetric_s,
        frames_per_s_symmetric: cfg.batch as f64 / forward_symmetric_s,
        frames_per_s_naive: cfg.batch as f64 / forward_naive_s,
        synth_symmetric_s,
        synth_naive_s,
        synth_speedup: synth_naive_s / synth_symmetric_s,
        max_rel_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_agree_and_report_renders() {
        let cfg = BenchConfig {
            num_filters: 8,
            kernel_len: 63,
            num_deform_points: 3,
            batch: 4,
            frame_len: 128,
            reps: 2,
            seed: 1,
        };
        let report = run_bench(&cfg).unwrap();
        assert!(report.max_rel_diff < 1e-9);
        assert!(report.render().contains("speedup"));
    }
}
