//! Finite-difference verification of every analytic gradient path.
//!
//! Each group perturbs one layer (or the full toy network) on small random
//! shapes and compares analytic gradients against central differences. The
//! relative error uses `|a − n| / max(|a|, |n|, 1e-3)` so near-zero gradients
//! are compared absolutely at a scale well above FD noise.

use crate::error::Result;
use crate::filterbank::{
    FilterBankParams, FilterLayer, FilterLayerOptions, FilterParams, FilterSpec,
};
use crate::nn::conv::Conv1d;
use crate::nn::dense::Dense;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::model::{FrontEndConfig, FrontEndKind, HeadConfig, SpeakerNet};
use crate::nn::norm::{BatchNorm, LayerNorm};
use crate::nn::pool::MaxPool1d;
use crate::tensor::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub seed: u64,
    /// Negate one analytic gradient before comparing; exercises the harness
    /// itself (the run must then report a failure).
    pub corrupt_probe: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            seed: 0xF17,
            corrupt_probe: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub group: String,
    pub max_rel_err: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{:<12} {:<16} max_rel_err {:>12.3e}  (threshold {:.0e})\n",
                if e.pass { "[PASS]" } else { "[FAIL]" },
                e.group,
                e.max_rel_err,
                e.threshold
            ));
        }
        out
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Run the full suite; failures are entries, not errors.
pub fn gradient_check_suite(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let entries = vec![
        check_filter_layer(cfg)?,
        check_conv(cfg)?,
        check_dense(cfg)?,
        check_layer_norm(cfg)?,
        check_batch_norm(cfg)?,
        check_leaky_relu(cfg)?,
        check_maxpool(cfg)?,
        check_softmax_xent(cfg)?,
        check_end_to_end(cfg)?,
    ];
    Ok(GradCheckReport { entries })
}

fn entry(group: &str, max_rel_err: f64, threshold: f64) -> GradCheckEntry {
    GradCheckEntry {
        group: group.to_string(),
        max_rel_err,
        threshold,
        pass: max_rel_err < threshold,
    }
}

fn check_filter_layer(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x01);
    let spec = FilterSpec::new(2, 15, 1, 8000.0);
    let bank = FilterBankParams {
        filters: (0..2)
            .map(|_| FilterParams {
                base_raw: rng.gen_range(0.03..0.08),
                incr_raw: (0..2).map(|_| rng.gen_range(0.02..0.06)).collect(),
                dh: (0..3).map(|_| rng.gen_range(-0.2..0.2)).collect(),
            })
            .collect(),
    };
    let mut layer = FilterLayer::new(spec, bank, FilterLayerOptions::default())?;
    let x = rand_tensor(&[1, 1, 19], &mut rng);
    let up = rand_tensor(&[1, 2, 5], &mut rng);

    let _ = layer.forward(&x)?;
    layer.backward(&up, false)?;

    let loss = |layer: &mut FilterLayer| -> f64 {
        let y = layer.forward(&x).unwrap();
        y.data().iter().zip(up.data()).map(|(&a, &b)| a * b).sum()
    };
    let mut worst: f64 = 0.0;
    let names = ["base_raw", "incr_raw", "dh"];
    for name in names {
        let len = match name {
            "base_raw" => layer.base_raw.len(),
            "incr_raw" => layer.incr_raw.len(),
            _ => layer.dh.len(),
        };
        for idx in 0..len {
            let a = match name {
                "base_raw" => layer.base_raw.grad.data()[idx],
                "incr_raw" => layer.incr_raw.grad.data()[idx],
                _ => layer.dh.grad.data()[idx],
            };
            let mut plus = layer.clone();
            let mut minus = layer.clone();
            for (l, s) in [(&mut plus, FD_STEP), (&mut minus, -FD_STEP)] {
                match name {
                    "base_raw" => l.base_raw.value.data_mut()[idx] += s,
                    "incr_raw" => l.incr_raw.value.data_mut()[idx] += s,
                    _ => l.dh.value.data_mut()[idx] += s,
                }
            }
            let fd = (loss(&mut plus) - loss(&mut minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(a, fd));
        }
    }
    Ok(entry("filter_layer", worst, 1e-5))
}

fn project_loss(y: &Tensor, u: &Tensor) -> f64 {
    y.data().iter().zip(u.data()).map(|(&a, &b)| a * b).sum()
}

fn check_conv(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x02);
    let mut conv = Conv1d::kaiming(3, 2, 3, 0.2, &mut rng);
    for v in conv.b.value.data_mut() {
        *v = rng.gen_range(-0.3..0.3);
    }
    let x = rand_tensor(&[2, 2, 10], &mut rng);
    let u = rand_tensor(&[2, 3, 8], &mut rng);
    let _ = conv.forward(&x)?;
    let dx = conv.backward(&u, true)?.unwrap();
    let loss = |c: &mut Conv1d, x: &Tensor| project_loss(&c.forward(x).unwrap(), &u);

    let mut worst: f64 = 0.0;
    for idx in 0..conv.w.len() {
        let mut p = conv.clone();
        p.w.value.data_mut()[idx] += FD_STEP;
        let mut m = conv.clone();
        m.w.value.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut p, &x) - loss(&mut m, &x)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(conv.w.grad.data()[idx], fd));
    }
    for idx in 0..conv.b.len() {
        let mut p = conv.clone();
        p.b.value.data_mut()[idx] += FD_STEP;
        let mut m = conv.clone();
        m.b.value.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut p, &x) - loss(&mut m, &x)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(conv.b.grad.data()[idx], fd));
    }
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[idx] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut conv.clone(), &xp) - loss(&mut conv.clone(), &xm)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[idx], fd));
    }
    Ok(entry("conv1d", worst, 1e-4))
}

fn check_dense(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x03);
    let mut dense = Dense::kaiming(4, 6, 0.2, &mut rng);
    let x = rand_tensor(&[3, 6], &mut rng);
    let u = rand_tensor(&[3, 4], &mut rng);
    let _ = dense.forward(&x)?;
    let dx = dense.backward(&u, true)?.unwrap();
    let loss = |d: &mut Dense, x: &Tensor| project_loss(&d.forward(x).unwrap(), &u);

    let mut worst: f64 = 0.0;
    for idx in 0..dense.w.len() {
        let mut p = dense.clone();
        p.w.value.data_mut()[idx] += FD_STEP;
        let mut m = dense.clone();
        m.w.value.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut p, &x) - loss(&mut m, &x)) / (2.0 * FD_STEP);
        let mut a = dense.w.grad.data()[idx];
        if cfg.corrupt_probe {
            a = -a;
        }
        worst = worst.max(rel_err(a, fd));
    }
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[idx] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut dense.clone(), &xp) - loss(&mut dense.clone(), &xm)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[idx], fd));
    }
    Ok(entry("dense", worst, 1e-4))
}

fn check_layer_norm(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x04);
    let mut ln = LayerNorm::new(9)?;
    for v in ln.gain.value.data_mut() {
        *v = rng.gen_range(0.5..1.5);
    }
    for v in ln.bias.value.data_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    let x = rand_tensor(&[3, 9], &mut rng);
    let u = rand_tensor(&[3, 9], &mut rng);
    let _ = ln.forward(&x)?;
    let dx = ln.backward(&u)?;
    let loss = |l: &mut LayerNorm, x: &Tensor| project_loss(&l.forward(x).unwrap(), &u);

    let mut worst: f64 = 0.0;
    for idx in 0..9 {
        let mut p = ln.clone();
        p.gain.value.data_mut()[idx] += FD_STEP;
        let mut m = ln.clone();
        m.gain.value.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut p, &x) - loss(&mut m, &x)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(ln.gain.grad.data()[idx], fd));

        let mut p = ln.clone();
        p.bias.value.data_mut()[idx] += FD_STEP;
        let mut m = ln.clone();
        m.bias.value.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut p, &x) - loss(&mut m, &x)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(ln.bias.grad.data()[idx], fd));
    }
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[idx] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut ln.clone(), &xp) - loss(&mut ln.clone(), &xm)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[idx], fd));
    }
    Ok(entry("layer_norm", worst, 1e-5))
}

fn check_batch_norm(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05);
    let mut bn = BatchNorm::new(5);
    for v in bn.gain.value.data_mut() {
        *v = rng.gen_range(0.5..1.5);
    }
    let x = rand_tensor(&[6, 5], &mut rng);
    let u = rand_tensor(&[6, 5], &mut rng);
    let _ = bn.forward(&x, true)?;
    let dx = bn.backward(&u)?;
    let loss = |b: &mut BatchNorm, x: &Tensor| project_loss(&b.forward(x, true).unwrap(), &u);

    let mut worst: f64 = 0.0;
    for idx in 0..5 {
        let mut p = bn.clone();
        p.gain.value.data_mut()[idx] += FD_STEP;
        let mut m = bn.clone();
        m.gain.value.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut p, &x) - loss(&mut m, &x)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(bn.gain.grad.data()[idx], fd));
    }
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[idx] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= FD_STEP;
        let fd = (loss(&mut bn.clone(), &xp) - loss(&mut bn.clone(), &xm)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[idx], fd));
    }
    Ok(entry("batch_norm", worst, 1e-4))
}

fn check_leaky_relu(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x06);
    let mut act = crate::nn::act::LeakyRelu::new(0.2);
    // keep probes at least 10·step away from the kink at 0
    let x = Tensor::from_vec(
        &[2, 8],
        (0..16)
            .map(|_| {
                let v: f64 = rng.gen_range(0.01..1.0);
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect(),
    )
    .unwrap();
    let u = rand_tensor(&[2, 8], &mut rng);
    let _ = act.forward(&x);
    let dx = act.backward(&u)?;
    let mut worst: f64 = 0.0;
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[idx] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= FD_STEP;
        let mut a1 = act.clone();
        let mut a2 = act.clone();
        let fd = (project_loss(&a1.forward(&xp), &u) - project_loss(&a2.forward(&xm), &u))
            / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[idx], fd));
    }
    Ok(entry("leaky_relu", worst, 1e-6))
}

fn check_maxpool(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x07);
    let mut pool = MaxPool1d::new(3)?;
    let x = rand_tensor(&[2, 2, 9], &mut rng);
    let u = rand_tensor(&[2, 2, 3], &mut rng);
    let _ = pool.forward(&x)?;
    let dx = pool.backward(&u)?;
    let mut worst: f64 = 0.0;
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[idx] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= FD_STEP;
        let fd = (project_loss(&pool.clone().forward(&xp).unwrap(), &u)
            - project_loss(&pool.clone().forward(&xm).unwrap(), &u))
            / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data()[idx], fd));
    }
    Ok(entry("maxpool", worst, 1e-6))
}

fn check_softmax_xent(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x08);
    let logits = rand_tensor(&[4, 6], &mut rng);
    let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..6)).collect();
    let (_, grads, _) = softmax_cross_entropy(&logits, &labels)?;
    let mut worst: f64 = 0.0;
    for idx in 0..logits.len() {
        let mut lp = logits.clone();
        lp.data_mut()[idx] += FD_STEP;
        let mut lm = logits.clone();
        lm.data_mut()[idx] -= FD_STEP;
        let fd = (softmax_cross_entropy(&lp, &labels)?.0 - softmax_cross_entropy(&lm, &labels)?.0)
            / (2.0 * FD_STEP);
        worst = worst.max(rel_err(grads.data()[idx], fd));
    }
    Ok(entry("softmax_xent", worst, 1e-6))
}

fn check_end_to_end(cfg: &GradCheckConfig) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x09);
    let front = FrontEndConfig {
        kind: FrontEndKind::Pfnet,
        filter: FilterSpec::new(2, 9, 1, 8000.0),
        mel_low_hz: 30.0,
        dh_init_range: 0.1,
        dh_limit: None,
        freeze_heights: false,
    };
    // pooling disabled: an FD probe must not be able to flip an argmax
    let head = HeadConfig {
        conv_layers: 1,
        conv_channels: 3,
        conv_kernel: 3,
        pool_width: 1,
        dense_layers: 1,
        dense_width: 8,
        lrelu_slope: 0.2,
    };
    let mut net = SpeakerNet::new(&front, &head, 2, 24, cfg.seed)?;
    // keep every knot at least 10·step away from the 0.5 clamp boundary
    if let crate::nn::model::FrontEnd::Filter(layer) = net.front_end_mut() {
        for v in layer.incr_raw.value.data_mut() {
            *v *= 0.9;
        }
    }
    let x = rand_tensor(&[3, 1, 24], &mut rng);
    let labels = vec![0usize, 1, 0];

    let loss_of = |net: &mut SpeakerNet| -> f64 {
        let logits = net.forward(&x, true).unwrap();
        softmax_cross_entropy(&logits, &labels).unwrap().0
    };
    let logits = net.forward(&x, true)?;
    let (_, dlogits, _) = softmax_cross_entropy(&logits, &labels)?;
    net.zero_grads();
    net.backward(&dlogits)?;

    let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
    net.for_each_param(&mut |name, p| grads.push((name.to_string(), p.grad.data().to_vec())));

    let mut worst: f64 = 0.0;
    for (gname, gvals) in &grads {
        for idx in 0..gvals.len() {
            if gvals.len() > 40 && idx % 11 != 0 {
                continue;
            }
            let mut plus = net.clone();
            plus.for_each_param(&mut |name, p| {
                if name == gname {
                    p.value.data_mut()[idx] += FD_STEP;
                }
            });
            let mut minus = net.clone();
            minus.for_each_param(&mut |name, p| {
                if name == gname {
                    p.value.data_mut()[idx] -= FD_STEP;
                }
            });
            let fd = (loss_of(&mut plus) - loss_of(&mut minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(gvals[idx], fd));
        }
    }
    Ok(entry("end_to_end", worst, 1e-4))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_correct_build() {
        let report = gradient_check_suite(&GradCheckConfig::default()).unwrap();
        assert!(report.all_pass(), "\n{}", report.render());
        assert_eq!(report.entries.len(), 9);
    }

    #[test]
    fn corrupted_gradient_is_reported() {
        let report = gradient_check_suite(&GradCheckConfig {
            corrupt_probe: true,
            ..GradCheckConfig::default()
        })
        .unwrap();
        assert!(!report.all_pass());
        let dense = report.entries.iter().find(|e| e.group == "dense").unwrap();
        assert!(!dense.pass);
    }
}
