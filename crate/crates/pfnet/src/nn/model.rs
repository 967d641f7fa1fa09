//! The speaker-classification network: a swappable first layer followed by a
//! conv/dense head.
//!
//! Layout per frame `[B, 1, W]`:
//! layer-norm on the input → front end (filter bank or free FIR) →
//! layer-norm → leaky-ReLU → max-pool → `conv_layers` blocks of
//! (conv → layer-norm → leaky-ReLU → max-pool) → flatten →
//! `dense_layers` blocks of (dense → batch-norm → leaky-ReLU) →
//! classifier dense to C logits.
//!
//! The head is initialized from its own RNG stream, independent of the front
//! end, so runs that differ only in the first layer start from an identical
//! downstream state.

use crate::error::{Error, Result};
use crate::filterbank::{
    init_filterbank_opts, FilterLayer, FilterLayerOptions, FilterSpec, InitOptions,
};
use crate::nn::act::LeakyRelu;
use crate::nn::conv::Conv1d;
use crate::nn::dense::Dense;
use crate::nn::norm::{BatchNorm, LayerNorm};
use crate::nn::optimizer::{rmsprop_step, OptimizerConfig};
use crate::nn::pool::MaxPool1d;
use crate::param::Param;
use crate::seeds::derive_seed;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// First-layer variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontEndKind {
    /// Piecewise-linear learnable filter shapes.
    Pfnet,
    /// Rectangular band-pass filters: cutoffs learnable, heights fixed at 1.
    Sincnet,
    /// Unconstrained FIR taps (standard CNN first layer).
    RawFir,
}

impl FrontEndKind {
    pub fn name(&self) -> &'static str {
        match self {
            FrontEndKind::Pfnet => "pfnet",
            FrontEndKind::Sincnet => "sincnet",
            FrontEndKind::RawFir => "raw_fir",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pfnet" => Ok(FrontEndKind::Pfnet),
            "sincnet" => Ok(FrontEndKind::Sincnet),
            "raw_fir" => Ok(FrontEndKind::RawFir),
            other => Err(Error::config(format!(
                "unknown front end '{other}' (expected pfnet | sincnet | raw_fir)"
            ))),
        }
    }
}

/// Head hyperparameters. Defaults are the reference recipe values; see
/// [`HeadConfig::desk`] for a laptop-scale profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub conv_layers: usize,
    pub conv_channels: usize,
    pub conv_kernel: usize,
    /// Max-pool width after the front end and each conv block; 1 disables.
    pub pool_width: usize,
    pub dense_layers: usize,
    pub dense_width: usize,
    pub lrelu_slope: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            conv_layers: 2,
            conv_channels: 60,
            conv_kernel: 5,
            pool_width: 3,
            dense_layers: 3,
            dense_width: 2048,
            lrelu_slope: 0.2,
        }
    }
}

impl HeadConfig {
    /// Small profile for experiments that should finish in minutes.
    pub fn desk() -> Self {
        HeadConfig {
            conv_layers: 2,
            conv_channels: 16,
            conv_kernel: 5,
            pool_width: 3,
            dense_layers: 3,
            dense_width: 128,
            lrelu_slope: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_kernel == 0 || self.conv_channels == 0 || self.dense_width == 0 {
            return Err(Error::config("head extents must be positive"));
        }
        if self.pool_width == 0 {
            return Err(Error::config(
                "pool_width must be >= 1 (1 disables pooling)",
            ));
        }
        Ok(())
    }
}

/// Front-end construction parameters.
#[derive(Debug, Clone)]
pub struct FrontEndConfig {
    pub kind: FrontEndKind,
    /// Filter geometry. For `RawFir` only `num_filters` and `kernel_len`
    /// apply (free taps, Kaiming init).
    pub filter: FilterSpec,
    pub mel_low_hz: f64,
    pub dh_init_range: f64,
    pub dh_limit: Option<f64>,
    /// Freeze Δh at its initialization even for the pfnet front end.
    pub freeze_heights: bool,
}

#[derive(Debug, Clone)]
pub enum FrontEnd {
    Filter(FilterLayer),
    Raw(Conv1d),
}

#[derive(Debug, Clone)]
struct ConvBlock {
    conv: Conv1d,
    norm: LayerNorm,
    act: LeakyRelu,
    pool: Option<MaxPool1d>,
}

#[derive(Debug, Clone)]
struct DenseBlock {
    dense: Dense,
    norm: BatchNorm,
    act: LeakyRelu,
}

#[derive(Debug, Clone)]
pub struct SpeakerNet {
    pub kind: FrontEndKind,
    pub classes: usize,
    pub frame_len: usize,
    input_norm: LayerNorm,
    front_end: FrontEnd,
    front_norm: LayerNorm,
    front_act: LeakyRelu,
    front_pool: Option<MaxPool1d>,
    conv_blocks: Vec<ConvBlock>,
    dense_blocks: Vec<DenseBlock>,
    classifier: Dense,
}

fn pool_len(t: usize, width: usize) -> Result<usize> {
    if width == 1 {
        return Ok(t);
    }
    if t < width {
        return Err(Error::config(format!(
            "time extent {t} too short for pool width {width}"
        )));
    }
    Ok(t / width)
}

impl SpeakerNet {
    pub fn new(
        front: &FrontEndConfig,
        head: &HeadConfig,
        classes: usize,
        frame_len: usize,
        seed: u64,
    ) -> Result<Self> {
        head.validate()?;
        front.filter.validate()?;
        if classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        if frame_len < front.filter.kernel_len {
            return Err(Error::config(format!(
                "frame length {frame_len} shorter than first-layer kernel {}",
                front.filter.kernel_len
            )));
        }

        let mut front_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "front-end-init"));
        let mut head_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "head-init"));
        let slope = head.lrelu_slope;

        let front_end = match front.kind {
            FrontEndKind::Pfnet | FrontEndKind::Sincnet => {
                let sincnet = front.kind == FrontEndKind::Sincnet;
                if sincnet && front.filter.num_deform_points != 0 {
                    return Err(Error::config(
                        "sincnet front end requires num_deform_points = 0",
                    ));
                }
                let init = InitOptions {
                    mel_low_hz: front.mel_low_hz,
                    dh_init_range: if sincnet { 0.0 } else { front.dh_init_range },
                };
                let bank = init_filterbank_opts(
                    &front.filter,
                    derive_seed(seed, "front-end-init"),
                    &init,
                )?;
                let opts = FilterLayerOptions {
                    learn_heights: !sincnet && !front.freeze_heights,
                    dh_limit: front.dh_limit,
                };
                FrontEnd::Filter(FilterLayer::new(front.filter.clone(), bank, opts)?)
            }
            FrontEndKind::RawFir => FrontEnd::Raw(Conv1d::kaiming(
                front.filter.num_filters,
                1,
                front.filter.kernel_len,
                slope,
                &mut front_rng,
            )),
        };

        // shape walk-through; every extent is validated as it is derived
        let f_count = front.filter.num_filters;
        let mut t = frame_len - front.filter.kernel_len + 1;
        let front_norm = LayerNorm::new(f_count * t)?;
        let front_pool = if head.pool_width > 1 {
            t = pool_len(t, head.pool_width)?;
            Some(MaxPool1d::new(head.pool_width)?)
        } else {
            None
        };

        let mut conv_blocks = Vec::with_capacity(head.conv_layers);
        let mut chans = f_count;
        for _ in 0..head.conv_layers {
            if t < head.conv_kernel {
                return Err(Error::config(format!(
                    "time extent {t} too short for conv kernel {}",
                    head.conv_kernel
                )));
            }
            let conv = Conv1d::kaiming(
                head.conv_channels,
                chans,
                head.conv_kernel,
                slope,
                &mut head_rng,
            );
            t = t - head.conv_kernel + 1;
            chans = head.conv_channels;
            let norm = LayerNorm::new(chans * t)?;
            let pool = if head.pool_width > 1 {
                t = pool_len(t, head.pool_width)?;
                Some(MaxPool1d::new(head.pool_width)?)
            } else {
                None
            };
            conv_blocks.push(ConvBlock {
                conv,
                norm,
                act: LeakyRelu::new(slope),
                pool,
            });
        }

        let mut width = chans * t;
        let mut dense_blocks = Vec::with_capacity(head.dense_layers);
        for _ in 0..head.dense_layers {
            let dense = Dense::kaiming(head.dense_width, width, slope, &mut head_rng);
            width = head.dense_width;
            dense_blocks.push(DenseBlock {
                dense,
                norm: BatchNorm::new(width),
                act: LeakyRelu::new(slope),
            });
        }
        let classifier = Dense::kaiming(classes, width, slope, &mut head_rng);

        Ok(SpeakerNet {
            kind: front.kind,
            classes,
            frame_len,
            input_norm: LayerNorm::new(frame_len)?,
            front_end,
            front_norm,
            front_act: LeakyRelu::new(slope),
            front_pool,
            conv_blocks,
            dense_blocks,
            classifier,
        })
    }

    pub fn front_end(&self) -> &FrontEnd {
        &self.front_end
    }

    pub fn front_end_mut(&mut self) -> &mut FrontEnd {
        &mut self.front_end
    }

    /// Frame logits `[B, C]`.
    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut cur = self.input_norm.forward(x)?;
        cur = match &mut self.front_end {
            FrontEnd::Filter(layer) => layer.forward(&cur)?,
            FrontEnd::Raw(conv) => conv.forward(&cur)?,
        };
        cur = self.front_norm.forward(&cur)?;
        cur = self.front_act.forward(&cur);
        if let Some(pool) = &mut self.front_pool {
            cur = pool.forward(&cur)?;
        }
        for blk in &mut self.conv_blocks {
            cur = blk.conv.forward(&cur)?;
            cur = blk.norm.forward(&cur)?;
            cur = blk.act.forward(&cur);
            if let Some(pool) = &mut blk.pool {
                cur = pool.forward(&cur)?;
            }
        }
        let b = cur.dim(0);
        let flat = cur.dim(1) * cur.dim(2);
        let mut cur = cur.into_reshaped(&[b, flat])?;
        for blk in &mut self.dense_blocks {
            cur = blk.dense.forward(&cur)?;
            cur = blk.norm.forward(&cur, train)?;
            cur = blk.act.forward(&cur);
        }
        self.classifier.forward(&cur)
    }

    /// Backpropagate logit gradients, accumulating parameter gradients.
    pub fn backward(&mut self, dlogits: &Tensor) -> Result<()> {
        let mut cur = self
            .classifier
            .backward(dlogits, true)?
            .expect("requested input grads");
        for blk in self.dense_blocks.iter_mut().rev() {
            cur = blk.act.backward(&cur)?;
            cur = blk.norm.backward(&cur)?;
            cur = blk
                .dense
                .backward(&cur, true)?
                .expect("requested input grads");
        }
        // reshape back to the last conv block's output shape
        let (chans, t) = self.conv_output_shape();
        let b = cur.dim(0);
        cur = cur.into_reshaped(&[b, chans, t])?;
        for blk in self.conv_blocks.iter_mut().rev() {
            if let Some(pool) = &mut blk.pool {
                cur = pool.backward(&cur)?;
            }
            cur = blk.act.backward(&cur)?;
            cur = blk.norm.backward(&cur)?;
            cur = blk
                .conv
                .backward(&cur, true)?
                .expect("requested input grads");
        }
        if let Some(pool) = &mut self.front_pool {
            cur = pool.backward(&cur)?;
        }
        cur = self.front_act.backward(&cur)?;
        cur = self.front_norm.backward(&cur)?;
        let front_dx = match &mut self.front_end {
            FrontEnd::Filter(layer) => layer.backward(&cur, true)?,
            FrontEnd::Raw(conv) => conv.backward(&cur, true)?,
        }
        .expect("requested input grads");
        self.input_norm.backward(&front_dx)?;
        Ok(())
    }

    fn conv_output_shape(&self) -> (usize, usize) {
        // replay the shape walk from the stored layer extents
        let l = match &self.front_end {
            FrontEnd::Filter(layer) => layer.spec.kernel_len,
            FrontEnd::Raw(conv) => conv.kernel(),
        };
        let f_count = match &self.front_end {
            FrontEnd::Filter(layer) => layer.spec.num_filters,
            FrontEnd::Raw(conv) => conv.c_out(),
        };
        let mut t = self.frame_len - l + 1;
        if let Some(pool) = &self.front_pool {
            t /= pool.width;
        }
        let mut chans = f_count;
        for blk in &self.conv_blocks {
            t = t - blk.conv.kernel() + 1;
            chans = blk.conv.c_out();
            if let Some(pool) = &blk.pool {
                t /= pool.width;
            }
        }
        (chans, t)
    }

    /// Visit every trainable parameter in a fixed order. Frozen tensors
    /// (Δh of the sincnet front end) are skipped.
    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.visit_params(false, f);
    }

    fn visit_params(&mut self, include_frozen: bool, f: &mut dyn FnMut(&str, &mut Param)) {
        f("input_norm.gain", &mut self.input_norm.gain);
        f("input_norm.bias", &mut self.input_norm.bias);
        match &mut self.front_end {
            FrontEnd::Filter(layer) => {
                f("front.base_raw", &mut layer.base_raw);
                f("front.incr_raw", &mut layer.incr_raw);
                if layer.opts.learn_heights || include_frozen {
                    f("front.dh", &mut layer.dh);
                }
            }
            FrontEnd::Raw(conv) => {
                f("front.w", &mut conv.w);
                f("front.b", &mut conv.b);
            }
        }
        f("front_norm.gain", &mut self.front_norm.gain);
        f("front_norm.bias", &mut self.front_norm.bias);
        for (i, blk) in self.conv_blocks.iter_mut().enumerate() {
            f(&format!("conv{i}.w"), &mut blk.conv.w);
            f(&format!("conv{i}.b"), &mut blk.conv.b);
            f(&format!("conv{i}_norm.gain"), &mut blk.norm.gain);
            f(&format!("conv{i}_norm.bias"), &mut blk.norm.bias);
        }
        for (i, blk) in self.dense_blocks.iter_mut().enumerate() {
            f(&format!("dense{i}.w"), &mut blk.dense.w);
            f(&format!("dense{i}.b"), &mut blk.dense.b);
            f(&format!("dense{i}_bn.gain"), &mut blk.norm.gain);
            f(&format!("dense{i}_bn.bias"), &mut blk.norm.bias);
        }
        f("classifier.w", &mut self.classifier.w);
        f("classifier.b", &mut self.classifier.b);
    }

    /// Visit every persistable tensor: parameter values, optimizer
    /// accumulators, and batch-norm running statistics.
    pub fn for_each_state(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.visit_params(true, &mut |name, p| {
            f(name, &mut p.value);
            f(&format!("{name}.v"), &mut p.v);
        });
        for (i, blk) in self.dense_blocks.iter_mut().enumerate() {
            f(
                &format!("dense{i}_bn.running_mean"),
                &mut blk.norm.running_mean,
            );
            f(
                &format!("dense{i}_bn.running_var"),
                &mut blk.norm.running_var,
            );
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(true, &mut |_, p| p.zero_grad());
    }

    /// One RMSprop step over all trainable parameters.
    pub fn step(&mut self, cfg: &OptimizerConfig) -> Result<()> {
        let mut result = Ok(());
        self.for_each_param(&mut |name, p| {
            if result.is_ok() {
                if let Err(e) = rmsprop_step(p, cfg) {
                    result = Err(Error::Divergence(format!("{name}: {e}")));
                }
            }
        });
        result
    }

    pub fn num_trainable_scalars(&mut self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |_, p| n += p.len());
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::softmax_cross_entropy;
    use rand::Rng;

    fn toy_front(kind: FrontEndKind) -> FrontEndConfig {
        let s = if kind == FrontEndKind::Sincnet { 0 } else { 1 };
        FrontEndConfig {
            kind,
            filter: FilterSpec::new(2, 9, s, 8000.0),
            mel_low_hz: 30.0,
            dh_init_range: 0.1,
            dh_limit: None,
            freeze_heights: false,
        }
    }

    fn toy_head() -> HeadConfig {
        HeadConfig {
            conv_layers: 1,
            conv_channels: 3,
            conv_kernel: 3,
            pool_width: 2,
            dense_layers: 1,
            dense_width: 8,
            lrelu_slope: 0.2,
        }
    }

    fn toy_batch(frame_len: usize, batch: usize, seed: u64) -> (Tensor, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::from_vec(
            &[batch, 1, frame_len],
            (0..batch * frame_len)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let labels = (0..batch).map(|b| b % 2).collect();
        (x, labels)
    }

    #[test]
    fn forward_shapes_for_all_front_ends() {
        for kind in [
            FrontEndKind::Pfnet,
            FrontEndKind::Sincnet,
            FrontEndKind::RawFir,
        ] {
            let mut net = SpeakerNet::new(&toy_front(kind), &toy_head(), 2, 24, 5).unwrap();
            let (x, _) = toy_batch(24, 3, 9);
            let logits = net.forward(&x, true).unwrap();
            assert_eq!(logits.shape(), &[3, 2]);
        }
    }

    #[test]
    fn same_seed_gives_identical_head_across_front_ends() {
        let mut a =
            SpeakerNet::new(&toy_front(FrontEndKind::Pfnet), &toy_head(), 2, 24, 5).unwrap();
        let mut b =
            SpeakerNet::new(&toy_front(FrontEndKind::RawFir), &toy_head(), 2, 24, 5).unwrap();
        let mut a_params = Vec::new();
        a.for_each_param(&mut |name, p| a_params.push((name.to_string(), p.value.data().to_vec())));
        let mut b_params = Vec::new();
        b.for_each_param(&mut |name, p| b_params.push((name.to_string(), p.value.data().to_vec())));
        let heads_a: Vec<_> = a_params
            .iter()
            .filter(|(n, _)| !n.starts_with("front."))
            .collect();
        let heads_b: Vec<_> = b_params
            .iter()
            .filter(|(n, _)| !n.starts_with("front."))
            .collect();
        assert_eq!(heads_a.len(), heads_b.len());
        for (pa, pb) in heads_a.iter().zip(&heads_b) {
            assert_eq!(pa.0, pb.0);
            assert_eq!(pa.1, pb.1, "head param {} differs across front ends", pa.0);
        }
    }

    #[test]
    fn sincnet_freezes_heights() {
        let mut net =
            SpeakerNet::new(&toy_front(FrontEndKind::Sincnet), &toy_head(), 2, 24, 5).unwrap();
        let mut names = Vec::new();
        net.for_each_param(&mut |name, _| names.push(name.to_string()));
        assert!(!names.iter().any(|n| n == "front.dh"));
        // state still persists the frozen tensor
        let mut state_names = Vec::new();
        net.for_each_state(&mut |name, _| state_names.push(name.to_string()));
        assert!(state_names.iter().any(|n| n == "front.dh"));
    }

    #[test]
    fn end_to_end_gradients_match_fd() {
        // filter front end with S=1, one conv block, one dense block; pooling
        // disabled so no FD probe can flip an argmax
        let head = HeadConfig {
            pool_width: 1,
            ..toy_head()
        };
        let mut net = SpeakerNet::new(&toy_front(FrontEndKind::Pfnet), &head, 2, 24, 5).unwrap();
        // mel init puts the top filter's last knot exactly on the 0.5 clamp
        // boundary; pull the increments inward so every parameter is well
        // clear of the subgradient kink
        if let FrontEnd::Filter(layer) = net.front_end_mut() {
            for v in layer.incr_raw.value.data_mut() {
                *v *= 0.9;
            }
        }
        let (x, labels) = toy_batch(24, 3, 10);

        let loss_of = |net: &mut SpeakerNet| -> f64 {
            let logits = net.forward(&x, true).unwrap();
            softmax_cross_entropy(&logits, &labels).unwrap().0
        };

        let logits = net.forward(&x, true).unwrap();
        let (_, dlogits, _) = softmax_cross_entropy(&logits, &labels).unwrap();
        net.zero_grads();
        net.backward(&dlogits).unwrap();

        let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
        net.for_each_param(&mut |name, p| grads.push((name.to_string(), p.grad.data().to_vec())));

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (gname, gvals) in &grads {
            for idx in 0..gvals.len() {
                // probe a subset of large tensors
                if gvals.len() > 40 && idx % 13 != 0 {
                    continue;
                }
                let mut plus = net.clone();
                plus.for_each_param(&mut |name, p| {
                    if name == gname {
                        p.value.data_mut()[idx] += h;
                    }
                });
                let mut minus = net.clone();
                minus.for_each_param(&mut |name, p| {
                    if name == gname {
                        p.value.data_mut()[idx] -= h;
                    }
                });
                let fd = (loss_of(&mut plus) - loss_of(&mut minus)) / (2.0 * h);
                let a = gvals[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
                worst = worst.max(rel);
                assert!(
                    rel < 1e-4,
                    "{gname}[{idx}]: analytic {a} vs fd {fd} (rel {rel})"
                );
            }
        }
        assert!(worst < 1e-4, "worst rel err {worst}");
    }

    #[test]
    fn step_reduces_loss_on_toy_batch() {
        let mut net =
            SpeakerNet::new(&toy_front(FrontEndKind::Pfnet), &toy_head(), 2, 24, 5).unwrap();
        let (x, labels) = toy_batch(24, 4, 11);
        let cfg = OptimizerConfig {
            batch_size: 4,
            ..OptimizerConfig::default()
        };
        let mut first = f64::NAN;
        let mut last = f64::NAN;
        for step in 0..60 {
            let logits = net.forward(&x, true).unwrap();
            let (loss, dlogits, _) = softmax_cross_entropy(&logits, &labels).unwrap();
            if step == 0 {
                first = loss;
            }
            last = loss;
            net.zero_grads();
            net.backward(&dlogits).unwrap();
            net.step(&cfg).unwrap();
        }
        assert!(last < first * 0.5, "loss {first} -> {last}");
    }
}
