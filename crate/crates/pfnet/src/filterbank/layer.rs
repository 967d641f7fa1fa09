//! First-layer convolution over a bank of synthesized kernels.
//!
//! The windowed kernels under the symmetric window convention are
//! even-symmetric, so the forward pass folds each input window once —
//! `x[t+l] + x[t+2c−l]` — and shares that fold across every filter of the
//! bank, halving the multiply count of the convolution. The same fold drives
//! the backward accumulation of per-tap kernel gradients.

use crate::error::{Error, Result};
use crate::filterbank::grad::{chain_to_raw, knot_gradients};
use crate::filterbank::{
    make_window, resolve_knots_traced, synthesize_kernel_half, synthesize_kernel_naive,
    FilterBankParams, FilterParams, FilterSpec, FrequencyKnots, WindowConvention,
};
use crate::param::Param;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct FilterLayerOptions {
    /// When false the height offsets Δh stay fixed (the sinc band-pass mode).
    pub learn_heights: bool,
    /// Optional symmetric clamp applied to Δh before resolution.
    pub dh_limit: Option<f64>,
}

impl Default for FilterLayerOptions {
    fn default() -> Self {
        FilterLayerOptions {
            learn_heights: true,
            dh_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Cache {
    input: Tensor,
    /// Symmetric path: per-filter left-half taps `[F × (c+1)]`, index l = tap l.
    half_kernels: Vec<f64>,
    /// Periodic-window path: per-filter full taps `[F × L]`.
    full_kernels: Vec<f64>,
    t_out: usize,
    fingerprint: u64,
}

/// Learnable filter bank as a convolution layer: input `[B × 1 × T]`,
/// output `[B × F × (T − L + 1)]`, valid-mode cross-correlation.
#[derive(Debug, Clone)]
pub struct FilterLayer {
    pub spec: FilterSpec,
    pub opts: FilterLayerOptions,
    /// `[F]` raw base anchors.
    pub base_raw: Param,
    /// `[F, S+1]` raw increments.
    pub incr_raw: Param,
    /// `[F, S+2]` height offsets.
    pub dh: Param,
    window: Vec<f64>,
    cache: Option<Cache>,
}

impl FilterLayer {
    pub fn new(spec: FilterSpec, bank: FilterBankParams, opts: FilterLayerOptions) -> Result<Self> {
        spec.validate()?;
        bank.validate(&spec)?;
        let f = spec.num_filters;
        let segs = spec.num_segments();
        let knots = spec.num_knots();
        let mut base = Tensor::zeros(&[f]);
        let mut incr = Tensor::zeros(&[f, segs]);
        let mut dh = Tensor::zeros(&[f, knots]);
        for (i, p) in bank.filters.iter().enumerate() {
            base.data_mut()[i] = p.base_raw;
            incr.data_mut()[i * segs..(i + 1) * segs].copy_from_slice(&p.incr_raw);
            dh.data_mut()[i * knots..(i + 1) * knots].copy_from_slice(&p.dh);
        }
        let window = make_window(spec.kernel_len, spec.window_convention);
        Ok(FilterLayer {
            spec,
            opts,
            base_raw: Param::new(base),
            incr_raw: Param::new(incr),
            dh: Param::new(dh),
            window,
            cache: None,
        })
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Effective raw parameters of filter `i` (Δh clamp applied).
    pub fn filter_params(&self, i: usize) -> FilterParams {
        let segs = self.spec.num_segments();
        let knots = self.spec.num_knots();
        let dh_raw = &self.dh.value.data()[i * knots..(i + 1) * knots];
        let dh = match self.opts.dh_limit {
            Some(lim) => dh_raw.iter().map(|&d| d.clamp(-lim, lim)).collect(),
            None => dh_raw.to_vec(),
        };
        FilterParams {
            base_raw: self.base_raw.value.data()[i],
            incr_raw: self.incr_raw.value.data()[i * segs..(i + 1) * segs].to_vec(),
            dh,
        }
    }

    pub fn resolve(&self, i: usize) -> FrequencyKnots {
        resolve_knots_traced(&self.filter_params(i), &self.spec).0
    }

    /// Snapshot of the raw parameters (unclamped, as stored).
    pub fn bank_params(&self) -> FilterBankParams {
        let segs = self.spec.num_segments();
        let knots = self.spec.num_knots();
        let filters = (0..self.spec.num_filters)
            .map(|i| FilterParams {
                base_raw: self.base_raw.value.data()[i],
                incr_raw: self.incr_raw.value.data()[i * segs..(i + 1) * segs].to_vec(),
                dh: self.dh.value.data()[i * knots..(i + 1) * knots].to_vec(),
            })
            .collect();
        FilterBankParams { filters }
    }

    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |x: f64| {
            h ^= x.to_bits();
            h = h.wrapping_mul(0x100000001b3);
        };
        self.base_raw
            .value
            .data()
            .iter()
            .copied()
            .for_each(&mut mix);
        self.incr_raw
            .value
            .data()
            .iter()
            .copied()
            .for_each(&mut mix);
        self.dh.value.data().iter().copied().for_each(&mut mix);
        h
    }

    fn check_input(&self, input: &Tensor) -> Result<(usize, usize)> {
        let shape = input.shape();
        if shape.len() != 3 || shape[1] != 1 {
            return Err(Error::shape(format!(
                "filter layer expects [B, 1, T], got {shape:?}"
            )));
        }
        let (b, t) = (shape[0], shape[2]);
        if t < self.spec.kernel_len {
            return Err(Error::shape(format!(
                "input length {t} shorter than kernel length {}",
                self.spec.kernel_len
            )));
        }
        Ok((b, t))
    }

    /// Windowed kernels, one row of `L` taps per filter.
    pub fn windowed_kernels(&self) -> Result<Vec<Vec<f64>>> {
        let len = self.spec.kernel_len;
        let c = self.spec.center();
        (0..self.spec.num_filters)
            .map(|i| {
                let knots = self.resolve(i);
                let half = synthesize_kernel_half(&knots, len)?;
                Ok((0..len)
                    .map(|l| {
                        let n = (l as i64 - c as i64).unsigned_abs() as usize;
                        half[n] * self.window[l]
                    })
                    .collect())
            })
            .collect()
    }

    /// Valid-mode forward pass; caches kernels and input for backward.
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (batch, t) = self.check_input(input)?;
        if !self.base_raw.value.all_finite()
            || !self.incr_raw.value.all_finite()
            || !self.dh.value.all_finite()
        {
            return Err(Error::Invariant("non-finite filter parameter".into()));
        }
        let len = self.spec.kernel_len;
        let c = self.spec.center();
        let f_count = self.spec.num_filters;
        let t_out = t - len + 1;

        let symmetric = self.spec.window_convention == WindowConvention::Symmetric;
        let mut half_kernels = Vec::new();
        let mut full_kernels = Vec::new();
        if symmetric {
            half_kernels = vec![0.0; f_count * (c + 1)];
            for i in 0..f_count {
                let knots = self.resolve(i);
                let half = synthesize_kernel_half(&knots, len)?;
                let row = &mut half_kernels[i * (c + 1)..(i + 1) * (c + 1)];
                for l in 0..=c {
                    // row index l = tap l of the left half; tap l mirrors half[c−l]
                    row[l] = half[c - l] * self.window[l];
                }
            }
        } else {
            full_kernels = vec![0.0; f_count * len];
            for i in 0..f_count {
                let knots = self.resolve(i);
                let half = synthesize_kernel_half(&knots, len)?;
                let row = &mut full_kernels[i * len..(i + 1) * len];
                for l in 0..len {
                    let n = (l as i64 - c as i64).unsigned_abs() as usize;
                    row[l] = half[n] * self.window[l];
                }
            }
        }

        let mut out = Tensor::zeros(&[batch, f_count, t_out]);
        if symmetric {
            let mut fold = vec![0.0; c + 1];
            for b in 0..batch {
                let x = input.lane(b, 0);
                for t0 in 0..t_out {
                    fold_window(x, t0, c, &mut fold);
                    for i in 0..f_count {
                        let k = &half_kernels[i * (c + 1)..(i + 1) * (c + 1)];
                        out.lane_mut(b, i)[t0] = dot(k, &fold);
                    }
                }
            }
        } else {
            for b in 0..batch {
                let x = input.lane(b, 0);
                for i in 0..f_count {
                    let k = &full_kernels[i * len..(i + 1) * len];
                    let lane = out.lane_mut(b, i);
                    for (t0, o) in lane.iter_mut().enumerate() {
                        *o = dot(&x[t0..t0 + len], k);
                    }
                }
            }
        }

        self.cache = Some(Cache {
            input: input.clone(),
            half_kernels,
            full_kernels,
            t_out,
            fingerprint: self.fingerprint(),
        });
        Ok(out)
    }

    /// Forward pass that ignores kernel symmetry: full-length synthesis and a
    /// plain per-filter dot product. Reference/baseline path.
    pub fn forward_naive(&self, input: &Tensor) -> Result<Tensor> {
        let (batch, t) = self.check_input(input)?;
        let len = self.spec.kernel_len;
        let f_count = self.spec.num_filters;
        let t_out = t - len + 1;
        let mut kernels = vec![0.0; f_count * len];
        for i in 0..f_count {
            let knots = self.resolve(i);
            let kernel = synthesize_kernel_naive(&knots, len)?;
            for (l, row) in kernels[i * len..(i + 1) * len].iter_mut().enumerate() {
                *row = kernel.taps()[l] * self.window[l];
            }
        }
        let mut out = Tensor::zeros(&[batch, f_count, t_out]);
        for b in 0..batch {
            let x = input.lane(b, 0);
            for i in 0..f_count {
                let k = &kernels[i * len..(i + 1) * len];
                let lane = out.lane_mut(b, i);
                for (t0, o) in lane.iter_mut().enumerate() {
                    *o = dot(&x[t0..t0 + len], k);
                }
            }
        }
        Ok(out)
    }

    /// Backward pass. Accumulates raw-parameter gradients; returns input
    /// gradients (full-mode adjoint correlation) when requested.
    pub fn backward(&mut self, upstream: &Tensor, need_input_grad: bool) -> Result<Option<Tensor>> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache)?;
        if cache.fingerprint != self.fingerprint() {
            return Err(Error::StaleCache);
        }
        let len = self.spec.kernel_len;
        let c = self.spec.center();
        let f_count = self.spec.num_filters;
        let batch = cache.input.dim(0);
        let t_out = cache.t_out;
        if upstream.shape() != [batch, f_count, t_out] {
            return Err(Error::shape(format!(
                "upstream shape {:?} vs expected [{batch}, {f_count}, {t_out}]",
                upstream.shape()
            )));
        }

        let symmetric = self.spec.window_convention == WindowConvention::Symmetric;

        // Per-tap adjoints of the windowed kernels, folded over symmetric
        // pairs: entry n holds dL/d g_w[c+n] + dL/d g_w[c−n] (n = 0 → center).
        let mut folded_tap_grads = vec![0.0; f_count * (c + 1)];
        if symmetric {
            // dK_half[l] = Σ_{b,t} up[b,i,t]·(x[t+l] + x[t+2c−l]); index by l then
            // convert to offset n = c − l.
            let mut dkhalf = vec![0.0; f_count * (c + 1)];
            let mut fold = vec![0.0; c + 1];
            for b in 0..batch {
                let x = cache.input.lane(b, 0);
                for t0 in 0..t_out {
                    fold_window(x, t0, c, &mut fold);
                    for i in 0..f_count {
                        let u = upstream.lane(b, i)[t0];
                        if u != 0.0 {
                            axpy(&mut dkhalf[i * (c + 1)..(i + 1) * (c + 1)], u, &fold);
                        }
                    }
                }
            }
            for i in 0..f_count {
                let src = &dkhalf[i * (c + 1)..(i + 1) * (c + 1)];
                let dst = &mut folded_tap_grads[i * (c + 1)..(i + 1) * (c + 1)];
                for n in 0..=c {
                    // windowed-tap adjoint times the (symmetric) window
                    dst[n] = src[c - n] * self.window[c - n];
                }
            }
        } else {
            // full per-tap kernel gradients, then fold with per-side window
            let mut dk = vec![0.0; f_count * len];
            for b in 0..batch {
                let x = cache.input.lane(b, 0);
                for i in 0..f_count {
                    let lane = upstream.lane(b, i);
                    let row = &mut dk[i * len..(i + 1) * len];
                    for (t0, &u) in lane.iter().enumerate() {
                        if u != 0.0 {
                            axpy(row, u, &x[t0..t0 + len]);
                        }
                    }
                }
            }
            for i in 0..f_count {
                let row = &dk[i * len..(i + 1) * len];
                let dst = &mut folded_tap_grads[i * (c + 1)..(i + 1) * (c + 1)];
                dst[0] = row[c] * self.window[c];
                for n in 1..=c {
                    dst[n] = row[c + n] * self.window[c + n] + row[c - n] * self.window[c - n];
                }
            }
        }

        // chain folded tap adjoints through synthesis and the
        // reparameterization into raw-parameter gradients
        let segs = self.spec.num_segments();
        let knots_n = self.spec.num_knots();
        for i in 0..f_count {
            let params = self.filter_params(i);
            let (knots, trace) = resolve_knots_traced(&params, &self.spec);
            let folded = &folded_tap_grads[i * (c + 1)..(i + 1) * (c + 1)];
            let (grad_f, grad_h) = knot_gradients(&knots, folded);
            let raw = chain_to_raw(&params, &trace, &grad_f, &grad_h);
            self.base_raw.grad.data_mut()[i] += raw.base_raw;
            for (j, g) in raw.incr_raw.iter().enumerate() {
                self.incr_raw.grad.data_mut()[i * segs + j] += g;
            }
            if self.opts.learn_heights {
                let dh_vals = &self.dh.value.data()[i * knots_n..(i + 1) * knots_n];
                for (j, g) in raw.dh.iter().enumerate() {
                    let passes = match self.opts.dh_limit {
                        Some(lim) => dh_vals[j].abs() < lim,
                        None => true,
                    };
                    if passes {
                        self.dh.grad.data_mut()[i * knots_n + j] += g;
                    }
                }
            }
        }

        if !need_input_grad {
            return Ok(None);
        }

        // full-mode adjoint: dx[s] = Σ_i Σ_t up[i,t]·k_i[s−t]
        let kernels: Vec<f64> = if symmetric {
            let mut full = vec![0.0; f_count * len];
            for i in 0..f_count {
                let half = &cache.half_kernels[i * (c + 1)..(i + 1) * (c + 1)];
                let row = &mut full[i * len..(i + 1) * len];
                for l in 0..=c {
                    row[l] = half[l];
                    row[2 * c - l] = half[l];
                }
            }
            full
        } else {
            cache.full_kernels.clone()
        };
        let t_in = cache.input.dim(2);
        let mut dx = Tensor::zeros(&[batch, 1, t_in]);
        for b in 0..batch {
            let lane = dx.lane_mut(b, 0);
            for i in 0..f_count {
                let k = &kernels[i * len..(i + 1) * len];
                let ups = upstream.lane(b, i);
                for (t0, &u) in ups.iter().enumerate() {
                    if u != 0.0 {
                        axpy(&mut lane[t0..t0 + len], u, k);
                    }
                }
            }
        }
        Ok(Some(dx))
    }

    pub fn zero_grads(&mut self) {
        self.base_raw.zero_grad();
        self.incr_raw.zero_grad();
        self.dh.zero_grad();
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[inline]
fn fold_window(x: &[f64], t0: usize, c: usize, fold: &mut [f64]) {
    let win = &x[t0..t0 + 2 * c + 1];
    for l in 0..c {
        fold[l] = win[l] + win[2 * c - l];
    }
    fold[c] = win[c];
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}
