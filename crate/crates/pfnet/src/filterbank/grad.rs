//! Analytic gradients of windowed kernel taps w.r.t. raw filter parameters.
//!
//! The chain runs upstream → windowed taps → unwindowed taps → knot
//! frequencies/heights → raw parameters. The per-segment tap derivatives are
//! even in the tap offset n, so the upstream is folded into per-offset pair
//! sums before the knot loop; the raw-parameter chain then walks the
//! increment reparameterization backwards, dropping adjoints at clamped
//! knots (subgradient 0).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filterbank::{
    resolve_knots_traced, FilterParams, FilterSpec, FrequencyKnots, ResolveTrace,
};

/// Gradients with the same layout as [`FilterParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParamGrads {
    pub base_raw: f64,
    pub incr_raw: Vec<f64>,
    pub dh: Vec<f64>,
}

/// Gradients of `Σ_n upstream[n]·g_w[n]` w.r.t. one filter's raw parameters,
/// where `g_w` is the windowed synthesized kernel.
pub fn kernel_param_gradients(
    params: &FilterParams,
    spec: &FilterSpec,
    window: &[f64],
    upstream: &[f64],
) -> Result<FilterParamGrads> {
    let len = spec.kernel_len;
    if window.len() != len || upstream.len() != len {
        return Err(Error::shape(format!(
            "window/upstream length {}/{} vs kernel length {len}",
            window.len(),
            upstream.len()
        )));
    }
    if !params.is_finite() {
        return Err(Error::Invariant("non-finite filter parameter".into()));
    }
    let (knots, trace) = resolve_knots_traced(params, spec);
    let c = (len - 1) / 2;

    // Fold upstream·window over symmetric tap pairs: the tap value at ±n is
    // shared, so its adjoint is the pair sum.
    let mut folded = vec![0.0; c + 1];
    folded[0] = upstream[c] * window[c];
    for n in 1..=c {
        folded[n] = upstream[c + n] * window[c + n] + upstream[c - n] * window[c - n];
    }

    let (grad_f, grad_h) = knot_gradients(&knots, &folded);
    Ok(chain_to_raw(params, &trace, &grad_f, &grad_h))
}

/// Accumulate ∂(Σ_n folded[n]·g[n])/∂(f_j, h_j) over all segments.
pub(crate) fn knot_gradients(knots: &FrequencyKnots, folded: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = knots.num_knots();
    let segs = k - 1;
    let fs = &knots.freqs;
    let hs = &knots.heights;
    let mut grad_f = vec![0.0; k];
    let mut grad_h = vec![0.0; k];

    // n = 0: seg(0) = (f_hi − f_lo)(h_lo + h_hi)
    let w0 = folded[0];
    if w0 != 0.0 {
        for s in 0..segs {
            let width = fs[s + 1] - fs[s];
            let hsum = hs[s] + hs[s + 1];
            grad_h[s] += w0 * width;
            grad_h[s + 1] += w0 * width;
            grad_f[s] -= w0 * hsum;
            grad_f[s + 1] += w0 * hsum;
        }
    }

    let mut sin_k = vec![0.0; k];
    let mut cos_k = vec![0.0; k];
    for (n, &wn) in folded.iter().enumerate().skip(1) {
        if wn == 0.0 {
            continue;
        }
        let nf = n as f64;
        for j in 0..k {
            let a = 2.0 * PI * fs[j] * nf;
            sin_k[j] = a.sin();
            cos_k[j] = a.cos();
        }
        let inv1 = 1.0 / (PI * nf);
        let inv2 = 1.0 / (2.0 * PI * PI * nf * nf);
        for s in 0..segs {
            let width = fs[s + 1] - fs[s];
            let delta = (hs[s + 1] - hs[s]) / width;
            let dcos = (cos_k[s + 1] - cos_k[s]) * inv2;
            grad_h[s] += wn * (-sin_k[s] * inv1 - dcos / width);
            grad_h[s + 1] += wn * (sin_k[s + 1] * inv1 + dcos / width);
            grad_f[s] +=
                wn * (-2.0 * hs[s] * cos_k[s] + delta * dcos / width + delta * sin_k[s] * inv1);
            grad_f[s + 1] += wn
                * (2.0 * hs[s + 1] * cos_k[s + 1]
                    - delta * dcos / width
                    - delta * sin_k[s + 1] * inv1);
        }
    }
    (grad_f, grad_h)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Walk the reparameterization backwards: each knot's adjoint flows into its
/// increment (through |·|) and into the previous knot unless the knot was
/// clamped, in which case the adjoint is dropped.
pub(crate) fn chain_to_raw(
    params: &FilterParams,
    trace: &ResolveTrace,
    grad_f: &[f64],
    grad_h: &[f64],
) -> FilterParamGrads {
    let k = grad_f.len();
    let mut incr = vec![0.0; k - 1];
    let mut carry = 0.0;
    for j in (1..k).rev() {
        let total = grad_f[j] + carry;
        if trace.clamped[j] {
            carry = 0.0;
        } else {
            incr[j - 1] = total * sign(params.incr_raw[j - 1]);
            carry = total;
        }
    }
    let total0 = grad_f[0] + carry;
    let base = if trace.clamped[0] {
        0.0
    } else {
        total0 * sign(params.base_raw)
    };
    FilterParamGrads {
        base_raw: base,
        incr_raw: incr,
        dh: grad_h.to_vec(),
    }
}
