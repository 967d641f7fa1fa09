//! Learnable filter bank: piecewise-linear frequency-domain shapes,
//! closed-form time-domain synthesis, analytic parameter gradients, and the
//! first-layer convolution.
//!
//! A filter is described by `S + 2` frequency knots `(f_k, h_k)` on the
//! normalized axis `[0, 0.5]` (cycles/sample). Knot frequencies are stored as
//! unconstrained raw parameters — an absolute base anchor plus absolute
//! per-segment increments — so ordering and the minimum segment width are
//! guaranteed structurally rather than by projection after optimizer steps.
//! Heights are stored as offsets `Δh` around 1.

mod grad;
mod layer;
mod synthesis;

pub use grad::{kernel_param_gradients, FilterParamGrads};
pub use layer::{FilterLayer, FilterLayerOptions};
pub use synthesis::{
    apply_window, make_window, response_curve, response_fidelity, sinc_bandpass_kernel,
    synthesize_kernel, synthesize_kernel_half, synthesize_kernel_naive,
    synthesize_kernel_with_form, target_response, KernelForm,
};

use crate::error::{Error, Result};
use crate::mel::{hz_to_mel, mel_to_hz};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Hamming window denominator convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowConvention {
    /// `w[n] = 0.54 − 0.46·cos(2πn/(L−1))`: center-symmetric, peak 1 at the
    /// middle tap. Default, keeps windowed kernels even-symmetric.
    Symmetric,
    /// `w[n] = 0.54 − 0.46·cos(2πn/L)`: not center-symmetric; selectable for
    /// comparison against the symmetric form.
    Periodic,
}

/// Static description of one filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Number of filters F.
    pub num_filters: usize,
    /// Kernel length L in samples; must be odd.
    pub kernel_len: usize,
    /// Number of interior deformation points S per filter.
    pub num_deform_points: usize,
    /// Sample rate in Hz.
    pub sample_rate: f64,
    /// Minimum knot spacing eps_f on the normalized frequency axis.
    pub min_segment_width: f64,
    pub window_convention: WindowConvention,
}

impl FilterSpec {
    pub fn new(
        num_filters: usize,
        kernel_len: usize,
        num_deform_points: usize,
        sample_rate: f64,
    ) -> Self {
        FilterSpec {
            num_filters,
            kernel_len,
            num_deform_points,
            sample_rate,
            min_segment_width: 1e-4,
            window_convention: WindowConvention::Symmetric,
        }
    }

    /// Knots per filter (boundary cutoffs plus interior points).
    pub fn num_knots(&self) -> usize {
        self.num_deform_points + 2
    }

    /// Line segments per filter.
    pub fn num_segments(&self) -> usize {
        self.num_deform_points + 1
    }

    /// Center tap index (L − 1)/2.
    pub fn center(&self) -> usize {
        (self.kernel_len - 1) / 2
    }

    /// Trainable scalars per filter: 1 base + (S+1) increments + (S+2) heights.
    pub fn params_per_filter(&self) -> usize {
        2 * self.num_deform_points + 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_filters == 0 {
            return Err(Error::config("num_filters must be >= 1"));
        }
        if self.kernel_len < 3 || self.kernel_len % 2 == 0 {
            return Err(Error::config(format!(
                "kernel_len must be odd and >= 3, got {}",
                self.kernel_len
            )));
        }
        if self.sample_rate.is_nan() || self.sample_rate <= 0.0 {
            return Err(Error::config("sample_rate must be positive"));
        }
        let max_eps = 0.5 / (self.num_deform_points + 1) as f64;
        let eps_ok = self.min_segment_width > 0.0 && self.min_segment_width < max_eps;
        if self.min_segment_width.is_nan() || !eps_ok {
            return Err(Error::config(format!(
                "min_segment_width must lie in (0, {max_eps:.6}), got {}",
                self.min_segment_width
            )));
        }
        Ok(())
    }
}

/// Raw learnable parameters for a single filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Anchor for the first knot frequency (used through |·|).
    pub base_raw: f64,
    /// S+1 raw segment increments (used through |·|).
    pub incr_raw: Vec<f64>,
    /// S+2 height offsets; knot height is 1 + dh.
    pub dh: Vec<f64>,
}

impl FilterParams {
    pub fn is_finite(&self) -> bool {
        self.base_raw.is_finite()
            && self.incr_raw.iter().all(|v| v.is_finite())
            && self.dh.iter().all(|v| v.is_finite())
    }
}

/// Raw learnable parameters for the whole bank.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBankParams {
    pub filters: Vec<FilterParams>,
}

impl FilterBankParams {
    pub fn validate(&self, spec: &FilterSpec) -> Result<()> {
        if self.filters.len() != spec.num_filters {
            return Err(Error::Invariant(format!(
                "expected {} filters, got {}",
                spec.num_filters,
                self.filters.len()
            )));
        }
        for (i, p) in self.filters.iter().enumerate() {
            if p.incr_raw.len() != spec.num_segments() || p.dh.len() != spec.num_knots() {
                return Err(Error::Invariant(format!(
                    "filter {i}: expected {} increments and {} heights, got {} and {}",
                    spec.num_segments(),
                    spec.num_knots(),
                    p.incr_raw.len(),
                    p.dh.len()
                )));
            }
            if !p.is_finite() {
                return Err(Error::Invariant(format!(
                    "filter {i}: non-finite parameter"
                )));
            }
        }
        Ok(())
    }
}

/// Resolved, sorted, clamped knot list for one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyKnots {
    /// Normalized frequencies in [0, 0.5], strictly increasing.
    pub freqs: Vec<f64>,
    /// Amplitudes h_k = 1 + dh_k.
    pub heights: Vec<f64>,
}

impl FrequencyKnots {
    pub fn new(freqs: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        let k = FrequencyKnots { freqs, heights };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.heights.len() || self.freqs.len() < 2 {
            return Err(Error::Invariant(format!(
                "need matching freqs/heights with at least 2 knots, got {}/{}",
                self.freqs.len(),
                self.heights.len()
            )));
        }
        if !self
            .freqs
            .iter()
            .chain(self.heights.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::Invariant("non-finite knot value".into()));
        }
        if self.freqs[0] < 0.0 || *self.freqs.last().unwrap() > 0.5 {
            return Err(Error::Invariant(format!(
                "knot frequencies must lie in [0, 0.5], got [{}, {}]",
                self.freqs[0],
                self.freqs.last().unwrap()
            )));
        }
        for w in self.freqs.windows(2) {
            if w[1] <= w[0] || w[1].is_nan() || w[0].is_nan() {
                return Err(Error::Invariant(format!(
                    "knot frequencies must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    pub fn num_knots(&self) -> usize {
        self.freqs.len()
    }
}

/// Length-L time-domain tap vector with a well-defined center.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.len() < 3 || taps.len() % 2 == 0 {
            return Err(Error::Invariant(format!(
                "kernel length must be odd and >= 3, got {}",
                taps.len()
            )));
        }
        if !taps.iter().all(|v| v.is_finite()) {
            return Err(Error::Invariant("non-finite kernel tap".into()));
        }
        Ok(Kernel { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center tap index c = (L − 1)/2.
    pub fn center(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn into_taps(self) -> Vec<f64> {
        self.taps
    }
}

// ---------------------------------------------------------------------------
// Knot resolution
// ---------------------------------------------------------------------------

/// Which knots hit their upper clamp during resolution (subgradient 0 there).
#[derive(Debug, Clone)]
pub(crate) struct ResolveTrace {
    pub clamped: Vec<bool>,
}

/// Map raw parameters to a valid knot list.
///
/// `freqs[0] = clamp(|base_raw|, 0, u_0)` and
/// `freqs[k] = min(freqs[k-1] + eps_f + |incr_raw[k-1]|, u_k)` with the
/// per-knot headroom bound `u_k = 0.5 − (K−1−k)·eps_f`, so the remaining
/// minimum gaps always fit below 0.5. Total on finite inputs.
pub fn resolve_knots(params: &FilterParams, spec: &FilterSpec) -> FrequencyKnots {
    resolve_knots_traced(params, spec).0
}

pub(crate) fn resolve_knots_traced(
    params: &FilterParams,
    spec: &FilterSpec,
) -> (FrequencyKnots, ResolveTrace) {
    let k = spec.num_knots();
    let eps = spec.min_segment_width;
    debug_assert_eq!(params.incr_raw.len(), k - 1);
    debug_assert_eq!(params.dh.len(), k);

    let upper = |j: usize| 0.5 - (k - 1 - j) as f64 * eps;
    let mut freqs = vec![0.0; k];
    let mut clamped = vec![false; k];

    let base = params.base_raw.abs();
    if base > upper(0) {
        freqs[0] = upper(0);
        clamped[0] = true;
    } else {
        freqs[0] = base;
    }
    for j in 1..k {
        let unclamped = freqs[j - 1] + eps + params.incr_raw[j - 1].abs();
        let bound = upper(j);
        if unclamped > bound {
            freqs[j] = bound;
            clamped[j] = true;
        } else {
            freqs[j] = unclamped;
        }
    }

    let heights = params.dh.iter().map(|&d| 1.0 + d).collect();
    (FrequencyKnots { freqs, heights }, ResolveTrace { clamped })
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Defaults for [`init_filterbank_opts`].
#[derive(Debug, Clone)]
pub struct InitOptions {
    /// Low edge of the lowest band in Hz; avoids a degenerate 0-width band.
    pub mel_low_hz: f64,
    /// Δh is drawn uniformly from [−range, range].
    pub dh_init_range: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            mel_low_hz: 30.0,
            dh_init_range: 0.1,
        }
    }
}

/// Mel-spaced initialization: filter i spans the i-th of F consecutive
/// mel bands over [mel_low_hz, f_s/2] (adjacent filters share edges); the S
/// interior knots are equally spaced in mel within the band.
pub fn init_filterbank(spec: &FilterSpec, rng_seed: u64) -> Result<FilterBankParams> {
    init_filterbank_opts(spec, rng_seed, &InitOptions::default())
}

pub fn init_filterbank_opts(
    spec: &FilterSpec,
    rng_seed: u64,
    opts: &InitOptions,
) -> Result<FilterBankParams> {
    spec.validate()?;
    let nyquist = spec.sample_rate / 2.0;
    let low_ok = opts.mel_low_hz > 0.0 && opts.mel_low_hz < nyquist;
    if opts.mel_low_hz.is_nan() || !low_ok {
        return Err(Error::config(format!(
            "mel_low_hz must lie in (0, {nyquist}), got {}",
            opts.mel_low_hz
        )));
    }
    let m_lo = hz_to_mel(opts.mel_low_hz)?;
    let m_hi = hz_to_mel(nyquist)?;
    let f_count = spec.num_filters;
    let knots = spec.num_knots();

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dh_dist = Uniform::new_inclusive(-opts.dh_init_range, opts.dh_init_range);

    let mut filters = Vec::with_capacity(f_count);
    for i in 0..f_count {
        let band_lo = m_lo + (m_hi - m_lo) * i as f64 / f_count as f64;
        let band_hi = m_lo + (m_hi - m_lo) * (i + 1) as f64 / f_count as f64;
        let mut nf = Vec::with_capacity(knots);
        for t in 0..knots {
            let m = band_lo + (band_hi - band_lo) * t as f64 / (knots - 1) as f64;
            nf.push(mel_to_hz(m)? / spec.sample_rate);
        }
        let mut incr_raw = Vec::with_capacity(knots - 1);
        for t in 0..knots - 1 {
            let gap = nf[t + 1] - nf[t] - spec.min_segment_width;
            if gap < 0.0 {
                return Err(Error::config(format!(
                    "filter {i}: mel knot spacing {} below min_segment_width {}; \
                     reduce num_filters, num_deform_points, or min_segment_width",
                    nf[t + 1] - nf[t],
                    spec.min_segment_width
                )));
            }
            incr_raw.push(gap);
        }
        let dh = (0..knots).map(|_| dh_dist.sample(&mut rng)).collect();
        filters.push(FilterParams {
            base_raw: nf[0],
            incr_raw,
            dh,
        });
    }
    Ok(FilterBankParams { filters })
}

// ---------------------------------------------------------------------------
// Structured-text serialization (versioned, 17 significant digits)
// ---------------------------------------------------------------------------

const BANK_HEADER: &str = "pfnet-filterbank v1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize spec fields plus per-filter raw parameters at full precision.
pub fn write_filterbank_text(spec: &FilterSpec, params: &FilterBankParams) -> Result<String> {
    params.validate(spec)?;
    let mut out = String::new();
    out.push_str(BANK_HEADER);
    out.push('\n');
    out.push_str(&format!("num_filters {}\n", spec.num_filters));
    out.push_str(&format!("kernel_len {}\n", spec.kernel_len));
    out.push_str(&format!("num_deform_points {}\n", spec.num_deform_points));
    out.push_str(&format!("sample_rate {}\n", fmt_f64(spec.sample_rate)));
    out.push_str(&format!(
        "min_segment_width {}\n",
        fmt_f64(spec.min_segment_width)
    ));
    let conv = match spec.window_convention {
        WindowConvention::Symmetric => "symmetric",
        WindowConvention::Periodic => "periodic",
    };
    out.push_str(&format!("window_convention {conv}\n"));
    for (i, p) in params.filters.iter().enumerate() {
        out.push_str(&format!("filter {i}\n"));
        out.push_str(&format!("base_raw {}\n", fmt_f64(p.base_raw)));
        let incr: Vec<String> = p.incr_raw.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!("incr_raw {}\n", incr.join(" ")));
        let dh: Vec<String> = p.dh.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!("dh {}\n", dh.join(" ")));
    }
    Ok(out)
}

pub fn parse_filterbank_text(text: &str) -> Result<(FilterSpec, FilterBankParams)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != BANK_HEADER {
        return Err(Error::format(
            "header",
            format!("expected '{BANK_HEADER}', got '{header}'"),
        ));
    }

    let mut fields = std::collections::BTreeMap::new();
    let mut rest: Vec<&str> = Vec::new();
    for line in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("filter ") {
            rest.push(line);
            break;
        }
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| Error::format("spec", format!("malformed line '{line}'")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    rest.extend(lines.map(str::trim).filter(|l| !l.is_empty()));

    let get = |k: &str| -> Result<String> {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::format(k, "missing field"))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|e| Error::format(k, format!("{e}")))
    };
    let parse_f64 = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|e| Error::format(k, format!("{e}")))
    };
    let spec = FilterSpec {
        num_filters: parse_usize("num_filters")?,
        kernel_len: parse_usize("kernel_len")?,
        num_deform_points: parse_usize("num_deform_points")?,
        sample_rate: parse_f64("sample_rate")?,
        min_segment_width: parse_f64("min_segment_width")?,
        window_convention: match get("window_convention")?.as_str() {
            "symmetric" => WindowConvention::Symmetric,
            "periodic" => WindowConvention::Periodic,
            other => {
                return Err(Error::format(
                    "window_convention",
                    format!("unknown value '{other}'"),
                ))
            }
        },
    };
    spec.validate()?;

    let mut filters = Vec::with_capacity(spec.num_filters);
    let mut it = rest.iter().peekable();
    for i in 0..spec.num_filters {
        let head = it
            .next()
            .ok_or_else(|| Error::format("filter", format!("missing block for filter {i}")))?;
        if *head != format!("filter {i}") {
            return Err(Error::format(
                "filter",
                format!("expected 'filter {i}', got '{head}'"),
            ));
        }
        let mut take = |key: &str, want: usize| -> Result<Vec<f64>> {
            let line = it
                .next()
                .ok_or_else(|| Error::format(key, format!("missing for filter {i}")))?;
            let body = line
                .strip_prefix(key)
                .ok_or_else(|| Error::format(key, format!("expected '{key} ...', got '{line}'")))?
                .trim();
            let vals: Result<Vec<f64>> = body
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::format(key, format!("{e}")))
                })
                .collect();
            let vals = vals?;
            if vals.len() != want {
                return Err(Error::format(
                    key,
                    format!("filter {i}: expected {want} values, got {}", vals.len()),
                ));
            }
            Ok(vals)
        };
        let base = take("base_raw", 1)?[0];
        let incr_raw = take("incr_raw", spec.num_segments())?;
        let dh = take("dh", spec.num_knots())?;
        filters.push(FilterParams {
            base_raw: base,
            incr_raw,
            dh,
        });
    }
    let params = FilterBankParams { filters };
    params.validate(&spec)?;
    Ok((spec, params))
}
