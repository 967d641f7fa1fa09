//! The telescoping identity: with every knot height fixed at 1, the
//! piecewise-linear synthesis collapses segment by segment to the
//! rectangular (sinc) band-pass kernel, for any number of interior knots.
//!
//!     cargo run --release --example sincnet_reduction

use pfnet::filterbank::{sinc_bandpass_kernel, synthesize_kernel, FrequencyKnots};

fn main() -> pfnet::Result<()> {
    let kernel_len = 251;
    let (f_beg, f_end) = (0.08, 0.27);
    let reference = sinc_bandpass_kernel(f_beg, f_end, kernel_len)?;

    for interior in [0usize, 1, 3, 5, 9] {
        let mut freqs = vec![f_beg];
        for k in 1..=interior {
            freqs.push(f_beg + (f_end - f_beg) * k as f64 / (interior + 1) as f64);
        }
        freqs.push(f_end);
        let heights = vec![1.0; freqs.len()];
        let knots = FrequencyKnots::new(freqs, heights)?;
        let kernel = synthesize_kernel(&knots, kernel_len)?;
        let max_diff = kernel
            .taps()
            .iter()
            .zip(reference.taps())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        println!("{interior} interior knots: max |tap difference| = {max_diff:.3e}");
    }
    println!("\nall heights = 1 makes the shaped bank identical to a sinc band-pass bank");
    Ok(())
}
