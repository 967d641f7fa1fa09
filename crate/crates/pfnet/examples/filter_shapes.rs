//! Build a mel-initialized filter bank, synthesize its kernels, and export
//! time/frequency CSVs.
//!
//!     cargo run --release --example filter_shapes

use pfnet::export::export_filter_responses;
use pfnet::filterbank::{
    init_filterbank, resolve_knots, response_fidelity, synthesize_kernel, FilterSpec,
};

fn main() -> pfnet::Result<()> {
    let spec = FilterSpec::new(16, 251, 5, 16000.0);
    let params = init_filterbank(&spec, 7)?;

    println!("filter  f_beg..f_end (norm)   heights            fidelity@L=251");
    for (i, p) in params.filters.iter().enumerate() {
        let knots = resolve_knots(p, &spec);
        let kernel = synthesize_kernel(&knots, spec.kernel_len)?;
        let err = response_fidelity(&kernel, &knots, 4 * spec.kernel_len)?;
        let h_lo = knots.heights.first().unwrap();
        let h_hi = knots.heights.last().unwrap();
        println!(
            "{i:>6}  {:.4}..{:.4}        {:.3}..{:.3}        {err:.4}",
            knots.freqs.first().unwrap(),
            knots.freqs.last().unwrap(),
            h_lo,
            h_hi
        );
    }

    let out = std::path::Path::new("filter-shapes-out");
    std::fs::create_dir_all(out)?;
    export_filter_responses(
        &spec,
        &params,
        1024,
        &out.join("filters_time.csv"),
        &out.join("filters_freq.csv"),
    )?;
    println!(
        "\nwrote {}/filters_time.csv and filters_freq.csv",
        out.display()
    );
    Ok(())
}
