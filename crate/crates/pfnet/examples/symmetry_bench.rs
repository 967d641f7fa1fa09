//! Measure what kernel symmetry is worth: half-tap synthesis plus a fold of
//! each input window shared across the whole bank, against full-length
//! synthesis and per-filter dot products.
//!
//!     cargo run --release --example symmetry_bench

use pfnet::experiment::bench::{run_bench, BenchConfig};

fn main() -> pfnet::Result<()> {
    let report = run_bench(&BenchConfig::default())?;
    println!("{}", report.render());
    Ok(())
}
