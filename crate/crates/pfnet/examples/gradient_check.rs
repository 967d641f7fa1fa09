//! Verify every analytic gradient against central finite differences.
//!
//!     cargo run --release --example gradient_check

use pfnet::nn::gradcheck::{gradient_check_suite, GradCheckConfig};

fn main() -> pfnet::Result<()> {
    let report = gradient_check_suite(&GradCheckConfig::default())?;
    print!("{}", report.render());
    if report.all_pass() {
        println!("\nall gradient groups match finite differences");
        Ok(())
    } else {
        std::process::exit(3);
    }
}
