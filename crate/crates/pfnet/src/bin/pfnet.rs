//! Thin binary: everything lives in the library.

fn main() {
    std::process::exit(pfnet::experiment::cli::main_from_env());
}
