//! Binary entry point; all behavior lives in [`foj::cli`].

fn main() {
    std::process::exit(foj::cli::run());
}
