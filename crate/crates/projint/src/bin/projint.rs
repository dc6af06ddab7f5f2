fn main() {
    std::process::exit(projint::bench::cli::cli(std::env::args_os()));
}
