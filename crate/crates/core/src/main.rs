fn main() {
    std::process::exit(barrier_homotopy::cli::run_cli(std::env::args_os()));
}
