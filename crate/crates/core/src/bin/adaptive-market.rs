fn main() {
    std::process::exit(adaptive_market::cli::run(std::env::args_os()));
}
