fn main() {
    std::process::exit(resilience::cli::run(std::env::args_os()));
}
