fn main() {
    std::process::exit(darap_harness::cli::execute(std::env::args_os()));
}
