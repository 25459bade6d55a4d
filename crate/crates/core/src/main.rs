fn main() {
    std::process::exit(offline_co::cli::run(std::env::args_os()));
}
