fn main() {
    std::process::exit(betaplane::cli::run(std::env::args_os()));
}
