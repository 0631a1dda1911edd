fn main() {
    std::process::exit(dirac::cli::run(std::env::args_os()));
}
