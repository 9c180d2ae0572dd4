fn main() {
    std::process::exit(fdcov::cli::run(std::env::args_os()));
}
