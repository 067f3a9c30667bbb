fn main() {
    std::process::exit(toprank::cli::run(std::env::args_os()));
}
