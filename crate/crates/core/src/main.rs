fn main() {
    std::process::exit(hyptest::cli::run(std::env::args_os()));
}
