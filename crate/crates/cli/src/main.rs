fn main() {
    std::process::exit(polarlens_cli::run(std::env::args_os()));
}
