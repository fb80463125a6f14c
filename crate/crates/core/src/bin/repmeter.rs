fn main() {
    std::process::exit(repmeter::cli::run(std::env::args_os()));
}
