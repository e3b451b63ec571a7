fn main() {
    std::process::exit(greenkit::cli::run(std::env::args_os()));
}
