fn main() {
    std::process::exit(typoscope::cli::run(std::env::args_os()));
}
