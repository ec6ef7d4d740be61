fn main() {
    std::process::exit(translasso::cli::run(std::env::args_os()));
}
