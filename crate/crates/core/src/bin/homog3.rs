fn main() {
    std::process::exit(homog3::cli::run(std::env::args_os()));
}
