fn main() {
    std::process::exit(arcfit::cli::run(std::env::args_os()));
}
