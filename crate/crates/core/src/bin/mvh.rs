fn main() {
    std::process::exit(mvh::cli::run(std::env::args_os()));
}
