fn main() {
    std::process::exit(midinet::cli::run(std::env::args_os()));
}
