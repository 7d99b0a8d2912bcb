fn main() {
    std::process::exit(layerlens::cli::run(std::env::args_os()));
}
