fn main() {
    std::process::exit(sublm::cli::run(std::env::args_os()));
}
