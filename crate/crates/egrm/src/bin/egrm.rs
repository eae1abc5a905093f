fn main() {
    std::process::exit(egrm::cli::run(std::env::args_os()));
}
