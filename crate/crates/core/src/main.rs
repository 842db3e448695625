fn main() {
    std::process::exit(qconsist::cli::run(std::env::args_os()));
}
