fn main() {
    std::process::exit(msqkd::cli::run(std::env::args_os()));
}
