fn main() {
    std::process::exit(syncmark::cli::run(std::env::args_os()));
}
