fn main() {
    std::process::exit(fairbayes::cli::run(std::env::args_os()));
}
