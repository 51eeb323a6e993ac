fn main() {
    std::process::exit(fertcast::cli::run_from(std::env::args_os()));
}
