fn main() {
    std::process::exit(lsgraph::cli::run(std::env::args_os()));
}
