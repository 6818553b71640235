fn main() {
    std::process::exit(mdyn::cli::run(std::env::args_os()));
}
