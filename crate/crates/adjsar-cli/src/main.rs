fn main() {
    std::process::exit(adjsar_cli::run(std::env::args_os()));
}
