fn main() {
    std::process::exit(fairgate_cli::run(std::env::args_os()));
}
