fn main() {
    std::process::exit(relog_cli::run(std::env::args_os()));
}
