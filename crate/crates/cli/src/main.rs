fn main() {
    std::process::exit(attrgraph_cli::run(std::env::args_os()));
}
