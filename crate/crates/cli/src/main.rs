fn main() {
    std::process::exit(k3limit_cli::run(std::env::args_os()));
}
