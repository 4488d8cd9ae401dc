fn main() {
    std::process::exit(hamflow_cli::run(std::env::args_os()));
}
