fn main() {
    std::process::exit(flowweld_cli::run_from_args(std::env::args_os()));
}
