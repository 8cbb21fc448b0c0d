fn main() {
    std::process::exit(arealaw::pipeline::cli::run_cli(std::env::args_os()));
}
