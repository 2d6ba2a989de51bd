fn main() {
    std::process::exit(vortexlines_cli::run_cli(std::env::args_os()));
}
