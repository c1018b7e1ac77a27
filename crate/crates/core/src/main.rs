fn main() {
    std::process::exit(climate_stress::cli::run_cli(std::env::args_os()));
}
