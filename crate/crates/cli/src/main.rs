fn main() {
    std::process::exit(simm_cli::run(std::env::args_os()));
}
