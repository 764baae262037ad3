fn main() {
    std::process::exit(vanhove_core::experiments::cli::run_cli(std::env::args_os()));
}
