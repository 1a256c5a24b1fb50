use std::process::exit;

fn main() {
    synforge::cli::init_threads();
    exit(synforge::cli::run(std::env::args_os()));
}
