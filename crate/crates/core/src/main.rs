fn main() {
    std::process::exit(rv_core::cli::main_with_args(std::env::args_os()));
}
