fn main() {
    std::process::exit(evcharge::cli::main_with_args(std::env::args_os()));
}
