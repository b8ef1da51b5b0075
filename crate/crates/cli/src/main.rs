fn main() {
    std::process::exit(rkmix_cli::main_with_args(std::env::args_os()));
}
