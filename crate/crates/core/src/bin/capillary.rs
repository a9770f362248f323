fn main() {
    std::process::exit(capillary::cli::main_with_args(std::env::args_os()));
}
