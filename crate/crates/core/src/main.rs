fn main() {
    std::process::exit(conrl::cli::main_with_args(std::env::args_os()));
}
