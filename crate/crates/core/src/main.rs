fn main() {
    std::process::exit(pyrseg::cli::main_with_args(std::env::args_os()));
}
