fn main() {
    std::process::exit(polyoracle::cli::main_with_args(std::env::args_os()));
}
