fn main() {
    std::process::exit(morphocf::cli::main_with_args(std::env::args_os()));
}
