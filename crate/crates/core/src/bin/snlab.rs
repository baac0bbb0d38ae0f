fn main() {
    std::process::exit(snlab::cli::main_with_args(std::env::args_os()));
}
