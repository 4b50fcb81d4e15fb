fn main() {
    std::process::exit(logshare::cli::main_with_args(std::env::args_os()));
}
