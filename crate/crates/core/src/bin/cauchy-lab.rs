fn main() {
    std::process::exit(cauchy_lab::cli::main_with_args(std::env::args_os()));
}
