fn main() {
    std::process::exit(folner_core::cli::main_with_args(std::env::args_os()));
}
