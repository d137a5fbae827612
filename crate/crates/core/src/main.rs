fn main() {
    std::process::exit(kicklab::cli::main_with(std::env::args_os()));
}
