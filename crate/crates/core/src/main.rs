fn main() {
    std::process::exit(anisofrac::cli::main_with(std::env::args_os()));
}
