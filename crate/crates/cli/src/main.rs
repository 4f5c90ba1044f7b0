fn main() {
    std::process::exit(hornatlas_cli::main_with(std::env::args_os()));
}
