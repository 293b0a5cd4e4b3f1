fn main() {
    std::process::exit(capa_cli::main_with_args(std::env::args_os()));
}
