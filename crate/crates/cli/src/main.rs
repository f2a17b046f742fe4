fn main() {
    std::process::exit(mipt_cli::main_from(std::env::args_os()));
}
