fn main() {
    std::process::exit(divfree_cli::main_with(std::env::args_os()));
}
