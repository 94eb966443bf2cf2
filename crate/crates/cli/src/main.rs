fn main() {
    std::process::exit(lrlattice_cli::main_with_args(std::env::args_os()));
}
