fn main() {
    std::process::exit(plstab::cli::main_with_args(std::env::args_os()));
}
