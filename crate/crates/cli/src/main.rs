fn main() {
    std::process::exit(tempocap_cli::main_with_args(std::env::args_os()).code());
}
