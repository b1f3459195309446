fn main() {
    std::process::exit(epdc::cli::main_with_args(std::env::args_os()));
}
