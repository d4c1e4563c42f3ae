fn main() {
    std::process::exit(mosaic::cli::main_with_args(std::env::args_os()));
}
