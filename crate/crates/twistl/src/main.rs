fn main() {
    std::process::exit(twistl::cli::main_with_args(std::env::args_os()));
}
