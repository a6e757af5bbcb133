fn main() {
    std::process::exit(displace::cli::main_with_args(std::env::args_os()));
}
