fn main() {
    std::process::exit(entswap_cli::run(std::env::args_os()));
}
