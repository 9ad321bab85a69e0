fn main() {
    std::process::exit(unitax_cli::run(std::env::args_os()));
}
