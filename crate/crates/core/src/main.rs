fn main() {
    std::process::exit(aeroforge::cli::run(std::env::args_os()));
}
