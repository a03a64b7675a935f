fn main() {
    std::process::exit(rmc::cli::run(std::env::args_os()));
}
