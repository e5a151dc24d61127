fn main() {
    std::process::exit(escape::cli::run(std::env::args_os()));
}
