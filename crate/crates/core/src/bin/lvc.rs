fn main() {
    std::process::exit(lvc::cli::run(std::env::args_os()));
}
