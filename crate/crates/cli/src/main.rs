fn main() {
    std::process::exit(aud_cli::run(std::env::args_os()));
}
