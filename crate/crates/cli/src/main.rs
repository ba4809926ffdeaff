fn main() {
    std::process::exit(parisi_cli::run(std::env::args_os()));
}
