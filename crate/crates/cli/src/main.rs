fn main() {
    std::process::exit(faframe_cli::run(std::env::args_os()));
}
