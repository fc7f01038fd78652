fn main() {
    std::process::exit(tui_cli::run(std::env::args_os()));
}
