fn main() {
    std::process::exit(wiplab::app::run_cli(std::env::args_os()));
}
