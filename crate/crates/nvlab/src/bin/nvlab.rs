fn main() {
    std::process::exit(nvlab::cli_runner::run(std::env::args_os()));
}
