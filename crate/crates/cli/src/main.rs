fn main() {
    std::process::exit(vars_cli::run(std::env::args_os()));
}
