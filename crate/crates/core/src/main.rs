fn main() {
    std::process::exit(oprank::cli::run(std::env::args_os()));
}
