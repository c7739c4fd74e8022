fn main() {
    std::process::exit(lyapforge::cli::run(std::env::args_os()));
}
