fn main() {
    std::process::exit(odeq::cli::main_with_args(std::env::args_os()));
}
