fn main() {
    std::process::exit(eg_elasticity::cli::run(std::env::args_os()));
}
