fn main() {
    std::process::exit(factor_demand::cli::run(std::env::args_os()));
}
