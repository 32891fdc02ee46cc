fn main() {
    std::process::exit(periodic_r0::cli::run(std::env::args_os()));
}
