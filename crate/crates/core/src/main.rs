fn main() {
    std::process::exit(okpair::cli::run(std::env::args_os()));
}
