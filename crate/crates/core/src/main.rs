fn main() {
    std::process::exit(objpool::cli::run(std::env::args_os()));
}
