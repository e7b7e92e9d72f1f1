fn main() {
    std::process::exit(imputelab::cli::run(std::env::args_os()));
}
