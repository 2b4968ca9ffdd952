fn main() {
    std::process::exit(sfnn::cli::run_from(std::env::args_os()));
}
