fn main() {
    std::process::exit(lgl::cli::run(std::env::args_os()));
}
