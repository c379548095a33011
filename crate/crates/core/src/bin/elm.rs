fn main() {
    std::process::exit(elm_core::cli::run(std::env::args_os()));
}
