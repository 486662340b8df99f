fn main() {
    std::process::exit(smartbeam::cli::main_with(std::env::args_os()));
}
