fn main() {
    std::process::exit(evolens::cli::main_with(std::env::args_os()));
}
