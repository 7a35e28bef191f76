fn main() {
    std::process::exit(laydown::cli::run(std::env::args_os()));
}
