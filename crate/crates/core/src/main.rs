fn main() {
    std::process::exit(holocell::cli::run(std::env::args_os()));
}
