fn main() {
    std::process::exit(weakmeas::cli::run(std::env::args_os()));
}
