fn main() {
    std::process::exit(advseg::cli::run(std::env::args_os()));
}
