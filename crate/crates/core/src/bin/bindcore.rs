fn main() {
    std::process::exit(bindcore::cli::run(std::env::args_os()));
}
