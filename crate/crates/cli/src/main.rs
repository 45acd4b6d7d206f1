fn main() {
    std::process::exit(socfopt::run(std::env::args().collect()));
}
