fn main() {
    std::process::exit(bures::cli::run());
}
