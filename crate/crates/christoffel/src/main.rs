fn main() {
    std::process::exit(christoffel::cli::run());
}
