fn main() {
    std::process::exit(lsr::cli::run());
}
