fn main() {
    std::process::exit(tpsim::cli::run());
}
