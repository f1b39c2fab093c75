fn main() {
    std::process::exit(grplq::cli::run());
}
