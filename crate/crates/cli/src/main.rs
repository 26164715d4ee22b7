fn main() {
    std::process::exit(emscat_cli::run());
}
