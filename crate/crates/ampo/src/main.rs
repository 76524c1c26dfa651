fn main() {
    std::process::exit(ampo::cli::main());
}
