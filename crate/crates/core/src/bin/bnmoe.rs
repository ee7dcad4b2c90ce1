fn main() {
    std::process::exit(bnmoe::cli::main());
}
