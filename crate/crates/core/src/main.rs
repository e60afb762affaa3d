fn main() {
    std::process::exit(metgraph::cli::main());
}
