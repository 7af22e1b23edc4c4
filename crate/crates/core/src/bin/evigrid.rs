fn main() {
    std::process::exit(evigrid::cli::main());
}
