fn main() {
    std::process::exit(dirichlet_p::cli::main());
}
