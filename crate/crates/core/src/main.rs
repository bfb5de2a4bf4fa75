fn main() {
    std::process::exit(privscore::cli::main());
}
