fn main() {
    std::process::exit(paradigms::cli::main());
}
