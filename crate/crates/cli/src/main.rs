fn main() {
    std::process::exit(deepchroma_cli::run(std::env::args()));
}
