fn main() {
    std::process::exit(csen::pipeline::cli_main(std::env::args()));
}
