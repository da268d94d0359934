fn main() {
    std::process::exit(spoofbench::harness::cli_main(std::env::args()));
}
