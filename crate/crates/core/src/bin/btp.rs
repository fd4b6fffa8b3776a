fn main() {
    std::process::exit(btp::harness::main_with_args(std::env::args_os()));
}
