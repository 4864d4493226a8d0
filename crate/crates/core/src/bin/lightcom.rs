fn main() {
    std::process::exit(lightcom::harness::cli_dispatch(std::env::args_os()));
}
